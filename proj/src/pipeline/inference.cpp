#include "talknet/pipeline/inference.hpp"

#include <algorithm>
#include <cmath>

#include "talknet/error.hpp"
#include "talknet/models/losses.hpp"
#include "talknet/pipeline/checkpoint.hpp"

namespace talknet::pipeline {

namespace fs = std::filesystem;
using models::ModelKind;

namespace {

io::Container open_checkpoint(const fs::path& dir, const char* name) {
  const auto path = dir / name;
  if (!fs::exists(path)) {
    throw Error(Errc::CheckpointMissing, "missing checkpoint " + path.string(), {{"path", path.string()}});
  }
  return io::load_container(path);
}

CheckpointMeta expect_kind(const io::Container& c, ModelKind kind, const fs::path& dir) {
  auto meta = checkpoint_meta(c);
  if (meta.config.kind != kind) {
    throw Error(Errc::CorruptCheckpoint, "checkpoint in " + dir.string() + " holds a " + models::kind_name(meta.config.kind) +
                                             " model where a " + models::kind_name(kind) + " model was expected");
  }
  return meta;
}

template <typename Model>
void restore(Model& model, const io::Container& c) {
  auto params = model.params();
  restore_params(c, params);
}

}  // namespace

struct Synthesizer::Impl {
  text::Vocab vocab;
  audio::PitchStats stats;
  models::DurationModel<float> duration;
  models::PitchModel<float> pitch;
  models::MelModel<float> mel;

  Impl(const CheckpointMeta& d, const CheckpointMeta& p, const CheckpointMeta& m)
      : vocab(d.vocab),
        stats(p.stats),
        duration(d.config, d.vocab.size(), 0),
        pitch(p.config, p.vocab.size(), 0),
        mel(m.config, m.vocab.size(), 0) {}

  std::vector<DurationPrediction> durations(const std::vector<std::string>& texts, double scale) {
    std::vector<text::TokenSeq> seqs;
    for (const auto& t : texts) seqs.push_back(text::insert_blanks(text::tokenize(t, vocab)));
    const auto y = duration.forward(models::TokenBatch::from(seqs), nn::ForwardContext{});
    std::vector<DurationPrediction> out;
    const auto& l = y.layout;
    for (std::size_t b = 0; b < seqs.size(); ++b) {
      const std::size_t n = l.lengths[b];
      std::vector<double> item(y.channels * n);
      for (std::size_t c = 0; c < y.channels; ++c) {
        for (std::size_t t = 0; t < n; ++t) item[c * n + t] = y.at(c, b * l.max_len + t);
      }
      auto d = y.channels == 1 ? models::decode_log_durations(item, seqs[b], scale)
                               : models::decode_duration_classes(item, y.channels, seqs[b], scale);
      out.push_back({seqs[b], std::move(d)});
    }
    return out;
  }

  std::vector<audio::PitchTrack> pitches(const std::vector<DurationPrediction>& items) {
    std::vector<text::TokenSeq> seqs;
    std::vector<text::DurationSeq> durs;
    for (const auto& it : items) {
      seqs.push_back(it.tokens);
      durs.push_back(it.durations);
    }
    const auto out = pitch.forward(models::TokenBatch::from(seqs), durs, nn::ForwardContext{});
    const auto& l = out.body.layout;
    std::vector<audio::PitchTrack> tracks(items.size());
    for (std::size_t b = 0; b < items.size(); ++b) {
      tracks[b].resize(l.lengths[b]);
      for (std::size_t t = 0; t < l.lengths[b]; ++t) {
        const std::size_t col = b * l.max_len + t;
        const double logit = out.nonvoiced_logit.at(0, col);
        if (1.0 / (1.0 + std::exp(-logit)) > 0.5) continue;
        const double hz = out.body.at(0, col) * stats.sigma_f0 + stats.mu_f0;
        tracks[b][t] = static_cast<float>(std::clamp(hz, 65.0, 400.0));
      }
    }
    return tracks;
  }

  std::vector<audio::MelSpec> mels(const std::vector<std::string>& texts, double scale) {
    const auto items = durations(texts, scale);
    const auto f0 = pitches(items);
    std::vector<text::TokenSeq> seqs;
    std::vector<text::DurationSeq> durs;
    for (const auto& it : items) {
      seqs.push_back(it.tokens);
      durs.push_back(it.durations);
    }
    const auto y = mel.forward(models::TokenBatch::from(seqs), durs, mel.pitch_input(f0), nn::ForwardContext{});
    const auto& l = y.layout;
    std::vector<audio::MelSpec> out(texts.size());
    for (std::size_t b = 0; b < texts.size(); ++b) {
      auto& m = out[b];
      m.bins = static_cast<int>(y.channels);
      m.frames = static_cast<int>(l.lengths[b]);
      m.values.resize(y.channels * l.lengths[b]);
      for (std::size_t c = 0; c < y.channels; ++c) {
        std::copy_n(y.row(c) + b * l.max_len, l.lengths[b], m.values.begin() + static_cast<std::ptrdiff_t>(c * l.lengths[b]));
      }
    }
    return out;
  }
};

Synthesizer::Synthesizer(const fs::path& ckpt_dir) {
  const auto dc = open_checkpoint(ckpt_dir, "duration.ckpt");
  const auto pc = open_checkpoint(ckpt_dir, "pitch.ckpt");
  const auto mc = open_checkpoint(ckpt_dir, "mel.ckpt");
  const auto dm = expect_kind(dc, ModelKind::Duration, ckpt_dir);
  const auto pm = expect_kind(pc, ModelKind::Pitch, ckpt_dir);
  const auto mm = expect_kind(mc, ModelKind::Mel, ckpt_dir);
  if (dm.vocab.hash() != pm.vocab.hash() || dm.vocab.hash() != mm.vocab.hash()) {
    throw Error(Errc::VocabMismatch, "checkpoints in " + ckpt_dir.string() + " were trained with different vocabularies",
                {{"dir", ckpt_dir.string()}});
  }
  impl_ = std::make_unique<Impl>(dm, pm, mm);
  restore(impl_->duration, dc);
  restore(impl_->pitch, pc);
  restore(impl_->mel, mc);
}

Synthesizer::~Synthesizer() = default;

const text::Vocab& Synthesizer::vocab() const { return impl_->vocab; }
const audio::PitchStats& Synthesizer::stats() const { return impl_->stats; }

DurationPrediction Synthesizer::predict_durations(const std::string& text, double scale) {
  return predict_durations(std::vector<std::string>{text}, scale).front();
}

std::vector<DurationPrediction> Synthesizer::predict_durations(const std::vector<std::string>& texts, double scale) {
  std::lock_guard lock(mutex_);
  return impl_->durations(texts, scale);
}

audio::PitchTrack Synthesizer::predict_pitch(const text::TokenSeq& tokens, const text::DurationSeq& durations) {
  return predict_pitch(std::vector<DurationPrediction>{{tokens, durations}}).front();
}

std::vector<audio::PitchTrack> Synthesizer::predict_pitch(const std::vector<DurationPrediction>& items) {
  std::lock_guard lock(mutex_);
  return impl_->pitches(items);
}

audio::MelSpec Synthesizer::synthesize_mel(const std::string& text, double scale) {
  return synthesize_batch({text}, scale).front();
}

std::vector<audio::MelSpec> Synthesizer::synthesize_batch(const std::vector<std::string>& texts, double scale) {
  if (texts.empty()) return {};
  std::lock_guard lock(mutex_);
  return impl_->mels(texts, scale);
}

models::DurationModel<float>& Synthesizer::duration_model() { return impl_->duration; }
models::PitchModel<float>& Synthesizer::pitch_model() { return impl_->pitch; }
models::MelModel<float>& Synthesizer::mel_model() { return impl_->mel; }

}  // namespace talknet::pipeline
