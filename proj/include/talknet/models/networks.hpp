#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "talknet/models/config.hpp"
#include "talknet/nn/embedding.hpp"
#include "talknet/nn/layers.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::models {

/// Right-padded token ids for a batch of sequences.
struct TokenBatch {
  nn::Layout layout;
  std::vector<text::TokenId> ids;

  static TokenBatch from(const std::vector<text::TokenSeq>& seqs);
};

/// Scalar per-frame series (e.g. F0) laid out over `layout` as a 1-channel
/// activation; padded columns are zero.
template <typename T>
nn::Frames<T> series_frames(const std::vector<std::vector<float>>& series, double scale = 1.0) {
  std::vector<std::size_t> lengths;
  for (const auto& s : series) lengths.push_back(s.size());
  nn::Frames<T> f(1, nn::Layout::of(lengths));
  for (std::size_t b = 0; b < series.size(); ++b) {
    for (std::size_t t = 0; t < series[b].size(); ++t) {
      f.at(0, b * f.layout.max_len + t) = static_cast<T>(series[b][t] * scale);
    }
  }
  return f;
}

template <typename T>
std::size_t count_params(const nn::ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) {
    if (p.trainable) n += p.tensor->size();
  }
  return n;
}

/// Grapheme duration predictor: embedding -> separable conv trunk -> 1x1 head
/// producing one log-duration (or 32 class logits) per blank-interleaved token.
template <typename T>
class DurationModel {
 public:
  DurationModel(const ModelConfig& cfg, std::size_t vocab, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    if (cfg.kind != ModelKind::Duration) throw Error(Errc::ConfigInvalid, "duration model needs a duration config");
    embed = nn::Embedding<T>(vocab, cfg.scaled_embed_dim());
    trunk = nn::ConvStack<T>(cfg.scaled_embed_dim(), cfg.blocks());
    head = nn::Pointwise<T>(trunk.out_channels(), cfg.head_channels, true);
    std::mt19937_64 rng(seed);
    embed.init(rng);
    trunk.init(rng);
    head.init(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  nn::Frames<T> forward(const TokenBatch& tokens, const nn::ForwardContext& ctx) {
    return head.forward(trunk.forward(embed.forward(tokens.ids, tokens.layout, ctx), ctx), ctx);
  }

  void backward(const nn::Frames<T>& grad) { embed.backward(trunk.backward(head.backward(grad))); }

  nn::ParamList<T> params() {
    nn::ParamList<T> out;
    embed.collect("embed", out);
    trunk.collect("trunk", out);
    head.collect("head", out);
    return out;
  }

  std::uint64_t kink_hash() const { return trunk.kink_hash(); }
  std::size_t receptive_radius() const { return trunk.radius(); }

  nn::Embedding<T> embed;
  nn::ConvStack<T> trunk;
  nn::Pointwise<T> head;

 private:
  ModelConfig cfg_;
};

template <typename T>
struct PitchOutput {
  nn::Frames<T> nonvoiced_logit;
  nn::Frames<T> body;  // normalized F0
};

/// Pitch predictor: Gaussian-upsampled token embeddings -> trunk -> two
/// scalar heads per frame.
template <typename T>
class PitchModel {
 public:
  PitchModel(const ModelConfig& cfg, std::size_t vocab, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    if (cfg.kind != ModelKind::Pitch) throw Error(Errc::ConfigInvalid, "pitch model needs a pitch config");
    embed = nn::Embedding<T>(vocab, cfg.scaled_embed_dim());
    trunk = nn::ConvStack<T>(cfg.scaled_embed_dim(), cfg.blocks());
    head_nonvoiced = nn::Pointwise<T>(trunk.out_channels(), 1, true);
    head_body = nn::Pointwise<T>(trunk.out_channels(), 1, true);
    std::mt19937_64 rng(seed);
    embed.init(rng);
    trunk.init(rng);
    head_nonvoiced.init(rng);
    head_body.init(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  PitchOutput<T> forward(const TokenBatch& tokens, const std::vector<text::DurationSeq>& durations,
                         const nn::ForwardContext& ctx) {
    return forward_frames(upsample.forward(embed.forward(tokens.ids, tokens.layout, ctx), durations, ctx), ctx);
  }

  /// Runs from frame-level inputs (already upsampled embeddings).
  PitchOutput<T> forward_frames(const nn::Frames<T>& frames, const nn::ForwardContext& ctx) {
    auto h = trunk.forward(frames, ctx);
    return {head_nonvoiced.forward(h, ctx), head_body.forward(h, ctx)};
  }

  /// Returns the gradient w.r.t. the frame-level inputs.
  nn::Frames<T> backward_frames(const nn::Frames<T>& grad_nonvoiced, const nn::Frames<T>& grad_body) {
    auto gh = head_nonvoiced.backward(grad_nonvoiced);
    const auto gb = head_body.backward(grad_body);
    for (std::size_t i = 0; i < gh.data.size(); ++i) gh.data[i] += gb.data[i];
    return trunk.backward(gh);
  }

  void backward(const nn::Frames<T>& grad_nonvoiced, const nn::Frames<T>& grad_body) {
    embed.backward(upsample.backward(backward_frames(grad_nonvoiced, grad_body)));
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> out;
    embed.collect("embed", out);
    trunk.collect("trunk", out);
    head_nonvoiced.collect("head_nonvoiced", out);
    head_body.collect("head_body", out);
    return out;
  }

  /// Trainable parameters of the embedding and trunk only.
  std::size_t trunk_param_count() {
    nn::ParamList<T> out;
    embed.collect("embed", out);
    trunk.collect("trunk", out);
    return count_params(out);
  }

  std::uint64_t kink_hash() const { return trunk.kink_hash(); }
  std::size_t receptive_radius() const { return trunk.radius(); }

  nn::Embedding<T> embed;
  nn::GaussianUpsampler<T> upsample;
  nn::ConvStack<T> trunk;
  nn::Pointwise<T> head_nonvoiced;
  nn::Pointwise<T> head_body;

 private:
  ModelConfig cfg_;
};

/// Mel generator: Gaussian-upsampled embeddings plus a linear projection of
/// the per-frame pitch, then the trunk and an 80-channel 1x1 head.
template <typename T>
class MelModel {
 public:
  MelModel(const ModelConfig& cfg, std::size_t vocab, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    if (cfg.kind != ModelKind::Mel) throw Error(Errc::ConfigInvalid, "mel model needs a mel config");
    embed = nn::Embedding<T>(vocab, cfg.scaled_embed_dim());
    pitch_proj = nn::Pointwise<T>(1, cfg.scaled_embed_dim(), true);
    trunk = nn::ConvStack<T>(cfg.scaled_embed_dim(), cfg.blocks());
    head = nn::Pointwise<T>(trunk.out_channels(), cfg.head_channels, true);
    std::mt19937_64 rng(seed);
    embed.init(rng);
    pitch_proj.init(rng);
    trunk.init(rng);
    head.init(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  /// Pitch conditioning input for F0 tracks in Hz.
  nn::Frames<T> pitch_input(const std::vector<std::vector<float>>& f0_hz) const {
    return series_frames<T>(f0_hz, 1.0 / cfg_.pitch_scale_hz);
  }

  nn::Frames<T> forward(const TokenBatch& tokens, const std::vector<text::DurationSeq>& durations,
                        const nn::Frames<T>& pitch, const nn::ForwardContext& ctx) {
    return forward_frames(upsample.forward(embed.forward(tokens.ids, tokens.layout, ctx), durations, ctx), pitch, ctx);
  }

  nn::Frames<T> forward_frames(const nn::Frames<T>& frames, const nn::Frames<T>& pitch, const nn::ForwardContext& ctx) {
    if (pitch.layout != frames.layout) {
      throw Error(Errc::LengthMismatch, "pitch track does not match frame layout");
    }
    auto x = pitch_proj.forward(pitch, ctx);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += frames.data[i];
    return head.forward(trunk.forward(x, ctx), ctx);
  }

  struct FrameGrads {
    nn::Frames<T> frames;
    nn::Frames<T> pitch;
  };

  FrameGrads backward_frames(const nn::Frames<T>& grad) {
    auto gx = trunk.backward(head.backward(grad));
    auto gp = pitch_proj.backward(gx);
    return {std::move(gx), std::move(gp)};
  }

  void backward(const nn::Frames<T>& grad) { embed.backward(upsample.backward(backward_frames(grad).frames)); }

  nn::ParamList<T> params() {
    nn::ParamList<T> out;
    embed.collect("embed", out);
    pitch_proj.collect("pitch_proj", out);
    trunk.collect("trunk", out);
    head.collect("head", out);
    return out;
  }

  std::uint64_t kink_hash() const { return trunk.kink_hash(); }
  std::size_t receptive_radius() const { return trunk.radius(); }

  nn::Embedding<T> embed;
  nn::GaussianUpsampler<T> upsample;
  nn::Pointwise<T> pitch_proj;
  nn::ConvStack<T> trunk;
  nn::Pointwise<T> head;

 private:
  ModelConfig cfg_;
};

}  // namespace talknet::models
