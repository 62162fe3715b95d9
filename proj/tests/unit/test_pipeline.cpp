#include <cmath>
#include <fstream>
#include <map>

#include "support.hpp"
#include "talknet/align/viterbi.hpp"
#include "talknet/io/container.hpp"
#include "talknet/io/ten1.hpp"
#include "talknet/pipeline/bench.hpp"
#include "talknet/pipeline/checkpoint.hpp"
#include "talknet/pipeline/dataset.hpp"
#include "talknet/pipeline/fixtures.hpp"
#include "talknet/pipeline/inference.hpp"
#include "talknet/pipeline/manifest.hpp"
#include "talknet/pipeline/train.hpp"
#include "talknet/text/tokens.hpp"

using namespace talknet;
using namespace talknet::pipeline;
using models::ModelKind;
using testing::expect_error;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path fixtures;
  fs::path data;
};

/// Fixture corpus plus its prepared dataset, built once per process.
const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    const auto root = testing::scratch_dir("pipeline");
    out.fixtures = root / "fixtures";
    out.data = root / "data";
    generate_fixtures(out.fixtures, 0);
    prepare_training_set(out.fixtures / "manifest.jsonl", out.fixtures / "lattices", out.data);
    return out;
  }();
  return c;
}

TrainConfig quick_config(ModelKind kind, std::int64_t steps) {
  auto cfg = TrainConfig::defaults(kind);
  cfg.steps = steps;
  cfg.eval_every = steps;
  cfg.channel_scale = 0.25;
  return cfg;
}

/// Directory with briefly trained duration, pitch and mel checkpoints.
const fs::path& checkpoints() {
  static const fs::path dir = [] {
    const auto data = PreparedDataset::load(corpus().data);
    const auto out = testing::scratch_dir("ckpts");
    train_model(quick_config(ModelKind::Duration, 40), data, out / "duration.ckpt");
    train_model(quick_config(ModelKind::Pitch, 10), data, out / "pitch.ckpt");
    train_model(quick_config(ModelKind::Mel, 10), data, out / "mel.ckpt");
    return out;
  }();
  return dir;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = io::read_file(e.path());
  }
  return files;
}

void copy_tree(const fs::path& from, const fs::path& to) {
  fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

}  // namespace

TEST_CASE("manifest roundtrip resolves audio paths against its directory") {
  const auto dir = testing::scratch_dir("manifest");
  const std::vector<ManifestEntry> entries = {{"a", dir / "wavs" / "a.wav", "hello.", "train"},
                                              {"b", dir / "wavs" / "b.wav", "bye", "val"}};
  save_manifest(dir / "m.jsonl", entries);
  const auto back = load_manifest(dir / "m.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[1].split == "val");
  CHECK(back[1].text == "bye");
  CHECK(fs::weakly_canonical(back[0].audio_path) == fs::weakly_canonical(dir / "wavs" / "a.wav"));

  io::write_file(dir / "rel.jsonl", R"({"id":"x","audio_path":"w/x.wav","text":"hi"})" "\n");
  const auto rel = load_manifest(dir / "rel.jsonl");
  CHECK(rel[0].split == "train");
  CHECK(rel[0].audio_path == dir / "w" / "x.wav");
}

TEST_CASE("manifest errors carry the line number") {
  const auto dir = testing::scratch_dir("manifest_err");
  io::write_file(dir / "bad.jsonl", R"({"id":"a","audio_path":"a.wav","text":"x"})" "\n{not json\n");
  auto e = expect_error([&] { load_manifest(dir / "bad.jsonl"); }, Errc::ParseError);
  CHECK(e.details().value("line", 0) == 2);

  io::write_file(dir / "dup.jsonl", R"({"id":"a","audio_path":"a.wav","text":"x"})" "\n"
                                    R"({"id":"a","audio_path":"b.wav","text":"y"})" "\n");
  e = expect_error([&] { load_manifest(dir / "dup.jsonl"); }, Errc::ParseError);
  CHECK(e.details().value("line", 0) == 2);

  io::write_file(dir / "missing.jsonl", R"({"id":"a","text":"x"})" "\n");
  expect_error([&] { load_manifest(dir / "missing.jsonl"); }, Errc::ParseError);
}

TEST_CASE("prepared fixture corpus is aligned and conserves frames") {
  const auto data = PreparedDataset::load(corpus().data);
  REQUIRE(data.utterances().size() == 10);
  const auto fixtures = generate_fixtures(testing::scratch_dir("fx_again"), 0);
  for (std::size_t i = 0; i < data.utterances().size(); ++i) {
    const auto& u = data.utterances()[i];
    std::int64_t total = 0;
    for (auto d : u.durations) total += d;
    CHECK(total == u.mel.frames);
    CHECK(u.f0.size() == static_cast<std::size_t>(u.mel.frames));
    CHECK(u.mel.bins == 80);
    // Synthetic lattices peak on the scripted path, so alignment recovers it.
    CHECK(u.durations == fixtures[i].durations);
    CHECK(u.tokens.ids == fixtures[i].tokens.ids);
    text::validate_durations(u.tokens, u.durations);
  }
  CHECK(data.stats().sigma_f0 > 0.0);
  CHECK(data.stats().mu_f0 > 65.0);
  CHECK(data.stats().mu_f0 < 400.0);
}

TEST_CASE("prepare is byte-identical across reruns and worker counts") {
  const auto out = testing::scratch_dir("prepare_rerun");
  PrepareOptions opts;
  opts.workers = 3;
  const auto report = prepare_training_set(corpus().fixtures / "manifest.jsonl", corpus().fixtures / "lattices", out, opts);
  CHECK(report.prepared.size() == 10);
  CHECK(report.skipped.empty());
  CHECK(snapshot(out) == snapshot(corpus().data));
}

TEST_CASE("prepare rejects lattices of the wrong length or missing lattices") {
  const auto root = testing::scratch_dir("prepare_bad");
  copy_tree(corpus().fixtures, root);
  const auto lat_path = root / "lattices" / "fx03.ten";
  auto t = io::load_ten1(lat_path);
  const auto frames = t.dims[0];
  t.dims[0] -= 1;
  t.values.resize(static_cast<std::size_t>(t.dims[0]) * t.dims[1]);
  io::save_ten1(lat_path, t);
  auto e = expect_error([&] { prepare_training_set(root / "manifest.jsonl", root / "lattices", root / "out"); },
                        Errc::FrameCountMismatch);
  CHECK(e.details().value("id", std::string()) == "fx03");
  CHECK(e.details().value("lattice_frames", 0) == static_cast<int>(frames) - 1);
  CHECK(e.details().value("mel_frames", 0) == static_cast<int>(frames));

  fs::remove(lat_path);
  e = expect_error([&] { prepare_training_set(root / "manifest.jsonl", root / "lattices", root / "out"); },
                   Errc::MissingLattice);
  CHECK(e.details().dump().find("fx03") != std::string::npos);
}

TEST_CASE("infeasible lattices are skipped, not fatal") {
  const auto root = testing::scratch_dir("prepare_skip");
  copy_tree(corpus().fixtures, root);
  // A run of repeated letters needs a blank between each pair, so this text
  // cannot fit into the utterance's frames.
  auto entries = load_manifest(root / "manifest.jsonl");
  const auto frames = io::load_ten1(root / "lattices" / (entries[0].id + ".ten")).dims[0];
  entries[0].text = std::string(frames, 'a');
  save_manifest(root / "manifest.jsonl", entries);
  const auto report = prepare_training_set(root / "manifest.jsonl", root / "lattices", root / "out");
  CHECK(report.prepared.size() == 9);
  REQUIRE(report.skipped.size() == 1);
  CHECK(report.skipped[0].first == entries[0].id);
  CHECK(PreparedDataset::load(root / "out").utterances().size() == 9);
}

TEST_CASE("train config defaults, JSON roundtrip and validation") {
  const auto dur = TrainConfig::defaults(ModelKind::Duration);
  const auto mel = TrainConfig::defaults(ModelKind::Mel);
  CHECK(dur.batch_size == 256);
  CHECK(TrainConfig::defaults(ModelKind::Pitch).batch_size == 256);
  CHECK(mel.batch_size == 64);
  CHECK(dur.lr_max == 1e-3);
  CHECK(dur.lr_min == 1e-5);
  CHECK(dur.warmup_frac == 0.02);
  CHECK(dur.epochs == 200);

  auto cfg = TrainConfig::from_json({{"steps", 7}, {"seed", 3}, {"channel_scale", 0.125}}, ModelKind::Pitch);
  CHECK(cfg.batch_size == 256);
  CHECK(cfg.steps == 7);
  const auto back = TrainConfig::from_json(cfg.to_json(), ModelKind::Pitch);
  CHECK(back.to_json() == cfg.to_json());

  expect_error([] { TrainConfig::from_json({{"learning_rate", 1.0}}, ModelKind::Mel); }, Errc::ConfigInvalid);
  expect_error([] { TrainConfig::from_json({{"batch_size", 0}}, ModelKind::Mel); }, Errc::ConfigInvalid);
  expect_error([] { TrainConfig::from_json({{"classifier", true}}, ModelKind::Mel); }, Errc::ConfigInvalid);
}

TEST_CASE("training is reproducible and ends at the minimum learning rate") {
  const auto data = PreparedDataset::load(corpus().data);
  const auto dir = testing::scratch_dir("train_repro");
  auto cfg = quick_config(ModelKind::Duration, 12);
  const auto a = train_model(cfg, data, dir / "a.ckpt");
  const auto b = train_model(cfg, data, dir / "b.ckpt");
  REQUIRE(a.steps.size() == 12);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a.steps[i].loss == b.steps[i].loss);
  CHECK(io::read_file(dir / "a.ckpt.metrics.jsonl") == io::read_file(dir / "b.ckpt.metrics.jsonl"));
  CHECK(a.steps.back().lr == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(a.steps.front().lr > 0.0);
  CHECK(fs::exists(dir / "a.ckpt"));

  cfg.seed = 1;
  const auto c = train_model(cfg, data, dir / "c.ckpt");
  CHECK(c.steps[0].loss != a.steps[0].loss);
}

TEST_CASE("training loss falls under a 20-step moving average") {
  const auto data = PreparedDataset::load(corpus().data);
  const auto r = train_model(quick_config(ModelKind::Duration, 120), data, testing::scratch_dir("train_ma") / "d.ckpt");
  std::vector<double> ma;
  for (std::size_t i = 0; i + 20 <= r.steps.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = i; k < i + 20; ++k) s += r.steps[k].loss;
    ma.push_back(s / 20.0);
  }
  for (std::size_t i = 1; i < ma.size(); ++i) CHECK(ma[i] <= ma[i - 1] * 1.10);
  CHECK(ma.back() < 0.25 * ma.front());
}

TEST_CASE("training on an empty split fails") {
  const auto data = PreparedDataset::load(corpus().data);
  std::vector<Utterance> val;
  for (auto u : data.utterances()) {
    u.split = "val";
    val.push_back(std::move(u));
  }
  const PreparedDataset only_val(data.vocab(), data.stats(), std::move(val));
  expect_error([&] { train_model(quick_config(ModelKind::Duration, 2), only_val, testing::scratch_dir("e") / "x.ckpt"); },
               Errc::EmptyDataset);
}

TEST_CASE("checkpoint roundtrip restores bitwise-identical outputs") {
  const auto dir = checkpoints();
  const auto data = PreparedDataset::load(corpus().data);
  const auto& u = data.utterances()[2];
  const auto tokens = models::TokenBatch::from({u.tokens});

  const auto dc = io::load_container(dir / "duration.ckpt");
  const auto meta = checkpoint_meta(dc);
  CHECK(meta.vocab == data.vocab());
  CHECK(meta.stats.mu_f0 == data.stats().mu_f0);
  models::DurationModel<float> d1(meta.config, meta.vocab.size(), 11);
  models::DurationModel<float> d2(meta.config, meta.vocab.size(), 22);
  auto p1 = d1.params();
  auto p2 = d2.params();
  restore_params(dc, p1);
  restore_params(dc, p2);
  CHECK(d1.forward(tokens, {}).data == d2.forward(tokens, {}).data);

  // Save the restored model again; the bytes of every tensor must survive.
  nn::AdamState<float> adam;
  restore_params(dc, p1, &adam);
  CHECK(adam.step > 0);
  save_checkpoint(dir / "again.ckpt", meta, p1, &adam);
  const auto again = io::load_container(dir / "again.ckpt");
  for (const auto& [name, t] : dc.tensors) {
    REQUIRE(again.tensors.count(name) == 1);
    CHECK(again.tensors.at(name).values == t.values);
  }

  const auto pc = io::load_container(dir / "pitch.ckpt");
  const auto pm = checkpoint_meta(pc);
  models::PitchModel<float> q1(pm.config, pm.vocab.size(), 1);
  models::PitchModel<float> q2(pm.config, pm.vocab.size(), 2);
  auto qp1 = q1.params();
  auto qp2 = q2.params();
  restore_params(pc, qp1);
  restore_params(pc, qp2);
  const auto o1 = q1.forward(tokens, {u.durations}, {});
  const auto o2 = q2.forward(tokens, {u.durations}, {});
  CHECK(o1.nonvoiced_logit.data == o2.nonvoiced_logit.data);
  CHECK(o1.body.data == o2.body.data);

  const auto mc = io::load_container(dir / "mel.ckpt");
  const auto mm = checkpoint_meta(mc);
  models::MelModel<float> m1(mm.config, mm.vocab.size(), 1);
  models::MelModel<float> m2(mm.config, mm.vocab.size(), 2);
  auto mp1 = m1.params();
  auto mp2 = m2.params();
  restore_params(mc, mp1);
  restore_params(mc, mp2);
  CHECK(m1.forward(tokens, {u.durations}, m1.pitch_input({u.f0}), {}).data ==
        m2.forward(tokens, {u.durations}, m2.pitch_input({u.f0}), {}).data);
}

TEST_CASE("damaged or incompatible checkpoints are rejected") {
  const auto dir = testing::scratch_dir("ckpt_bad");
  copy_tree(checkpoints(), dir);

  const auto bytes = io::read_file(dir / "mel.ckpt");
  io::write_file(dir / "truncated.ckpt", bytes.substr(0, bytes.size() - 100));
  expect_error(
      [&] {
        const auto c = io::load_container(dir / "truncated.ckpt");
        auto meta = checkpoint_meta(c);
        models::MelModel<float> m(meta.config, meta.vocab.size(), 0);
        auto p = m.params();
        restore_params(c, p);
      },
      Errc::CorruptCheckpoint);

  // A structurally valid checkpoint trained against another vocabulary.
  const auto c = io::load_container(dir / "pitch.ckpt");
  auto meta = checkpoint_meta(c);
  meta.vocab = text::Vocab::default_graphemes();
  models::PitchModel<float> other(meta.config, meta.vocab.size(), 0);
  auto params = other.params();
  save_checkpoint(dir / "pitch.ckpt", meta, params);
  expect_error([&] { Synthesizer s(dir); }, Errc::VocabMismatch);

  fs::remove(dir / "pitch.ckpt");
  auto e = expect_error([&] { Synthesizer s(dir); }, Errc::CheckpointMissing);
  CHECK(e.details().dump().find("pitch") != std::string::npos);
}

TEST_CASE("duration prediction is deterministic and respects grapheme floors") {
  Synthesizer synth(checkpoints());
  const auto a = synth.predict_durations("the cat sat.");
  const auto b = synth.predict_durations("the cat sat.");
  CHECK(a.durations == b.durations);
  CHECK(a.tokens.ids == b.tokens.ids);
  CHECK(text::is_blank_interleaved(a.tokens));
  REQUIRE(a.tokens.size() == a.durations.size());
  for (std::size_t i = 0; i < a.durations.size(); ++i) {
    CHECK(a.durations[i] >= 0);
    if (a.tokens.ids[i] != text::kBlankId) CHECK(a.durations[i] >= 1);
  }
  const auto batch = synth.predict_durations(std::vector<std::string>{"the cat sat.", "look at that"});
  CHECK(batch[0].durations == a.durations);

  expect_error([&] { synth.predict_durations(""); }, Errc::EmptyInput);
  expect_error([&] { synth.predict_durations("zebra?"); }, Errc::UnknownSymbol);
}

TEST_CASE("pitch prediction follows the threshold and clamp rules") {
  Synthesizer synth(checkpoints());
  const auto pred = synth.predict_durations("big red dog");
  std::int64_t frames = 0;
  for (auto d : pred.durations) frames += d;

  const auto track = synth.predict_pitch(pred.tokens, pred.durations);
  REQUIRE(track.size() == static_cast<std::size_t>(frames));
  for (float f : track) CHECK((f == 0.0f || (f >= 65.0f && f <= 400.0f)));

  auto& model = synth.pitch_model();
  auto nv = model.head_nonvoiced.bias.value();
  auto body = model.head_body.bias.value();
  const float nv0 = nv[0];
  const float body0 = body[0];

  nv[0] = 1e4f;
  for (float f : synth.predict_pitch(pred.tokens, pred.durations)) CHECK(f == 0.0f);
  nv[0] = -1e4f;
  body[0] = 1e4f;
  for (float f : synth.predict_pitch(pred.tokens, pred.durations)) CHECK(f == 400.0f);
  body[0] = -1e4f;
  for (float f : synth.predict_pitch(pred.tokens, pred.durations)) CHECK(f == 65.0f);
  nv[0] = nv0;
  body[0] = body0;
  CHECK(synth.predict_pitch(pred.tokens, pred.durations) == track);
}

TEST_CASE("mel synthesis conserves frames and scales with duration control") {
  Synthesizer synth(checkpoints());
  const std::string text = "all is well";
  const auto pred = synth.predict_durations(text);
  std::int64_t frames = 0;
  for (auto d : pred.durations) frames += d;

  const auto mel = synth.synthesize_mel(text);
  CHECK(mel.frames == frames);
  CHECK(mel.bins == 80);
  for (float v : mel.values) CHECK(std::isfinite(v));
  CHECK(synth.synthesize_mel(text).values == mel.values);

  const auto doubled = synth.synthesize_mel(text, 2.0);
  CHECK(doubled.frames == 2 * frames);
  const auto scaled = synth.predict_durations(text, 2.0);
  for (std::size_t i = 0; i < scaled.durations.size(); ++i) CHECK(scaled.durations[i] == 2 * pred.durations[i]);

  const auto batch = synth.synthesize_batch({text, "fun in the sun", "see me soon"});
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].frames == mel.frames);
  double worst = 0.0;
  for (std::size_t i = 0; i < mel.values.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(batch[0].values[i]) - mel.values[i]));
  }
  // Float32 GEMM blocking depends on the padded batch width.
  CHECK(worst < 1e-3);
}

TEST_CASE("least-squares line fit") {
  const auto exact = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(exact.slope == doctest::Approx(2.0));
  CHECK(exact.intercept == doctest::Approx(1.0));
  CHECK(exact.r2 == doctest::Approx(1.0));

  // By hand: Sxy = 4, Sxx = 5, SSres = 0.8, SStot = 4.
  const auto noisy = fit_line({0, 1, 2, 3}, {0.5, 0.5, 2.5, 2.5});
  CHECK(noisy.slope == doctest::Approx(0.8));
  CHECK(noisy.intercept == doctest::Approx(0.3));
  CHECK(noisy.r2 == doctest::Approx(0.8));
}

TEST_CASE("benchmark report is well formed") {
  Synthesizer synth(checkpoints());
  const std::vector<std::string> texts = {"the cat sat.", "hello there! who are you?"};
  const auto r = benchmark_rtf(synth, texts, 1, 1);
  CHECK(r.batch == 1);
  CHECK(r.timings.size() == 2);
  CHECK(r.frames == r.timings[0].frames + r.timings[1].frames);
  CHECK(r.rtf > 0.0);
  CHECK(std::isfinite(r.rtf));
  CHECK(r.rtf == doctest::Approx(static_cast<double>(r.frames) * 0.0125 / (r.wall_ms / 1000.0)));
  const auto j = r.to_json();
  CHECK(j.contains("rtf"));
  CHECK(j.contains("timings"));
}
