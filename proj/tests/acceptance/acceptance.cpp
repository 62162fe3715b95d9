// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "talknet/align/viterbi.hpp"
#include "talknet/audio/features.hpp"
#include "talknet/models/gradcheck_suite.hpp"
#include "talknet/models/losses.hpp"
#include "talknet/models/networks.hpp"
#include "talknet/pipeline/bench.hpp"
#include "talknet/pipeline/dataset.hpp"
#include "talknet/pipeline/fixtures.hpp"
#include "talknet/pipeline/inference.hpp"
#include "talknet/pipeline/train.hpp"
#include "talknet/text/tokens.hpp"

using namespace talknet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Letters of the fixture vocabulary, used to build random in-vocabulary text.
std::string fixture_letters(const text::Vocab& vocab) {
  std::string letters;
  for (const auto& s : vocab.symbols()) {
    if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) letters += s;
  }
  return letters;
}

/// Words of 1-7 letters separated by spaces, cut to `len` characters; an
/// optional final punctuation mark when the vocabulary has one.
std::string random_text(const text::Vocab& vocab, std::size_t len, std::mt19937_64& rng) {
  const auto letters = fixture_letters(vocab);
  std::string t;
  while (t.size() < len) {
    if (!t.empty()) t += ' ';
    const std::size_t w = 1 + rng() % 7;
    for (std::size_t i = 0; i < w; ++i) t += letters[rng() % letters.size()];
  }
  t.resize(len);
  if (t.back() == ' ') t.back() = letters[0];
  const std::string marks = ".!?";
  const char m = marks[rng() % marks.size()];
  if (rng() % 2 == 0 && vocab.lookup(std::string(1, m))) t.back() = m;
  return t;
}

struct Paths {
  fs::path root;
  fs::path fixtures() const { return root / "fixtures"; }
  fs::path data() const { return root / "data"; }
  fs::path ckpts() const { return root / "ckpt"; }
};

// ---------------------------------------------------------------------------

Verdict parameter_counts() {
  Verdict v;
  const std::size_t vocab = text::Vocab::default_graphemes().size();
  models::DurationModel<float> dur(models::ModelConfig::duration(), vocab, 0);
  models::PitchModel<float> pitch(models::ModelConfig::pitch(), vocab, 0);
  models::MelModel<float> mel(models::ModelConfig::mel(), vocab, 0);
  const double d = static_cast<double>(models::count_params(dur.params()));
  const double p = static_cast<double>(models::count_params(pitch.params()));
  const double m = static_cast<double>(models::count_params(mel.params()));
  auto within = [](double x, double target) { return std::abs(x - target) <= 0.15 * target; };
  v.require(within(d, 2.3e6), "duration " + fmt(d / 1e6) + "M vs 2.3M +-15%");
  v.require(within(m, 8.5e6), "mel " + fmt(m / 1e6) + "M vs 8.5M +-15%");
  v.require(within(d + p + m, 13.2e6), "total " + fmt((d + p + m) / 1e6) + "M vs 13.2M +-15% (pitch " + fmt(p / 1e6) + "M)");
  return v;
}

Verdict viterbi_oracle() {
  Verdict v;
  std::mt19937_64 rng(1000);
  int feasible = 0, infeasible = 0, path_match = 0, sum_ok = 0, errors_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t vocab = 2 + rng() % 3;
    const std::size_t n = 1 + rng() % 3;
    const std::size_t frames = 1 + rng() % 6;
    text::TokenSeq plain;
    for (std::size_t i = 0; i < n; ++i) plain.ids.push_back(static_cast<text::TokenId>(1 + rng() % (vocab - 1)));
    const auto target = text::insert_blanks(plain);
    const auto lat = align::random_lattice(frames, vocab, rng, 0.5 + 3.0 * static_cast<double>(rng() % 4));
    const auto expected = oracle::brute_force_align(lat, target);
    if (!expected) {
      ++infeasible;
      try {
        align::viterbi_align(lat, target);
      } catch (const Error& e) {
        if (e.code() == Errc::Infeasible) ++errors_ok;
      }
      continue;
    }
    ++feasible;
    const auto r = align::viterbi_align(lat, target);
    if (r.durations == expected->durations && r.path_logprob == expected->score) ++path_match;
    std::int64_t total = 0;
    for (auto d : r.durations) total += d;
    if (total == static_cast<std::int64_t>(frames)) ++sum_ok;
  }
  v.require(path_match == feasible, std::to_string(path_match) + "/" + std::to_string(feasible) +
                                        " feasible lattices match brute force exactly (score and durations)");
  v.require(sum_ok == feasible, std::to_string(sum_ok) + "/" + std::to_string(feasible) + " have sum(durations) = T");
  v.require(errors_ok == infeasible,
            std::to_string(errors_ok) + "/" + std::to_string(infeasible) + " infeasible lattices raise Infeasible");
  return v;
}

Verdict gradients() {
  Verdict v;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double worst_layer = 0.0;
    std::string failed;
    for (const auto& c : models::layer_gradchecks(seed)) {
      worst_layer = std::max(worst_layer, c.report.max_rel_error);
      if (!c.passed()) failed += " " + c.name;
    }
    v.require(failed.empty(), "seed " + std::to_string(seed) + " layers: max rel error " + fmt(worst_layer, 3) +
                                  (failed.empty() ? "" : " failing:" + failed));
    double worst_model = 0.0;
    failed.clear();
    for (const auto& c : models::model_gradchecks(seed)) {
      worst_model = std::max(worst_model, c.report.max_rel_error);
      if (!c.passed() || c.tolerance > 1e-3) failed += " " + c.name;
    }
    v.require(failed.empty(), "seed " + std::to_string(seed) + " models: max rel error " + fmt(worst_model, 3) +
                                  (failed.empty() ? "" : " failing:" + failed));
  }
  return v;
}

Verdict fixture_overfit(const Paths& paths) {
  Verdict v;
  const auto start = Clock::now();
  fs::remove_all(paths.root);
  pipeline::generate_fixtures(paths.fixtures(), 0);
  const auto report = pipeline::prepare_training_set(paths.fixtures() / "manifest.jsonl", paths.fixtures() / "lattices",
                                                     paths.data());
  v.require(report.prepared.size() == 10, std::to_string(report.prepared.size()) + " fixture utterances prepared");
  const auto data = pipeline::PreparedDataset::load(paths.data());

  struct Run {
    models::ModelKind kind;
    std::int64_t steps;
    std::int64_t eval_every;
  };
  for (const Run run : {Run{models::ModelKind::Duration, 300, 50}, Run{models::ModelKind::Pitch, 300, 50},
                        Run{models::ModelKind::Mel, 500, 100}}) {
    auto cfg = pipeline::TrainConfig::defaults(run.kind);
    cfg.steps = run.steps;
    cfg.eval_every = run.eval_every;
    const auto t0 = Clock::now();
    const auto name = std::string(models::kind_name(run.kind));
    const auto r = pipeline::train_model(cfg, data, paths.ckpts() / (name + ".ckpt"));
    const auto& m = r.final_train;
    const std::string took = " (" + fmt(seconds_since(t0), 3) + " s, " + std::to_string(run.steps) + " steps)";
    switch (run.kind) {
      case models::ModelKind::Duration:
        v.require(m.metric >= 0.95, "duration within-1 train accuracy " + fmt(m.metric) + " >= 0.95" + took);
        break;
      case models::ModelKind::Pitch:
        v.require(m.metric >= 0.95, "pitch V/UV train accuracy " + fmt(m.metric) + " >= 0.95" + took);
        break;
      case models::ModelKind::Mel:
        v.require(m.metric < 0.05, "mel train MSE " + fmt(m.metric) + " < 0.05" + took);
        break;
    }
  }
  const double total = seconds_since(start);
  v.require(total < 600.0, "wall time " + fmt(total, 3) + " s < 600 s");
  return v;
}

/// Output column `t` must not move when every input beyond `radius` of `t`
/// is replaced.
template <typename F>
bool column_invariant(const F& run, std::size_t channels_out, std::size_t t, const nn::Frames<float>& a,
                      const nn::Frames<float>& b) {
  const auto ya = run(a);
  const auto yb = run(b);
  for (std::size_t c = 0; c < channels_out; ++c) {
    if (ya.at(c, t) != yb.at(c, t)) return false;
  }
  return true;
}

nn::Frames<float> perturbed_outside(const nn::Frames<float>& x, std::size_t t, std::size_t radius, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 3.0f);
  auto y = x;
  for (std::size_t col = 0; col < x.columns(); ++col) {
    const auto dist = col > t ? col - t : t - col;
    if (dist <= radius) continue;
    for (std::size_t c = 0; c < x.channels; ++c) y.at(c, col) = n(rng);
  }
  return y;
}

nn::Frames<float> random_input(std::size_t channels, std::size_t len, float scale, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, scale);
  nn::Frames<float> x(channels, nn::Layout::of({len}));
  for (auto& v : x.data) v = n(rng);
  return x;
}

Verdict non_autoregressive(const Paths& paths) {
  Verdict v;
  pipeline::Synthesizer synth(paths.ckpts());
  std::mt19937_64 rng(55);

  // Wall time against output frames over a 4x text-length range.
  std::vector<std::string> texts;
  for (std::size_t len = 20; len <= 80; len += 5) texts.push_back(random_text(synth.vocab(), len, rng));
  const auto bench = pipeline::benchmark_rtf(synth, texts, 1, 5);
  std::size_t lo = bench.timings.front().frames, hi = lo;
  for (const auto& t : bench.timings) lo = std::min(lo, t.frames), hi = std::max(hi, t.frames);
  v.require(bench.fit.r2 >= 0.9, "linear fit of wall ms on frames: R^2 " + fmt(bench.fit.r2) + " >= 0.9 over frames " +
                                     std::to_string(lo) + ".." + std::to_string(hi) + ", slope " +
                                     fmt(bench.fit.slope, 3) + " ms/frame");

  // Receptive-field locality on each network, eval mode.
  {
    auto& model = synth.duration_model();
    const std::size_t r = model.receptive_radius();
    const std::size_t len = 2 * r + 41;
    const std::size_t t = len / 2;
    std::vector<text::TokenId> ids(len);
    for (auto& id : ids) id = static_cast<text::TokenId>(rng() % synth.vocab().size());
    auto far = ids;
    for (std::size_t i = 0; i < len; ++i) {
      if ((i > t ? i - t : t - i) > r) far[i] = static_cast<text::TokenId>(rng() % synth.vocab().size());
    }
    const auto ya = model.forward(models::TokenBatch::from({text::TokenSeq{ids, false}}), {});
    const auto yb = model.forward(models::TokenBatch::from({text::TokenSeq{far, false}}), {});
    bool same = true;
    for (std::size_t c = 0; c < ya.channels; ++c) same = same && ya.at(c, t) == yb.at(c, t);
    v.require(same, "duration net: token " + std::to_string(t) + " unchanged when tokens beyond radius " +
                        std::to_string(r) + " change");
  }
  {
    auto& model = synth.pitch_model();
    const std::size_t r = model.receptive_radius();
    const std::size_t len = 2 * r + 41;
    const std::size_t t = len / 2;
    const auto x = random_input(model.embed.dim(), len, 1.0f, rng);
    const auto run = [&](const nn::Frames<float>& in) { return model.forward_frames(in, {}).body; };
    const bool body_ok = column_invariant(run, 1, t, x, perturbed_outside(x, t, r, rng));
    const auto run_nv = [&](const nn::Frames<float>& in) { return model.forward_frames(in, {}).nonvoiced_logit; };
    const bool nv_ok = column_invariant(run_nv, 1, t, x, perturbed_outside(x, t, r, rng));
    v.require(body_ok && nv_ok, "pitch net: frame " + std::to_string(t) + " unchanged beyond radius " + std::to_string(r));
  }
  {
    auto& model = synth.mel_model();
    const std::size_t r = model.receptive_radius();
    const std::size_t len = 2 * r + 41;
    const std::size_t t = len / 2;
    const auto x = random_input(model.embed.dim(), len, 1.0f, rng);
    auto pitch = random_input(1, len, 0.3f, rng);
    const auto far_x = perturbed_outside(x, t, r, rng);
    const auto far_pitch = perturbed_outside(pitch, t, r, rng);
    const auto ya = model.forward_frames(x, pitch, {});
    const auto yb = model.forward_frames(far_x, far_pitch, {});
    bool same = true;
    for (std::size_t c = 0; c < ya.channels; ++c) same = same && ya.at(c, t) == yb.at(c, t);
    v.require(same, "mel net: frame " + std::to_string(t) + " unchanged beyond radius " + std::to_string(r));
  }

  // Throughput at batch 4 against batch 1. Each batch holds copies of one
  // text so padding does not enter the comparison; runs alternate and the
  // best of each is kept.
  std::vector<std::string> workload;
  for (int k = 0; k < 4; ++k) {
    const auto t = random_text(synth.vocab(), 50, rng);
    for (int i = 0; i < 4; ++i) workload.push_back(t);
  }
  double best1 = 0.0, best4 = 0.0;
  for (int round = 0; round < 3; ++round) {
    best1 = std::max(best1, pipeline::benchmark_rtf(synth, workload, 1, 3).rtf);
    best4 = std::max(best4, pipeline::benchmark_rtf(synth, workload, 4, 3).rtf);
  }
  v.require(best4 >= best1, "throughput RTF batch 4 " + fmt(best4) + " >= batch 1 " + fmt(best1));
  return v;
}

Verdict pipeline_invariants(const Paths& paths) {
  Verdict v;
  pipeline::Synthesizer synth(paths.ckpts());
  std::mt19937_64 rng(100);
  int frames_ok = 0, floors_ok = 0, repeat_ok = 0, conserve_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const auto text = random_text(synth.vocab(), 5 + rng() % 56, rng);
    const auto pred = synth.predict_durations(text);
    std::int64_t total = 0;
    bool floors = true;
    for (std::size_t k = 0; k < pred.durations.size(); ++k) {
      total += pred.durations[k];
      if (pred.tokens.ids[k] != text::kBlankId && pred.durations[k] < 1) floors = false;
    }
    const auto plain = text::tokenize(text, synth.vocab());
    const auto expanded = text::expand_by_durations(pred.tokens, pred.durations);
    const bool conserved = text::strip_blanks(pred.tokens).ids == plain.ids &&
                           static_cast<std::int64_t>(expanded.size()) == total;
    const auto a = synth.synthesize_mel(text);
    const auto b = synth.synthesize_mel(text);
    frames_ok += a.frames == total ? 1 : 0;
    floors_ok += floors ? 1 : 0;
    conserve_ok += conserved ? 1 : 0;
    repeat_ok += a.values == b.values && a.frames == b.frames ? 1 : 0;
  }
  v.require(frames_ok == 100, std::to_string(frames_ok) + "/100 texts: mel frames = sum of predicted durations");
  v.require(floors_ok == 100, std::to_string(floors_ok) + "/100 texts: every grapheme gets >= 1 frame");
  v.require(conserve_ok == 100, std::to_string(conserve_ok) + "/100 texts: graphemes conserved through expansion");
  v.require(repeat_ok == 100, std::to_string(repeat_ok) + "/100 texts: repeated synthesis bitwise identical");
  return v;
}

Verdict front_end() {
  Verdict v;
  const audio::FeatureConfig cfg;
  const int rate = cfg.sample_rate;

  audio::Waveform sine{std::vector<float>(static_cast<std::size_t>(rate)), rate};
  for (std::size_t i = 0; i < sine.samples.size(); ++i) {
    sine.samples[i] = static_cast<float>(0.3 * std::sin(2.0 * std::numbers::pi * 220.0 * static_cast<double>(i) / rate));
  }
  const auto f0 = audio::extract_f0(sine, cfg);
  double worst = 0.0;
  for (std::size_t t = 2; t + 2 < f0.size(); ++t) worst = std::max(worst, std::abs(f0[t] - 220.0));
  v.require(worst <= 5.0, "220 Hz sine: worst interior deviation " + fmt(worst, 3) + " Hz <= 5 Hz");

  const audio::Waveform silent{std::vector<float>(static_cast<std::size_t>(rate), 0.0f), rate};
  const auto sf0 = audio::extract_f0(silent, cfg);
  bool unvoiced = !sf0.empty();
  for (float x : sf0) unvoiced = unvoiced && x == 0.0f;
  v.require(unvoiced, "silence: all " + std::to_string(sf0.size()) + " frames unvoiced");

  const auto vocab = text::Vocab::from_corpus(pipeline::fixture_texts());
  std::mt19937_64 rng(50);
  int counts_ok = 0;
  for (int i = 0; i < 50; ++i) {
    const auto text = random_text(vocab, 1 + rng() % 30, rng);
    const auto tokens = text::insert_blanks(text::tokenize(text, vocab));
    auto durs = pipeline::scripted_durations(tokens, vocab);
    for (auto& d : durs) d += static_cast<std::int32_t>(rng() % 3);
    const auto wave = pipeline::render_fixture(tokens, durs, vocab, rng(), cfg);
    const auto mel = audio::compute_log_mel(wave, cfg);
    const auto track = audio::extract_f0(wave, cfg);
    if (mel.frames == static_cast<int>(track.size()) && mel.frames == cfg.frame_count(wave.samples.size())) ++counts_ok;
  }
  v.require(counts_ok == 50, std::to_string(counts_ok) + "/50 random-length fixtures: mel frames = F0 frames");

  const std::vector<std::uint8_t> two = {1, 1};
  const double dl = models::duration_loss(std::vector<double>{0, 0}, std::vector<std::int32_t>{1, 0}, two);
  v.require(std::abs(dl - std::pow(std::log(2.0), 2) / 2) < 1e-6 && std::abs(dl - 0.2402) < 1e-4,
            "duration loss " + fmt(dl, 10) + " = ln(2)^2/2");
  const auto logit = [](double p) { return std::log(p / (1 - p)); };
  const auto pl = models::pitch_loss(std::vector<double>{logit(0.9), logit(0.1)}, std::vector<double>{0.0, 0.5},
                                     std::vector<float>{0.0f, 200.0f}, audio::PitchStats{150.0, 50.0}, two);
  v.require(std::abs(pl.total() - (-std::log(0.9) + 0.25)) < 1e-6 && std::abs(pl.total() - 0.3554) < 1e-4,
            "pitch loss " + fmt(pl.total(), 10) + " = -ln(0.9) + 0.5^2");
  const std::vector<double> truth = {1, 2, 3, 4, 5, 6};
  std::vector<double> pred = truth;
  for (auto& x : pred) x += 0.3;
  const double ml = models::mel_loss(pred, truth, 2, std::vector<std::uint8_t>{1, 1, 1});
  v.require(std::abs(ml - 0.09) < 1e-6, "mel loss " + fmt(ml, 10) + " = 0.3^2");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"talknet acceptance criteria"};
  std::string workdir = (fs::temp_directory_path() / "talknet_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for fixtures and checkpoints");
  app.add_option("--only", only, "run only these criteria (4 is needed before 5 and 6)");
  CLI11_PARSE(app, argc, argv);
  const Paths paths{workdir};

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"parameter counts at full scale", parameter_counts},
      {"viterbi equals brute force on 1000 lattices", viterbi_oracle},
      {"finite-difference gradients, 3 seeds", gradients},
      {"fixture overfit", [&] { return fixture_overfit(paths); }},
      {"non-autoregressive structure", [&] { return non_autoregressive(paths); }},
      {"pipeline invariants on 100 random texts", [&] { return pipeline_invariants(paths); }},
      {"feature front end and loss closed forms", front_end},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const Error& e) {
      v.require(false, "error: " + e.to_json().dump());
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    for (const auto& note : v.notes) std::cout << "      " << note << '\n';
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].first << " ("
              << fmt(seconds_since(start), 3) << " s)" << std::endl;
    if (!v.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
