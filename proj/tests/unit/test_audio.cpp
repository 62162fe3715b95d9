#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "talknet/audio/features.hpp"
#include "talknet/audio/wav.hpp"

using namespace talknet;
using namespace talknet::audio;
using testing::expect_error;

namespace {

constexpr int kRate = 22050;

Waveform tone(std::initializer_list<double> freqs, double seconds, double amp = 0.3) {
  Waveform w{std::vector<float>(static_cast<std::size_t>(seconds * kRate)), kRate};
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    double s = 0.0;
    for (double f : freqs) s += std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kRate);
    w.samples[i] = static_cast<float>(amp * s);
  }
  return w;
}

/// Whole-signal autocorrelation period search, independent of the framed
/// extractor: best integer lag in [kRate/400, kRate/65] refined parabolically.
double whole_signal_f0(const Waveform& w) {
  const auto& x = w.samples;
  const int lo = kRate / 400;
  const int hi = kRate / 65;
  std::vector<double> r(static_cast<std::size_t>(hi + 2), 0.0);
  for (int lag = lo - 1; lag <= hi + 1; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(lag) < x.size(); ++i) s += x[i] * x[i + static_cast<std::size_t>(lag)];
    r[static_cast<std::size_t>(lag)] = s / static_cast<double>(x.size() - static_cast<std::size_t>(lag));
  }
  int best = lo;
  for (int lag = lo; lag <= hi; ++lag) {
    if (r[static_cast<std::size_t>(lag)] > r[static_cast<std::size_t>(best)]) best = lag;
  }
  const double a = r[static_cast<std::size_t>(best - 1)], b = r[static_cast<std::size_t>(best)], c = r[static_cast<std::size_t>(best + 1)];
  const double shift = 0.5 * (a - c) / (a - 2 * b + c);
  return kRate / (best + shift);
}

}  // namespace

TEST_CASE("frame geometry at 22.05 kHz") {
  FeatureConfig cfg;
  CHECK(cfg.window_length() == 1102);
  CHECK(cfg.hop_length() == 276);
  CHECK(cfg.fft_size() == 2048);
  CHECK(cfg.frame_count(22050) == 80);
}

TEST_CASE("silence hits the log floor everywhere") {
  FeatureConfig cfg;
  const Waveform silent{std::vector<float>(kRate, 0.0f), kRate};
  const auto mel = compute_log_mel(silent, cfg);
  CHECK(mel.frames == 80);
  CHECK(mel.bins == 80);
  for (float v : mel.values) CHECK(v == doctest::Approx(std::log(1e-5)).epsilon(1e-6));
  const auto f0 = extract_f0(silent, cfg);
  CHECK(f0.size() == 80);
  for (float v : f0) CHECK(v == 0.0f);
}

TEST_CASE("mel filterbank centers match an independent HTK computation") {
  FeatureConfig cfg;
  const auto centers = mel_center_frequencies(cfg);
  REQUIRE(centers.size() == 80);
  const double top = 2595.0 * std::log10(1.0 + (kRate / 2.0) / 700.0);
  for (int k = 0; k < 80; ++k) {
    const double m = top * (k + 1) / 81.0;
    const double hz = 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
    CHECK(centers[static_cast<std::size_t>(k)] == doctest::Approx(hz).epsilon(1e-9));
  }
  const auto fb = mel_filterbank(cfg);
  CHECK(fb.size() == 80u * (2048 / 2 + 1));
}

TEST_CASE("1 kHz tone peaks in the bin whose center is nearest 1 kHz") {
  // Independent center computation (HTK formula, 80 filters over 0..sr/2).
  const double top = 2595.0 * std::log10(1.0 + (kRate / 2.0) / 700.0);
  int nearest = 0;
  double best = 1e9;
  for (int k = 0; k < 80; ++k) {
    const double hz = 700.0 * (std::pow(10.0, top * (k + 1) / 81.0 / 2595.0) - 1.0);
    if (std::abs(hz - 1000.0) < best) {
      best = std::abs(hz - 1000.0);
      nearest = k;
    }
  }
  CHECK(nearest == 24);  // frozen oracle output

  FeatureConfig cfg;
  const auto mel = compute_log_mel(tone({1000.0}, 0.5), cfg);
  for (int t = 0; t < mel.frames; ++t) {
    int arg = 0;
    for (int b = 1; b < mel.bins; ++b) {
      if (mel.at(b, t) > mel.at(arg, t)) arg = b;
    }
    CHECK(arg == nearest);
  }
}

TEST_CASE("analysis is local: concatenation matches away from the seam") {
  FeatureConfig cfg;
  const auto a = tone({300.0}, 0.4);
  const auto b = tone({700.0, 1300.0}, 0.3, 0.2);
  Waveform ab{a.samples, kRate};
  ab.samples.insert(ab.samples.end(), b.samples.begin(), b.samples.end());
  const auto ma = compute_log_mel(a, cfg);
  const auto mab = compute_log_mel(ab, cfg);
  const int guard = (cfg.window_length() / 2) / cfg.hop_length() + 2;
  for (int t = 0; t < ma.frames - guard; ++t) {
    for (int bin = 0; bin < 80; ++bin) CHECK(mab.at(bin, t) == ma.at(bin, t));
  }
}

TEST_CASE("error contracts") {
  FeatureConfig cfg;
  expect_error([&] { compute_log_mel(Waveform{std::vector<float>(100), kRate}, cfg); }, Errc::TooShort);
  expect_error([&] { extract_f0(Waveform{std::vector<float>(100), kRate}, cfg); }, Errc::TooShort);
  expect_error([&] { compute_log_mel(Waveform{std::vector<float>(4000), 16000}, cfg); }, Errc::RateMismatch);
}

TEST_CASE("220 Hz sine tracks within 5 Hz on interior frames") {
  FeatureConfig cfg;
  const auto f0 = extract_f0(tone({220.0}, 1.0), cfg);
  REQUIRE(f0.size() == 80);
  for (std::size_t t = 2; t + 2 < f0.size(); ++t) CHECK(std::abs(f0[t] - 220.0f) <= 5.0f);
}

TEST_CASE("150 Hz harmonic complex tracks its fundamental") {
  const auto w = tone({150.0, 300.0, 450.0}, 1.0, 0.2);
  const double period_f0 = whole_signal_f0(w);
  CHECK(period_f0 == doctest::Approx(150.0).epsilon(0.01));
  const auto f0 = extract_f0(w, FeatureConfig{});
  for (std::size_t t = 2; t + 2 < f0.size(); ++t) CHECK(std::abs(f0[t] - period_f0) <= 5.0);
}

TEST_CASE("F0 statistics") {
  const std::vector<PitchTrack> one = {{100, 0, 200}};
  auto s = compute_f0_stats(one);
  CHECK(s.mu_f0 == doctest::Approx(150.0));
  CHECK(s.sigma_f0 == doctest::Approx(50.0));
  const std::vector<PitchTrack> flat = {{120, 120, 120}};
  s = compute_f0_stats(flat);
  CHECK(s.mu_f0 == doctest::Approx(120.0));
  CHECK(s.sigma_f0 == 1.0);
  const std::vector<PitchTrack> mixed = {{100}, {0, 0}};
  CHECK(compute_f0_stats(mixed).mu_f0 == doctest::Approx(100.0));
  const std::vector<PitchTrack> none = {{0, 0}};
  expect_error([&] { compute_f0_stats(none); }, Errc::NoVoicedFrames);
}

TEST_CASE("property: mel and F0 frame counts agree, features are deterministic and monotone in gain") {
  FeatureConfig cfg;
  std::mt19937_64 rng(11);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 276 + rng() % 20000;
    Waveform w{std::vector<float>(len), kRate};
    for (auto& s : w.samples) s = noise(rng);
    const auto mel = compute_log_mel(w, cfg);
    CHECK(extract_f0(w, cfg).size() == static_cast<std::size_t>(mel.frames));
    CHECK(mel.frames == cfg.frame_count(len));
    CHECK(compute_log_mel(w, cfg).values == mel.values);

    Waveform louder = w;
    for (auto& s : louder.samples) s *= 1.7f;
    const auto loud = compute_log_mel(louder, cfg);
    for (std::size_t i = 0; i < mel.values.size(); ++i) CHECK(loud.values[i] >= mel.values[i]);
  }
}

TEST_CASE("wav roundtrip at 16-bit resolution") {
  const auto dir = testing::scratch_dir("wav");
  const auto w = tone({440.0}, 0.1);
  write_wav(dir / "a.wav", w);
  const auto back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == kRate);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0f / 32767.0f);
}
