#include "talknet/audio/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "talknet/error.hpp"

namespace talknet::audio {

namespace {

// FFTW planning is not thread-safe; execution with a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void magnitude(std::vector<double>& mag) {
    fftw_execute(plan_);
    mag.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

std::size_t reflect_index(std::int64_t i, std::int64_t len) {
  if (len == 1) return 0;
  const std::int64_t period = 2 * (len - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= len) i = period - i;
  return static_cast<std::size_t>(i);
}

void check_wave(const Waveform& wave, const FeatureConfig& cfg) {
  if (wave.sample_rate != cfg.sample_rate) {
    throw Error(Errc::RateMismatch, "waveform rate does not match feature config",
                {{"wave", wave.sample_rate}, {"config", cfg.sample_rate}});
  }
  if (wave.samples.size() < static_cast<std::size_t>(cfg.hop_length())) {
    throw Error(Errc::TooShort, "waveform shorter than one hop",
                {{"samples", wave.samples.size()}, {"hop", cfg.hop_length()}});
  }
}

/// Copies the window-length segment centered on `frame` (reflect padded).
void frame_segment(const Waveform& wave, const FeatureConfig& cfg, int frame, std::span<double> out) {
  const auto len = static_cast<std::int64_t>(wave.samples.size());
  const std::int64_t start = static_cast<std::int64_t>(frame) * cfg.hop_length() - cfg.window_length() / 2;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = wave.samples[reflect_index(start + static_cast<std::int64_t>(i), len)];
  }
}

}  // namespace

int FeatureConfig::window_length() const {
  return static_cast<int>(std::nearbyint(sample_rate * window_ms / 1000.0));
}

int FeatureConfig::hop_length() const {
  return static_cast<int>(std::nearbyint(sample_rate * hop_ms / 1000.0));
}

int FeatureConfig::fft_size() const {
  int n = 1;
  while (n < window_length()) n *= 2;
  return n;
}

int FeatureConfig::frame_count(std::size_t samples) const {
  return 1 + static_cast<int>(samples / static_cast<std::size_t>(hop_length()));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points_hz(const FeatureConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double hi = hz_to_mel(cfg.upper_frequency());
  std::vector<double> hz(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(const FeatureConfig& cfg) {
  auto hz = mel_points_hz(cfg);
  return {hz.begin() + 1, hz.end() - 1};
}

std::vector<double> mel_filterbank(const FeatureConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const int n_bins = n_fft / 2 + 1;
  const auto hz = mel_points_hz(cfg);
  std::vector<double> fb(static_cast<std::size_t>(cfg.n_mels) * n_bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lower = hz[m];
    const double center = hz[m + 1];
    const double upper = hz[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / n_fft;
      const double w = std::min((f - lower) / (center - lower), (upper - f) / (upper - center));
      fb[static_cast<std::size_t>(m) * n_bins + k] = std::max(0.0, w);
    }
  }
  return fb;
}

MelSpec compute_log_mel(const Waveform& wave, const FeatureConfig& cfg) {
  check_wave(wave, cfg);
  const int win = cfg.window_length();
  const int n_fft = cfg.fft_size();
  const int n_bins = n_fft / 2 + 1;
  const int frames = cfg.frame_count(wave.samples.size());
  const auto fb = mel_filterbank(cfg);

  std::vector<double> hann(static_cast<std::size_t>(win));
  for (int i = 0; i < win; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

  MelSpec mel;
  mel.bins = cfg.n_mels;
  mel.frames = frames;
  mel.values.resize(static_cast<std::size_t>(mel.bins) * frames);

  RealFft fft(n_fft);
  std::vector<double> segment(static_cast<std::size_t>(win));
  std::vector<double> mag;
  for (int t = 0; t < frames; ++t) {
    frame_segment(wave, cfg, t, segment);
    double* in = fft.input();
    for (int i = 0; i < win; ++i) in[i] = segment[i] * hann[i];
    std::fill(in + win, in + n_fft, 0.0);
    fft.magnitude(mag);
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double* row = fb.data() + static_cast<std::size_t>(m) * n_bins;
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += row[k] * mag[k];
      mel.values[static_cast<std::size_t>(m) * frames + t] = static_cast<float>(std::log(std::max(e, cfg.log_floor)));
    }
  }
  return mel;
}

PitchTrack extract_f0(const Waveform& wave, const FeatureConfig& cfg) {
  check_wave(wave, cfg);
  const int win = cfg.window_length();
  const int frames = cfg.frame_count(wave.samples.size());
  const int min_lag = static_cast<int>(std::floor(cfg.sample_rate / cfg.f0_max));
  const int max_lag = std::min(static_cast<int>(std::ceil(cfg.sample_rate / cfg.f0_min)), win - 2);

  PitchTrack f0(static_cast<std::size_t>(frames), 0.0f);
  std::vector<double> x(static_cast<std::size_t>(win));
  std::vector<double> r(static_cast<std::size_t>(max_lag + 2), 0.0);
  // prefix sums of x^2 give the energies of both overlap regions in O(1)
  std::vector<double> energy(static_cast<std::size_t>(win + 1));

  for (int t = 0; t < frames; ++t) {
    frame_segment(wave, cfg, t, x);
    energy[0] = 0.0;
    for (int i = 0; i < win; ++i) energy[i + 1] = energy[i] + x[i] * x[i];
    const double rms = std::sqrt(energy[win] / win);
    if (rms < cfg.rms_floor) continue;

    double best = -1.0;
    for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      const int n = win - lag;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += x[i] * x[i + lag];
      const double e1 = energy[n];
      const double e2 = energy[win] - energy[lag];
      r[lag - (min_lag - 1)] = e1 > 0.0 && e2 > 0.0 ? acc / std::sqrt(e1 * e2) : 0.0;
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r[lag - (min_lag - 1)]);
    }
    if (best < cfg.voicing_threshold) continue;

    // shortest-lag local maximum close to the global peak avoids sub-octave picks
    auto at = [&](int lag) { return r[lag - (min_lag - 1)]; };
    int chosen = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      if (at(lag) >= at(lag - 1) && at(lag) >= at(lag + 1) && at(lag) >= 0.85 * best &&
          at(lag) >= cfg.voicing_threshold) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0) continue;
    const double a = at(chosen - 1);
    const double b = at(chosen);
    const double c = at(chosen + 1);
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    const double hz = cfg.sample_rate / (chosen + shift);
    f0[t] = static_cast<float>(std::clamp(hz, cfg.f0_min, cfg.f0_max));
  }
  return f0;
}

PitchStats compute_f0_stats(std::span<const PitchTrack> tracks) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& tr : tracks) {
    for (float v : tr) {
      if (v > 0.0f) {
        sum += v;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(Errc::NoVoicedFrames, "no voiced frames to compute pitch statistics");
  const double mu = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& tr : tracks) {
    for (float v : tr) {
      if (v > 0.0f) ss += (v - mu) * (v - mu);
    }
  }
  return {mu, std::max(1.0, std::sqrt(ss / static_cast<double>(n)))};
}

}  // namespace talknet::audio
