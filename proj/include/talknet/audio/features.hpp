#pragma once

#include <span>
#include <vector>

#include "talknet/audio/wav.hpp"

namespace talknet::audio {

struct FeatureConfig {
  int sample_rate = 22050;
  double window_ms = 50.0;
  double hop_ms = 12.5;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 -> sample_rate / 2
  double log_floor = 1e-5;
  // F0 search
  double f0_min = 65.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.3;
  double rms_floor = 1e-4;

  /// Millisecond values converted with round-half-to-even: 1102 / 276 at 22.05 kHz.
  int window_length() const;
  int hop_length() const;
  /// Smallest power of two >= window_length().
  int fft_size() const;
  double upper_frequency() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  /// 1 + floor(samples / hop)
  int frame_count(std::size_t samples) const;
};

/// Log-mel spectrogram, row-major [bins x frames].
struct MelSpec {
  int bins = 0;
  int frames = 0;
  std::vector<float> values;

  float at(int bin, int frame) const { return values[static_cast<std::size_t>(bin) * frames + frame]; }
};

/// Per-frame F0 in Hz; 0 marks unvoiced frames.
using PitchTrack = std::vector<float>;

struct PitchStats {
  double mu_f0 = 0.0;
  double sigma_f0 = 1.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-mel filters, row-major [n_mels x (fft_size/2 + 1)], peak 1.
std::vector<double> mel_filterbank(const FeatureConfig& cfg);
/// Center frequency in Hz of each mel filter.
std::vector<double> mel_center_frequencies(const FeatureConfig& cfg);

MelSpec compute_log_mel(const Waveform& wave, const FeatureConfig& cfg);
PitchTrack extract_f0(const Waveform& wave, const FeatureConfig& cfg);

/// Mean and population standard deviation of voiced frames, sigma floored at 1 Hz.
PitchStats compute_f0_stats(std::span<const PitchTrack> tracks);

}  // namespace talknet::audio
