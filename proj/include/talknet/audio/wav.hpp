#pragma once

#include <filesystem>
#include <vector>

namespace talknet::audio {

struct Waveform {
  std::vector<float> samples;  // [-1, 1]
  int sample_rate = 0;

  double seconds() const { return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0; }
};

/// Reads a RIFF/WAVE file holding 16-bit mono PCM.
Waveform read_wav(const std::filesystem::path& path);
/// Writes 16-bit mono PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace talknet::audio
