#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "talknet/audio/features.hpp"
#include "talknet/models/networks.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::pipeline {

struct DurationPrediction {
  text::TokenSeq tokens;  // blank-interleaved
  text::DurationSeq durations;
};

/// The three trained networks chained for text-to-mel inference. Loads
/// duration.ckpt, pitch.ckpt and mel.ckpt from one directory. Calls are
/// serialized internally, so one instance can be shared between threads.
class Synthesizer {
 public:
  explicit Synthesizer(const std::filesystem::path& ckpt_dir);
  ~Synthesizer();
  Synthesizer(const Synthesizer&) = delete;
  Synthesizer& operator=(const Synthesizer&) = delete;

  const text::Vocab& vocab() const;
  const audio::PitchStats& stats() const;

  /// `scale` multiplies the decoded integer durations (2 doubles them).
  DurationPrediction predict_durations(const std::string& text, double scale = 1.0);
  std::vector<DurationPrediction> predict_durations(const std::vector<std::string>& texts, double scale = 1.0);

  /// 0 where sigmoid(non-voiced logit) > 0.5, else body * sigma + mu clamped to [65, 400].
  audio::PitchTrack predict_pitch(const text::TokenSeq& tokens, const text::DurationSeq& durations);
  std::vector<audio::PitchTrack> predict_pitch(const std::vector<DurationPrediction>& items);

  audio::MelSpec synthesize_mel(const std::string& text, double scale = 1.0);
  /// One batched pass per stage.
  std::vector<audio::MelSpec> synthesize_batch(const std::vector<std::string>& texts, double scale = 1.0);

  models::DurationModel<float>& duration_model();
  models::PitchModel<float>& pitch_model();
  models::MelModel<float>& mel_model();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::mutex mutex_;
};

}  // namespace talknet::pipeline
