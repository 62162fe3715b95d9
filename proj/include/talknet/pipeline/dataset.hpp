#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "talknet/audio/features.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::pipeline {

struct Utterance {
  std::string id;
  std::string text;
  std::string split;
  text::TokenSeq tokens;  // blank-interleaved
  text::DurationSeq durations;
  audio::MelSpec mel;
  audio::PitchTrack f0;
};

struct PrepareOptions {
  /// Defaults to <lattices>/vocab.txt, else built from the manifest texts.
  std::optional<std::filesystem::path> vocab;
  audio::FeatureConfig features;
  /// 0 picks the hardware concurrency.
  std::size_t workers = 0;
};

struct PrepareReport {
  std::vector<std::string> prepared;
  std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};

/// Extracts log-mel and F0 per utterance, aligns its lattice and writes
///   vocab.txt, utterances.jsonl, durations.jsonl, pitch_stats.json,
///   mel/<id>.ten [80 x T], f0/<id>.ten [T]
/// Output bytes depend only on the inputs.
PrepareReport prepare_training_set(const std::filesystem::path& manifest, const std::filesystem::path& lattice_dir,
                                   const std::filesystem::path& out_dir, const PrepareOptions& options = {});

class PreparedDataset {
 public:
  PreparedDataset(text::Vocab vocab, audio::PitchStats stats, std::vector<Utterance> utterances);
  static PreparedDataset load(const std::filesystem::path& dir);

  const text::Vocab& vocab() const { return vocab_; }
  const audio::PitchStats& stats() const { return stats_; }
  const std::vector<Utterance>& utterances() const { return utterances_; }
  /// Utterances tagged `split`, in file order.
  std::vector<const Utterance*> split(const std::string& name) const;

 private:
  text::Vocab vocab_;
  audio::PitchStats stats_;
  std::vector<Utterance> utterances_;
};

}  // namespace talknet::pipeline
