#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "talknet/audio/features.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::pipeline {

/// One scripted utterance of the synthetic corpus.
struct FixtureUtterance {
  std::string id;
  std::string text;
  text::TokenSeq tokens;         // blank-interleaved
  text::DurationSeq durations;   // frames per token
};

/// The ten fixed phrases of the synthetic corpus.
const std::vector<std::string>& fixture_texts();

/// Scripted frame counts: graphemes 2..5 frames by symbol, silent symbols 3,
/// edge blanks 2, a separating blank between equal neighbours.
text::DurationSeq scripted_durations(const text::TokenSeq& tokens, const text::Vocab& vocab);

/// Renders frame labels as audio: letters become harmonic tone complexes with
/// a per-letter spectral envelope following a smooth F0 contour, every other
/// symbol is digital silence. Length (frames - 1) * hop gives exactly `frames`
/// analysis frames.
audio::Waveform render_fixture(const text::TokenSeq& tokens, const text::DurationSeq& durations,
                               const text::Vocab& vocab, std::uint64_t seed, const audio::FeatureConfig& cfg = {});

/// Writes wavs/, lattices/ (TEN1 + vocab.txt), manifest.jsonl and vocab.txt
/// under `out`.
std::vector<FixtureUtterance> generate_fixtures(const std::filesystem::path& out, std::uint64_t seed = 0);

}  // namespace talknet::pipeline
