#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "talknet/text/vocab.hpp"

namespace talknet::text {

struct TokenSeq {
  std::vector<TokenId> ids;
  bool has_blanks = false;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSeq&) const = default;
};

/// Frame counts per token of a blank-interleaved sequence.
using DurationSeq = std::vector<std::int32_t>;

/// Lowercases, trims surrounding whitespace and maps each code point to its id.
TokenSeq tokenize(std::string_view text, const Vocab& vocab);

/// [t1..tn] -> [~,t1,~,...,tn,~]
TokenSeq insert_blanks(const TokenSeq& seq);

/// Inverse of insert_blanks on well-formed blank-interleaved input.
TokenSeq strip_blanks(const TokenSeq& seq);

/// Repeats token i durs[i] times. The result is a frame-level sequence and
/// carries has_blanks = false.
TokenSeq expand_by_durations(const TokenSeq& seq, std::span<const std::int32_t> durs);

/// Checks the blank-interleaved layout and the duration floors (>= 1 at
/// non-blank positions, >= 0 at blanks).
void validate_durations(const TokenSeq& seq, std::span<const std::int32_t> durs);

/// Structural check of the blank-interleaved form: odd length, blanks at even
/// positions, non-blank at odd positions.
bool is_blank_interleaved(const TokenSeq& seq);

}  // namespace talknet::text
