#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "talknet/io/ten1.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::align {

/// Frame-level log probabilities from an external CTC model, row-major [T x V].
class LogProbLattice {
 public:
  LogProbLattice(std::size_t frames, std::size_t vocab_size, std::vector<float> values);
  static LogProbLattice from_ten1(const io::Ten1& t);
  io::Ten1 to_ten1() const;

  std::size_t frames() const { return frames_; }
  std::size_t vocab_size() const { return vocab_; }
  float at(std::size_t t, std::size_t v) const { return values_[t * vocab_ + v]; }
  std::span<const float> row(std::size_t t) const { return {values_.data() + t * vocab_, vocab_}; }
  std::span<const float> values() const { return values_; }

  /// Throws BadLattice unless every row's logsumexp lies within `tol` of 0.
  void check_normalized(double tol = 1e-3) const;

 private:
  std::size_t frames_;
  std::size_t vocab_;
  std::vector<float> values_;
};

struct AlignmentResult {
  text::DurationSeq durations;  // over the blank-interleaved target
  double path_logprob = 0.0;
};

/// Minimum number of frames a CTC path through `target` needs: one per
/// grapheme plus a separating blank between equal neighbours.
std::size_t min_frames_needed(const text::TokenSeq& target);

/// Highest-scoring monotonic CTC path through the extended target
/// [~,t1,~,...,tn,~]. Moves: stay, advance by one, or skip a blank between
/// two different graphemes. Paths start in state 0 or 1 and end in one of the
/// last two states. Ties resolve to the final blank at the end and to
/// stay > advance > skip during traceback.
AlignmentResult viterbi_align(const LogProbLattice& lattice, const text::TokenSeq& target);

/// Synthetic lattice for known frame labels: the true label gets 1 - eta,
/// the remaining mass is spread evenly over the other symbols.
LogProbLattice lattice_from_durations(const text::TokenSeq& target, std::span<const std::int32_t> durations,
                                      std::size_t vocab_size, double eta = 0.1);

/// Random normalized lattice (softmax of Gaussian logits scaled by `sharpness`).
LogProbLattice random_lattice(std::size_t frames, std::size_t vocab_size, std::mt19937_64& rng,
                              double sharpness = 2.0);

}  // namespace talknet::align
