#include "talknet/align/viterbi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "talknet/error.hpp"

namespace talknet::align {

LogProbLattice::LogProbLattice(std::size_t frames, std::size_t vocab_size, std::vector<float> values)
    : frames_(frames), vocab_(vocab_size), values_(std::move(values)) {
  if (frames_ == 0 || vocab_ == 0 || values_.size() != frames_ * vocab_) {
    throw Error(Errc::BadLattice, "lattice must be a non-empty T x V matrix",
                {{"frames", frames_}, {"vocab", vocab_}, {"values", values_.size()}});
  }
}

LogProbLattice LogProbLattice::from_ten1(const io::Ten1& t) {
  if (t.dims.size() != 2) throw Error(Errc::BadLattice, "lattice tensor must be 2-D", {{"ndim", t.dims.size()}});
  return {t.dims[0], t.dims[1], t.values};
}

io::Ten1 LogProbLattice::to_ten1() const {
  return {{static_cast<std::uint32_t>(frames_), static_cast<std::uint32_t>(vocab_)}, values_};
}

void LogProbLattice::check_normalized(double tol) const {
  for (std::size_t t = 0; t < frames_; ++t) {
    const auto r = row(t);
    const double peak = *std::max_element(r.begin(), r.end());
    if (!std::isfinite(peak)) throw Error(Errc::BadLattice, "non-finite lattice row", {{"frame", t}});
    double acc = 0.0;
    for (float v : r) acc += std::exp(static_cast<double>(v) - peak);
    const double lse = peak + std::log(acc);
    if (!(std::abs(lse) <= tol)) {
      throw Error(Errc::BadLattice, "lattice row is not a normalized distribution",
                  {{"frame", t}, {"logsumexp", lse}});
    }
  }
}

std::size_t min_frames_needed(const text::TokenSeq& target) {
  const auto graphemes = text::strip_blanks(target).ids;
  std::size_t need = graphemes.size();
  for (std::size_t i = 1; i < graphemes.size(); ++i) {
    if (graphemes[i] == graphemes[i - 1]) ++need;
  }
  return need;
}

AlignmentResult viterbi_align(const LogProbLattice& lattice, const text::TokenSeq& target) {
  if (!target.has_blanks || !text::is_blank_interleaved(target) || target.ids.size() < 3) {
    throw Error(Errc::ShapeMismatch, "alignment target must be blank-interleaved with at least one grapheme");
  }
  for (auto id : target.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= lattice.vocab_size()) {
      throw Error(Errc::ShapeMismatch, "target id outside lattice vocabulary", {{"id", id}});
    }
  }
  lattice.check_normalized();
  const std::size_t frames = lattice.frames();
  const std::size_t need = min_frames_needed(target);
  if (frames < need) {
    throw Error(Errc::Infeasible, "lattice too short for target: need " + std::to_string(need) + " frames",
                {{"needed", need}, {"frames", frames}});
  }

  const std::size_t states = target.ids.size();
  const auto& label = target.ids;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && label[s] != text::kBlankId && label[s] != label[s - 2];
  };

  std::vector<double> prev(states, kNegInf);
  std::vector<double> cur(states, kNegInf);
  // 0 = stay, 1 = advance, 2 = skip
  std::vector<std::uint8_t> back(frames * states, 0);
  prev[0] = lattice.at(0, static_cast<std::size_t>(label[0]));
  prev[1] = lattice.at(0, static_cast<std::size_t>(label[1]));

  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double best = prev[s];
      std::uint8_t move = 0;
      if (s >= 1 && prev[s - 1] > best) {
        best = prev[s - 1];
        move = 1;
      }
      if (can_skip(s) && prev[s - 2] > best) {
        best = prev[s - 2];
        move = 2;
      }
      back[t * states + s] = move;
      cur[s] = best == kNegInf ? kNegInf : best + lattice.at(t, static_cast<std::size_t>(label[s]));
    }
    std::swap(prev, cur);
  }

  std::size_t s = prev[states - 1] >= prev[states - 2] ? states - 1 : states - 2;
  AlignmentResult result;
  result.path_logprob = prev[s];
  result.durations.assign(states, 0);
  for (std::size_t t = frames; t-- > 0;) {
    ++result.durations[s];
    if (t > 0) s -= back[t * states + s];
  }
  return result;
}

LogProbLattice lattice_from_durations(const text::TokenSeq& target, std::span<const std::int32_t> durations,
                                      std::size_t vocab_size, double eta) {
  if (!(eta > 0.0 && eta < 1.0) || vocab_size < 2) {
    throw Error(Errc::ConfigInvalid, "lattice fixture needs 0 < eta < 1 and at least two symbols");
  }
  const auto frames = text::expand_by_durations(target, durations);
  const auto on = static_cast<float>(std::log(1.0 - eta));
  const auto off = static_cast<float>(std::log(eta / static_cast<double>(vocab_size - 1)));
  std::vector<float> values(frames.size() * vocab_size, off);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    values[t * vocab_size + static_cast<std::size_t>(frames.ids[t])] = on;
  }
  return {frames.size(), vocab_size, std::move(values)};
}

LogProbLattice random_lattice(std::size_t frames, std::size_t vocab_size, std::mt19937_64& rng, double sharpness) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> values(frames * vocab_size);
  std::vector<double> logits(vocab_size);
  for (std::size_t t = 0; t < frames; ++t) {
    double peak = -std::numeric_limits<double>::infinity();
    for (auto& l : logits) {
      l = sharpness * normal(rng);
      peak = std::max(peak, l);
    }
    double acc = 0.0;
    for (double l : logits) acc += std::exp(l - peak);
    const double lse = peak + std::log(acc);
    for (std::size_t v = 0; v < vocab_size; ++v) values[t * vocab_size + v] = static_cast<float>(logits[v] - lse);
  }
  return {frames, vocab_size, std::move(values)};
}

}  // namespace talknet::align
