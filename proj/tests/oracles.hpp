#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "talknet/align/viterbi.hpp"

namespace oracle {

struct BestPath {
  std::vector<std::int32_t> durations;
  double score = 0.0;
};

/// Enumerates every monotonic CTC state path. Among exact-score ties it picks
/// the path that the stay > advance > skip traceback yields: prefer ending in
/// the final blank, then compare move ranks from the last transition back.
inline std::optional<BestPath> brute_force_align(const talknet::align::LogProbLattice& lat,
                                                 const talknet::text::TokenSeq& target) {
  const std::size_t S = target.ids.size();
  const std::size_t T = lat.frames();
  std::optional<BestPath> best;
  std::vector<int> best_key;
  std::vector<std::size_t> states(T);

  auto finish = [&]() {
    const std::size_t last = states[T - 1];
    if (last + 2 < S) return;
    double score = 0.0;
    for (std::size_t t = 0; t < T; ++t) score += lat.at(t, static_cast<std::size_t>(target.ids[states[t]]));
    std::vector<int> key = {last == S - 1 ? 0 : 1};
    for (std::size_t t = T - 1; t >= 1; --t) key.push_back(static_cast<int>(states[t] - states[t - 1]));
    if (!best || score > best->score || (score == best->score && key < best_key)) {
      BestPath p;
      p.score = score;
      p.durations.assign(S, 0);
      for (auto s : states) ++p.durations[s];
      best = p;
      best_key = key;
    }
  };
  auto rec = [&](auto&& self, std::size_t t) -> void {
    if (t == T) {
      finish();
      return;
    }
    const std::size_t prev = states[t - 1];
    for (std::size_t step = 0; step <= 2; ++step) {
      const std::size_t s = prev + step;
      if (s >= S) break;
      if (step == 2 && (target.ids[s] == talknet::text::kBlankId || target.ids[s] == target.ids[prev])) continue;
      states[t] = s;
      self(self, t + 1);
    }
  };
  for (std::size_t start = 0; start < std::min<std::size_t>(2, S); ++start) {
    states[0] = start;
    if (T == 1) {
      finish();
    } else {
      rec(rec, 1);
    }
  }
  return best;
}

}  // namespace oracle
