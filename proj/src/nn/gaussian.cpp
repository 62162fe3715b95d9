#include "talknet/nn/embedding.hpp"

#include <algorithm>
#include <limits>

namespace talknet::nn {

std::vector<double> gaussian_weights(std::span<const std::int32_t> durations) {
  const std::size_t n = durations.size();
  std::vector<double> centers(n);
  std::vector<double> sigmas(n);
  double start = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centers[i] = start + durations[i] / 2.0;
    sigmas[i] = std::max(durations[i], 1) / 2.0;
    start += durations[i];
  }
  const auto frames = static_cast<std::size_t>(start);
  std::vector<double> w(frames * n, 0.0);
  std::vector<double> logits(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const double pos = static_cast<double>(t) + 0.5;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (durations[i] <= 0) continue;
      const double z = (pos - centers[i]) / sigmas[i];
      logits[i] = -0.5 * z * z;
      peak = std::max(peak, logits[i]);
    }
    double total = 0.0;
    double* row = w.data() + t * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (durations[i] <= 0) continue;
      row[i] = std::exp(logits[i] - peak);
      total += row[i];
    }
    for (std::size_t i = 0; i < n; ++i) row[i] /= total;
  }
  return w;
}

}  // namespace talknet::nn
