#include "talknet/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace talknet::nn {

GradcheckReport finite_diff_gradcheck(const std::function<Evaluation()>& evaluate, std::span<GradProbe> probes,
                                      const GradcheckOptions& options) {
  GradcheckReport report;
  const Evaluation base = evaluate();
  std::mt19937_64 rng(options.seed);
  for (auto& probe : probes) {
    std::vector<std::size_t> coords(probe.values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_probe) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_probe);
      std::sort(coords.begin(), coords.end());
    }
    for (auto i : coords) {
      double& x = probe.values[i];
      const double saved = x;
      double h = options.step;
      bool ok = false;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= options.kink_retries; ++attempt, h /= 10.0) {
        x = saved + h;
        const auto up = evaluate();
        x = saved - h;
        const auto down = evaluate();
        x = saved;
        if (up.signature == base.signature && down.signature == base.signature) {
          numeric = (up.loss - down.loss) / (2.0 * h);
          ok = true;
          break;
        }
      }
      if (!ok) {
        ++report.skipped;
        continue;
      }
      const double a = probe.analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = probe.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace talknet::nn
