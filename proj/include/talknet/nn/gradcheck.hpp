#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace talknet::nn {

/// Loss at the current parameter values plus a fingerprint of the ReLU
/// activation pattern (0 when the op has no kinks).
struct Evaluation {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

/// A block of scalars to perturb and the analytic gradient computed for it.
struct GradProbe {
  std::string name;
  std::span<double> values;
  std::vector<double> analytic;
};

struct GradcheckOptions {
  double step = 1e-4;
  /// Coordinates sampled per probe; probes with fewer entries are checked fully.
  std::size_t max_coords_per_probe = 64;
  std::uint64_t seed = 0;
  /// A coordinate whose perturbation flips a ReLU is retried with step/10 up
  /// to this many times, then skipped.
  int kink_retries = 3;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central differences against analytic gradients. Error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8); the report carries the maximum.
GradcheckReport finite_diff_gradcheck(const std::function<Evaluation()>& evaluate, std::span<GradProbe> probes,
                                      const GradcheckOptions& options = {});

}  // namespace talknet::nn
