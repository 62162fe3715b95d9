#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "talknet/nn/gradcheck.hpp"

namespace talknet::models {

struct GradcheckCase {
  std::string name;
  nn::GradcheckReport report;
  double tolerance = 1e-4;

  bool passed() const { return report.checked > 0 && report.max_rel_error < tolerance; }
};

/// Every layer type in float64: depthwise/pointwise/linear, batch norm in
/// both modes, ReLU, sub-block, residual block, embedding, Gaussian
/// upsampling and the three losses.
std::vector<GradcheckCase> layer_gradchecks(std::uint64_t seed);

/// The three assembled networks end to end through their losses (training
/// mode batch norm, dropout disabled), tolerance 1e-3.
std::vector<GradcheckCase> model_gradchecks(std::uint64_t seed, double channel_scale = 0.25);

/// Sub-block check with the analytic gradient deliberately doubled.
nn::GradcheckReport corrupted_subblock_gradcheck(std::uint64_t seed);

}  // namespace talknet::models
