#include <cmath>
#include <numbers>

#include "talknet/nn/optim.hpp"

namespace talknet::nn {

double cosine_warmup_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min,
                        double warmup_frac) {
  if (total_steps <= 0) throw Error(Errc::BadSchedule, "total_steps must be positive", {{"total_steps", total_steps}});
  if (step < 0 || step > total_steps) {
    throw Error(Errc::BadSchedule, "step outside schedule", {{"step", step}, {"total_steps", total_steps}});
  }
  const auto warmup = static_cast<std::int64_t>(std::ceil(warmup_frac * static_cast<double>(total_steps)));
  if (step < warmup) return lr_max * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return lr_max;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace talknet::nn
