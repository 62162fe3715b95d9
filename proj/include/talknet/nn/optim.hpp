#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "talknet/nn/tensor.hpp"

namespace talknet::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;  // coupled: added to the gradient
  double clip_norm = 1.0;      // global L2 norm; <= 0 disables clipping
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
};

struct AdamStepInfo {
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
};

/// Global L2 norm of all trainable gradients (accumulated in double).
template <typename T>
double global_grad_norm(const ParamList<T>& params) {
  double ss = 0.0;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    for (T g : p.tensor->grad()) ss += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(ss);
}

/// Rescales gradients so their global norm is at most `max_norm`. Gradients
/// already within the bound are left untouched. Returns the pre-clip norm.
template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& p : params) {
      if (!p.trainable) continue;
      for (T& g : p.tensor->grad()) g = static_cast<T>(g * scale);
    }
  }
  return norm;
}

/// One Adam update over the trainable entries of `params`: clip, add
/// weight_decay * p to the gradient, then the bias-corrected moment update.
template <typename T>
AdamStepInfo adam_step(ParamList<T>& params, AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
  for (const auto& p : params) {
    if (!p.trainable) continue;
    for (T g : p.tensor->grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw Error(Errc::NonFinite, "non-finite gradient in " + p.name, {{"param", p.name}});
      }
    }
  }
  AdamStepInfo info;
  info.grad_norm = clip_grad_norm(params, cfg.clip_norm);
  info.clipped = cfg.clip_norm > 0.0 && info.grad_norm > cfg.clip_norm;

  if (state.m.empty()) {
    for (const auto& p : params) {
      const std::size_t n = p.trainable ? p.tensor->size() : 0;
      state.m.emplace_back(n, T(0));
      state.v.emplace_back(n, T(0));
    }
  }
  if (state.m.size() != params.size()) throw Error(Errc::ShapeMismatch, "optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    auto value = p.tensor->value();
    auto grad = p.tensor->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != value.size()) throw Error(Errc::ShapeMismatch, "moment shape mismatch for " + p.name);
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = static_cast<double>(grad[j]) + cfg.weight_decay * static_cast<double>(value[j]);
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      value[j] = static_cast<T>(value[j] - lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps));
    }
  }
  return info;
}

template <typename T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) p.tensor->zero_grad();
}

/// Linear warmup over ceil(warmup_frac * total) steps, then cosine decay
/// from lr_max to lr_min at step == total.
double cosine_warmup_lr(std::int64_t step, std::int64_t total_steps, double lr_max = 1e-3, double lr_min = 1e-5,
                        double warmup_frac = 0.02);

}  // namespace talknet::nn
