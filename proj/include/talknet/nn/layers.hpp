#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "talknet/nn/tensor.hpp"

namespace talknet::nn {

template <typename T>
void init_uniform(Tensor<T>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.value()) v = static_cast<T>(dist(rng));
}

/// Per-channel temporal convolution, stride 1, zero "same" padding. Each
/// sequence of a batch is padded independently.
template <typename T>
class DepthwiseConv1d {
 public:
  DepthwiseConv1d() = default;
  DepthwiseConv1d(std::size_t channels, std::size_t kernel) : weight({channels, kernel}), channels_(channels), kernel_(kernel) {
    if (kernel % 2 == 0) throw Error(Errc::ConfigInvalid, "depthwise kernel size must be odd", {{"kernel", kernel}});
  }

  void init(std::mt19937_64& rng) { init_uniform(weight, std::sqrt(1.0 / static_cast<double>(kernel_)), rng); }

  std::size_t channels() const { return channels_; }
  std::size_t kernel() const { return kernel_; }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    require_shape(x, channels_, "depthwise conv");
    Frames<T> y(channels_, x.layout);
    const auto half = static_cast<std::ptrdiff_t>(kernel_ / 2);
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* w = weight.data() + c * kernel_;
      for (std::size_t b = 0; b < x.layout.batch(); ++b) {
        const auto len = static_cast<std::ptrdiff_t>(x.layout.lengths[b]);
        const T* xs = x.row(c) + b * x.layout.max_len;
        T* ys = y.row(c) + b * x.layout.max_len;
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - half;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - off);
          const T wk = w[k];
          for (std::ptrdiff_t t = lo; t < hi; ++t) ys[t] += wk * xs[t + off];
        }
      }
    }
    if (ctx.record) input_ = x;
    return y;
  }

  Frames<T> backward(const Frames<T>& gy) {
    Frames<T> gx(channels_, gy.layout);
    const auto half = static_cast<std::ptrdiff_t>(kernel_ / 2);
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* w = weight.data() + c * kernel_;
      T* gw = weight.grad_data() + c * kernel_;
      for (std::size_t b = 0; b < gy.layout.batch(); ++b) {
        const auto len = static_cast<std::ptrdiff_t>(gy.layout.lengths[b]);
        const T* xs = input_.row(c) + b * gy.layout.max_len;
        const T* gys = gy.row(c) + b * gy.layout.max_len;
        T* gxs = gx.row(c) + b * gy.layout.max_len;
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - half;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - off);
          T acc = 0;
          for (std::ptrdiff_t t = lo; t < hi; ++t) {
            acc += gys[t] * xs[t + off];
            gxs[t + off] += w[k] * gys[t];
          }
          gw[k] += acc;
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<T>& out) { out.push_back({prefix + ".weight", &weight, true}); }

  Tensor<T> weight;

 private:
  std::size_t channels_ = 0;
  std::size_t kernel_ = 1;
  Frames<T> input_;
};

/// 1x1 convolution (channel mixing), optional bias on valid columns.
template <typename T>
class Pointwise {
 public:
  Pointwise() = default;
  Pointwise(std::size_t in, std::size_t out, bool bias) : weight({out, in}), in_(in), out_(out), has_bias_(bias) {
    if (bias) this->bias = Tensor<T>({out});
  }

  void init(std::mt19937_64& rng) { init_uniform(weight, std::sqrt(1.0 / static_cast<double>(in_)), rng); }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    require_shape(x, in_, "pointwise conv");
    Frames<T> y(out_, x.layout);
    ConstMatrixMap<T> w(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    y.matrix().noalias() = w * x.matrix();
    if (has_bias_) {
      const auto mask = x.layout.mask();
      for (std::size_t o = 0; o < out_; ++o) {
        T* yr = y.row(o);
        const T bo = bias.value()[o];
        for (std::size_t col = 0; col < y.columns(); ++col) {
          if (mask[col]) yr[col] += bo;
        }
      }
    }
    if (ctx.record) input_ = x;
    return y;
  }

  /// `gy` must be zero on padded columns.
  Frames<T> backward(const Frames<T>& gy) {
    ConstMatrixMap<T> w(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    MatrixMap<T> gw(weight.grad_data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    gw.noalias() += gy.matrix() * input_.matrix().transpose();
    if (has_bias_) {
      for (std::size_t o = 0; o < out_; ++o) {
        const T* g = gy.row(o);
        T acc = 0;
        for (std::size_t col = 0; col < gy.columns(); ++col) acc += g[col];
        bias.grad()[o] += acc;
      }
    }
    Frames<T> gx(in_, gy.layout);
    gx.matrix().noalias() = w.transpose() * gy.matrix();
    return gx;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", &weight, true});
    if (has_bias_) out.push_back({prefix + ".bias", &bias, true});
  }

  Tensor<T> weight;
  Tensor<T> bias;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  bool has_bias_ = false;
  Frames<T> input_;
};

/// Batch normalization over (batch, time) with masked statistics. Training
/// mode normalizes with batch statistics and updates running estimates
/// (momentum 0.1, unbiased variance); eval mode uses the running estimates.
template <typename T>
class BatchNorm1d {
 public:
  static constexpr double kEps = 1e-5;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t channels)
      : gamma({channels}), beta({channels}), running_mean({channels}, false), running_var({channels}, false),
        channels_(channels) {
    std::fill(gamma.value().begin(), gamma.value().end(), T(1));
    std::fill(running_var.value().begin(), running_var.value().end(), T(1));
  }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    require_shape(x, channels_, "batch norm");
    const auto mask = x.layout.mask();
    const std::size_t n = x.layout.valid_count();
    const std::size_t cols = x.columns();
    Frames<T> y(channels_, x.layout);
    if (ctx.record) {
      xhat_ = Frames<T>(channels_, x.layout);
      inv_std_.assign(channels_, T(0));
      trained_ = ctx.training;
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* xr = x.row(c);
      T mean;
      T inv;
      if (ctx.training) {
        if (n == 0) throw Error(Errc::ShapeMismatch, "batch norm over an empty batch");
        T sum = 0;
        for (std::size_t col = 0; col < cols; ++col) {
          if (mask[col]) sum += xr[col];
        }
        mean = sum / static_cast<T>(n);
        T ss = 0;
        for (std::size_t col = 0; col < cols; ++col) {
          if (mask[col]) ss += (xr[col] - mean) * (xr[col] - mean);
        }
        const T var = ss / static_cast<T>(n);
        inv = T(1) / std::sqrt(var + static_cast<T>(kEps));
        const T unbiased = n > 1 ? ss / static_cast<T>(n - 1) : var;
        auto& rm = running_mean.value()[c];
        auto& rv = running_var.value()[c];
        const double mom = ctx.bn_momentum;
        rm = static_cast<T>((1.0 - mom) * rm + mom * mean);
        rv = static_cast<T>((1.0 - mom) * rv + mom * unbiased);
      } else {
        mean = running_mean.value()[c];
        inv = T(1) / std::sqrt(running_var.value()[c] + static_cast<T>(kEps));
      }
      const T g = gamma.value()[c];
      const T bt = beta.value()[c];
      T* yr = y.row(c);
      for (std::size_t col = 0; col < cols; ++col) {
        if (!mask[col]) continue;
        const T h = (xr[col] - mean) * inv;
        yr[col] = g * h + bt;
        if (ctx.record) xhat_.row(c)[col] = h;
      }
      if (ctx.record) inv_std_[c] = inv;
    }
    return y;
  }

  Frames<T> backward(const Frames<T>& gy) {
    const std::size_t n = gy.layout.valid_count();
    const std::size_t cols = gy.columns();
    const auto mask = gy.layout.mask();
    Frames<T> gx(channels_, gy.layout);
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* g = gy.row(c);
      const T* h = xhat_.row(c);
      T sum_g = 0;
      T sum_gh = 0;
      for (std::size_t col = 0; col < cols; ++col) {
        if (!mask[col]) continue;
        sum_g += g[col];
        sum_gh += g[col] * h[col];
      }
      gamma.grad()[c] += sum_gh;
      beta.grad()[c] += sum_g;
      const T scale = gamma.value()[c] * inv_std_[c];
      T* gxr = gx.row(c);
      if (trained_) {
        const T inv_n = T(1) / static_cast<T>(n);
        for (std::size_t col = 0; col < cols; ++col) {
          if (mask[col]) gxr[col] = scale * (g[col] - inv_n * sum_g - h[col] * inv_n * sum_gh);
        }
      } else {
        for (std::size_t col = 0; col < cols; ++col) {
          if (mask[col]) gxr[col] = scale * g[col];
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", &gamma, true});
    out.push_back({prefix + ".beta", &beta, true});
    out.push_back({prefix + ".running_mean", &running_mean, false});
    out.push_back({prefix + ".running_var", &running_var, false});
  }

  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

 private:
  std::size_t channels_ = 0;
  bool trained_ = false;
  Frames<T> xhat_;
  std::vector<T> inv_std_;
};

/// ReLU followed by inverted dropout; stores the combined multiplier.
template <typename T>
class ReluDropout {
 public:
  ReluDropout() = default;
  explicit ReluDropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(Errc::ConfigInvalid, "dropout must lie in [0, 1)", {{"rate", rate}});
  }

  double rate() const { return rate_; }

  Frames<T> forward(const Frames<T>& z, const ForwardContext& ctx) {
    Frames<T> y(z.channels, z.layout);
    const bool drop = ctx.training && ctx.dropout && rate_ > 0.0;
    if (drop && ctx.rng == nullptr) throw Error(Errc::ConfigInvalid, "training-mode dropout needs an RNG");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const T keep_scale = drop ? static_cast<T>(1.0 / (1.0 - rate_)) : T(1);
    if (ctx.record) scale_.assign(z.data.size(), T(0));
    std::vector<std::uint8_t> active;
    if (ctx.track_kinks) active.assign(z.data.size(), 0);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      const bool on = z.data[i] > T(0);
      T s = on ? keep_scale : T(0);
      if (drop && uni(*ctx.rng) < rate_) s = T(0);
      y.data[i] = z.data[i] * s;
      if (ctx.record) scale_[i] = s;
      if (ctx.track_kinks) active[i] = on ? 1 : 0;
    }
    if (ctx.track_kinks) kink_hash_ = fnv_mix(kFnvSeed, active);
    return y;
  }

  Frames<T> backward(const Frames<T>& gy) {
    Frames<T> gz(gy.channels, gy.layout);
    for (std::size_t i = 0; i < gy.data.size(); ++i) gz.data[i] = gy.data[i] * scale_[i];
    return gz;
  }

  std::uint64_t kink_hash() const { return kink_hash_; }

 private:
  double rate_ = 0.0;
  std::vector<T> scale_;
  std::uint64_t kink_hash_ = 0;
};

/// depthwise conv -> pointwise conv -> batch norm [-> ReLU -> dropout]
template <typename T>
class SubBlock {
 public:
  SubBlock() = default;
  SubBlock(std::size_t in, std::size_t out, std::size_t kernel, double dropout, bool activate)
      : dw(in, kernel), pw(in, out, false), bn(out), act(dropout), activate_(activate) {}

  void init(std::mt19937_64& rng) {
    dw.init(rng);
    pw.init(rng);
  }

  bool activates() const { return activate_; }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    auto z = bn.forward(pw.forward(dw.forward(x, ctx), ctx), ctx);
    return activate_ ? act.forward(z, ctx) : z;
  }

  Frames<T> backward(const Frames<T>& gy) {
    if (activate_) return dw.backward(pw.backward(bn.backward(act.backward(gy))));
    return dw.backward(pw.backward(bn.backward(gy)));
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    dw.collect(prefix + ".dw", out);
    pw.collect(prefix + ".pw", out);
    bn.collect(prefix + ".bn", out);
  }

  std::uint64_t kink_hash() const { return activate_ ? act.kink_hash() : 0; }

  DepthwiseConv1d<T> dw;
  Pointwise<T> pw;
  BatchNorm1d<T> bn;
  ReluDropout<T> act;

 private:
  bool activate_ = true;
};

struct BlockSpec {
  std::string name;
  std::size_t sub_blocks = 1;
  std::size_t channels = 0;
  std::size_t kernel = 1;
  double dropout = 0.0;
  bool residual = false;
};

/// A chain of sub-blocks. With `residual`, the input passes through a
/// pointwise projection + batch norm and is added to the last sub-block's
/// normalized output before the final ReLU and dropout.
template <typename T>
class Block {
 public:
  Block() = default;
  Block(std::size_t in, const BlockSpec& spec) : spec_(spec) {
    if (spec.sub_blocks == 0 || spec.channels == 0) throw Error(Errc::ConfigInvalid, "empty block " + spec.name);
    for (std::size_t i = 0; i < spec.sub_blocks; ++i) {
      const bool last = i + 1 == spec.sub_blocks;
      subs.emplace_back(i == 0 ? in : spec.channels, spec.channels, spec.kernel, spec.dropout, !(last && spec.residual));
    }
    if (spec.residual) {
      res_pw = Pointwise<T>(in, spec.channels, false);
      res_bn = BatchNorm1d<T>(spec.channels);
      act = ReluDropout<T>(spec.dropout);
    }
  }

  void init(std::mt19937_64& rng) {
    for (auto& s : subs) s.init(rng);
    if (spec_.residual) res_pw.init(rng);
  }

  const BlockSpec& spec() const { return spec_; }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    Frames<T> h = subs.front().forward(x, ctx);
    for (std::size_t i = 1; i < subs.size(); ++i) h = subs[i].forward(h, ctx);
    if (!spec_.residual) return h;
    const auto r = res_bn.forward(res_pw.forward(x, ctx), ctx);
    for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += r.data[i];
    return act.forward(h, ctx);
  }

  Frames<T> backward(const Frames<T>& gy) {
    if (!spec_.residual) {
      Frames<T> g = subs.back().backward(gy);
      for (std::size_t i = subs.size() - 1; i-- > 0;) g = subs[i].backward(g);
      return g;
    }
    const auto gs = act.backward(gy);
    auto gx = res_pw.backward(res_bn.backward(gs));
    Frames<T> g = subs.back().backward(gs);
    for (std::size_t i = subs.size() - 1; i-- > 0;) g = subs[i].backward(g);
    for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
    return gx;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (std::size_t i = 0; i < subs.size(); ++i) subs[i].collect(prefix + ".sub" + std::to_string(i), out);
    if (spec_.residual) {
      res_pw.collect(prefix + ".res.pw", out);
      res_bn.collect(prefix + ".res.bn", out);
    }
  }

  std::uint64_t kink_hash() const {
    std::uint64_t h = kFnvSeed;
    for (const auto& s : subs) h = (h ^ s.kink_hash()) * 1099511628211ULL;
    if (spec_.residual) h = (h ^ act.kink_hash()) * 1099511628211ULL;
    return h;
  }

  /// Frames of context on each side that influence one output frame.
  std::size_t radius() const { return spec_.sub_blocks * (spec_.kernel / 2); }

  std::vector<SubBlock<T>> subs;
  Pointwise<T> res_pw;
  BatchNorm1d<T> res_bn;
  ReluDropout<T> act;

 private:
  BlockSpec spec_;
};

/// Sequential stack of blocks (the QuartzNet-style trunk).
template <typename T>
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(std::size_t in, const std::vector<BlockSpec>& specs) : in_(in) {
    std::size_t c = in;
    for (const auto& s : specs) {
      blocks.emplace_back(c, s);
      c = s.channels;
    }
    out_ = c;
  }

  void init(std::mt19937_64& rng) {
    for (auto& b : blocks) b.init(rng);
  }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

  Frames<T> forward(const Frames<T>& x, const ForwardContext& ctx) {
    Frames<T> h = x;
    for (auto& b : blocks) h = b.forward(h, ctx);
    return h;
  }

  Frames<T> backward(const Frames<T>& gy) {
    Frames<T> g = gy;
    for (std::size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(g);
    return g;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (auto& b : blocks) b.collect(prefix + "." + b.spec().name, out);
  }

  std::uint64_t kink_hash() const {
    std::uint64_t h = kFnvSeed;
    for (const auto& b : blocks) h = (h ^ b.kink_hash()) * 1099511628211ULL;
    return h;
  }

  std::size_t radius() const {
    std::size_t r = 0;
    for (const auto& b : blocks) r += b.radius();
    return r;
  }

  std::vector<Block<T>> blocks;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

}  // namespace talknet::nn
