#pragma once

#include <cmath>
#include <vector>

#include "talknet/nn/tensor.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::nn {

/// Token lookup table [vocab x dim], initialized N(0, 1).
template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim) : table({vocab, dim}), vocab_(vocab), dim_(dim) {}

  void init(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : table.value()) v = static_cast<T>(normal(rng));
  }

  std::size_t dim() const { return dim_; }
  std::size_t vocab() const { return vocab_; }

  /// `ids` is laid out like the columns of `layout`; padded entries are ignored.
  Frames<T> forward(std::span<const text::TokenId> ids, const Layout& layout, const ForwardContext& ctx) {
    if (ids.size() != layout.columns()) throw Error(Errc::ShapeMismatch, "embedding ids do not match layout");
    Frames<T> y(dim_, layout);
    const auto mask = layout.mask();
    for (std::size_t col = 0; col < ids.size(); ++col) {
      if (!mask[col]) continue;
      const auto id = ids[col];
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_) {
        throw Error(Errc::ShapeMismatch, "token id outside embedding table", {{"id", id}, {"vocab", vocab_}});
      }
      const T* row = table.data() + static_cast<std::size_t>(id) * dim_;
      for (std::size_t e = 0; e < dim_; ++e) y.at(e, col) = row[e];
    }
    if (ctx.record) {
      ids_.assign(ids.begin(), ids.end());
      mask_ = mask;
    }
    return y;
  }

  void backward(const Frames<T>& gy) {
    for (std::size_t col = 0; col < ids_.size(); ++col) {
      if (!mask_[col]) continue;
      T* g = table.grad_data() + static_cast<std::size_t>(ids_[col]) * dim_;
      for (std::size_t e = 0; e < dim_; ++e) g[e] += gy.at(e, col);
    }
  }

  void collect(const std::string& prefix, ParamList<T>& out) { out.push_back({prefix + ".table", &table, true}); }

  Tensor<T> table;

 private:
  std::size_t vocab_ = 0;
  std::size_t dim_ = 0;
  std::vector<text::TokenId> ids_;
  std::vector<std::uint8_t> mask_;
};

/// Row-normalized Gaussian upsampling weights, row-major [frames x tokens].
/// Token i is centered at sum(d[<i]) + d[i]/2 with width max(d[i], 1)/2 and
/// frame t is sampled at t + 0.5. Zero-duration tokens get zero weight.
std::vector<double> gaussian_weights(std::span<const std::int32_t> durations);

/// Frame-level features as Gaussian mixtures of token embeddings.
template <typename T>
class GaussianUpsampler {
 public:
  /// Output layout has lengths sum(durations[b]).
  Frames<T> forward(const Frames<T>& tokens, const std::vector<text::DurationSeq>& durations, const ForwardContext& ctx) {
    const auto& tl = tokens.layout;
    cached_weights_.clear();
    if (durations.size() != tl.batch()) throw Error(Errc::LengthMismatch, "one duration sequence per batch item expected");
    std::vector<std::size_t> frames(tl.batch());
    std::vector<std::vector<double>> weights(tl.batch());
    for (std::size_t b = 0; b < tl.batch(); ++b) {
      if (durations[b].size() != tl.lengths[b]) {
        throw Error(Errc::LengthMismatch, "durations do not match token count",
                    {{"tokens", tl.lengths[b]}, {"durations", durations[b].size()}});
      }
      std::int64_t total = 0;
      for (auto d : durations[b]) total += d;
      if (total < 1) throw Error(Errc::EmptyExpansion, "durations sum to zero");
      frames[b] = static_cast<std::size_t>(total);
      weights[b] = gaussian_weights(durations[b]);
    }
    Frames<T> y(tokens.channels, Layout::of(frames));
    for (std::size_t b = 0; b < tl.batch(); ++b) {
      const auto n = static_cast<Eigen::Index>(tl.lengths[b]);
      const auto t = static_cast<Eigen::Index>(frames[b]);
      RowMatrix<T> w = Eigen::Map<const RowMatrix<double>>(weights[b].data(), t, n).template cast<T>();
      frame_block(y, b, t).noalias() = const_token_block(tokens, b) * w.transpose();
      if (ctx.record) cached_weights_.push_back(std::move(w));
    }
    if (ctx.record) token_layout_ = tl;
    return y;
  }

  Frames<T> backward(const Frames<T>& gy) {
    Frames<T> gx(gy.channels, token_layout_);
    for (std::size_t b = 0; b < token_layout_.batch(); ++b) {
      const auto& w = cached_weights_[b];
      auto gyb = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>(
          gy.data.data() + b * gy.layout.max_len, static_cast<Eigen::Index>(gy.channels), w.rows(),
          Eigen::OuterStride<>(static_cast<Eigen::Index>(gy.columns())));
      Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>(gx.data.data() + b * token_layout_.max_len,
                                                        static_cast<Eigen::Index>(gx.channels), w.cols(),
                                                        Eigen::OuterStride<>(static_cast<Eigen::Index>(gx.columns())))
          .noalias() = gyb * w;
    }
    return gx;
  }

 private:
  static auto const_token_block(const Frames<T>& x, std::size_t b) {
    return Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>(
        x.data.data() + b * x.layout.max_len, static_cast<Eigen::Index>(x.channels),
        static_cast<Eigen::Index>(x.layout.lengths[b]), Eigen::OuterStride<>(static_cast<Eigen::Index>(x.columns())));
  }
  static auto frame_block(Frames<T>& y, std::size_t b, Eigen::Index frames) {
    return Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>(y.data.data() + b * y.layout.max_len,
                                                             static_cast<Eigen::Index>(y.channels), frames,
                                                             Eigen::OuterStride<>(static_cast<Eigen::Index>(y.columns())));
  }

  Layout token_layout_;
  std::vector<RowMatrix<T>> cached_weights_;
};

}  // namespace talknet::nn
