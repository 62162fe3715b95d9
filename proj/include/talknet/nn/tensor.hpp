#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "talknet/error.hpp"

namespace talknet::nn {

/// Dense row-major parameter or buffer with an optional gradient.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, bool with_grad = true)
      : dims_(std::move(dims)), value_(element_count(dims_), T(0)) {
    if (with_grad) grad_.assign(value_.size(), T(0));
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t size() const { return value_.size(); }
  bool has_grad() const { return !grad_.empty(); }

  std::span<T> value() { return value_; }
  std::span<const T> value() const { return value_; }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  T* data() { return value_.data(); }
  const T* data() const { return value_.data(); }
  T* grad_data() { return grad_.data(); }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<T> value_;
  std::vector<T> grad_;
};

/// A named tensor owned by some layer. Buffers (batch-norm running stats)
/// are registered with trainable = false.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor = nullptr;
  bool trainable = true;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

/// Right-padded batch of variable-length sequences. Item b occupies columns
/// [b * max_len, b * max_len + lengths[b]).
struct Layout {
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;

  static Layout of(std::vector<std::size_t> lengths) {
    Layout l;
    l.lengths = std::move(lengths);
    for (auto n : l.lengths) l.max_len = std::max(l.max_len, n);
    return l;
  }

  std::size_t batch() const { return lengths.size(); }
  std::size_t columns() const { return lengths.size() * max_len; }
  std::size_t valid_count() const { return std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}); }
  bool valid(std::size_t col) const { return col % max_len < lengths[col / max_len]; }
  std::vector<std::uint8_t> mask() const {
    std::vector<std::uint8_t> m(columns(), 0);
    for (std::size_t b = 0; b < batch(); ++b) std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(b * max_len), lengths[b], 1);
    return m;
  }
  bool operator==(const Layout&) const = default;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Activations: channels x layout.columns(), row-major. Padded columns hold 0.
template <typename T>
struct Frames {
  std::size_t channels = 0;
  Layout layout;
  std::vector<T> data;

  Frames() = default;
  Frames(std::size_t c, Layout l) : channels(c), layout(std::move(l)), data(channels * layout.columns(), T(0)) {}

  std::size_t columns() const { return layout.columns(); }
  T& at(std::size_t c, std::size_t col) { return data[c * columns() + col]; }
  T at(std::size_t c, std::size_t col) const { return data[c * columns() + col]; }
  T* row(std::size_t c) { return data.data() + c * columns(); }
  const T* row(std::size_t c) const { return data.data() + c * columns(); }
  MatrixMap<T> matrix() { return {data.data(), static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(columns())}; }
  ConstMatrixMap<T> matrix() const {
    return {data.data(), static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(columns())};
  }
};

template <typename T>
void require_shape(const Frames<T>& x, std::size_t channels, const char* where) {
  if (x.channels != channels || x.data.size() != channels * x.columns()) {
    throw Error(Errc::ShapeMismatch, std::string(where) + ": expected " + std::to_string(channels) + " channels",
                {{"expected", channels}, {"got", x.channels}});
  }
}

/// Per-forward switches. `record` keeps the caches needed by backward();
/// `track_kinks` hashes ReLU activation patterns for gradient checking.
struct ForwardContext {
  bool training = false;
  bool record = false;
  bool track_kinks = false;
  std::mt19937_64* rng = nullptr;
  bool dropout = true;        // training-mode dropout switch
  double bn_momentum = 0.1;   // running-stat update weight for batch norm
};

inline std::uint64_t fnv_mix(std::uint64_t h, std::span<const std::uint8_t> bytes) {
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

inline constexpr std::uint64_t kFnvSeed = 1469598103934665603ULL;

}  // namespace talknet::nn
