#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "talknet/audio/features.hpp"
#include "talknet/nn/tensor.hpp"
#include "talknet/text/tokens.hpp"

namespace talknet::models {

/// Loss value with d(loss)/d(prediction), laid out like the prediction.
template <typename T>
struct LossResult {
  double value = 0.0;
  nn::Frames<T> grad;
};

/// Regression target for a duration: ln(1 + d).
inline double log_duration_target(std::int32_t d) { return std::log1p(static_cast<double>(d)); }

/// Mean over unmasked tokens of (pred - ln(1 + d))^2. `grad` (optional,
/// same length as pred) receives the derivative.
double duration_loss(std::span<const double> pred_logdur, std::span<const std::int32_t> durations,
                     std::span<const std::uint8_t> mask, std::span<double> grad = {});

/// max(round(d * scale), floor) per token, floor 1 at graphemes and 0 at
/// blanks. Integer scales multiply the frame count exactly.
text::DurationSeq scale_durations(const text::DurationSeq& durations, const text::TokenSeq& tokens, double scale = 1.0);

/// Decodes log-durations as round(exp(y) - 1), then applies scale_durations().
text::DurationSeq decode_log_durations(std::span<const double> pred_logdur, const text::TokenSeq& tokens,
                                       double scale = 1.0);

/// Classifier variant: argmax over class logits [classes x tokens], then
/// scale_durations().
text::DurationSeq decode_duration_classes(std::span<const double> logits, std::size_t classes,
                                          const text::TokenSeq& tokens, double scale = 1.0);

/// BCE(sigmoid(logit), [f0 == 0]) averaged over unmasked frames plus MSE of
/// body against (f0 - mu) / sigma averaged over voiced frames only (0 when
/// nothing is voiced).
struct PitchLossParts {
  double bce = 0.0;
  double mse = 0.0;
  double total() const { return bce + mse; }
};

PitchLossParts pitch_loss(std::span<const double> nonvoiced_logit, std::span<const double> body,
                          std::span<const float> f0, const audio::PitchStats& stats, std::span<const std::uint8_t> mask,
                          std::span<double> grad_logit = {}, std::span<double> grad_body = {});

/// Mean over unmasked (bin, frame) cells of the squared difference; pred and
/// truth are [bins x frames] row-major with `mask` over frames.
double mel_loss(std::span<const double> pred, std::span<const double> truth, std::size_t bins,
                std::span<const std::uint8_t> mask, std::span<double> grad = {});

// Batched wrappers over model activations.

template <typename T>
std::vector<double> to_double(std::span<const T> v) {
  return {v.begin(), v.end()};
}

template <typename T>
LossResult<T> duration_loss(const nn::Frames<T>& pred, const std::vector<text::DurationSeq>& durations) {
  require_shape(pred, 1, "duration loss");
  const auto& l = pred.layout;
  std::vector<std::int32_t> targets(l.columns(), 0);
  for (std::size_t b = 0; b < l.batch(); ++b) {
    if (durations[b].size() != l.lengths[b]) throw Error(Errc::LengthMismatch, "durations do not match predictions");
    std::copy(durations[b].begin(), durations[b].end(), targets.begin() + static_cast<std::ptrdiff_t>(b * l.max_len));
  }
  const auto p = to_double<T>(pred.data);
  std::vector<double> g(p.size(), 0.0);
  LossResult<T> r;
  r.value = duration_loss(p, targets, l.mask(), g);
  r.grad = nn::Frames<T>(1, l);
  std::transform(g.begin(), g.end(), r.grad.data.begin(), [](double x) { return static_cast<T>(x); });
  return r;
}

/// Cross-entropy over duration classes (targets clipped to classes - 1).
template <typename T>
LossResult<T> duration_class_loss(const nn::Frames<T>& logits, const std::vector<text::DurationSeq>& durations) {
  const auto& l = logits.layout;
  const std::size_t classes = logits.channels;
  LossResult<T> r;
  r.grad = nn::Frames<T>(classes, l);
  const std::size_t n = l.valid_count();
  std::vector<double> z(classes);
  for (std::size_t b = 0; b < l.batch(); ++b) {
    if (durations[b].size() != l.lengths[b]) throw Error(Errc::LengthMismatch, "durations do not match predictions");
    for (std::size_t t = 0; t < l.lengths[b]; ++t) {
      const std::size_t col = b * l.max_len + t;
      const auto target = static_cast<std::size_t>(std::clamp<std::int32_t>(durations[b][t], 0, static_cast<std::int32_t>(classes) - 1));
      double peak = -1e300;
      for (std::size_t c = 0; c < classes; ++c) {
        z[c] = static_cast<double>(logits.at(c, col));
        peak = std::max(peak, z[c]);
      }
      double total = 0.0;
      for (double v : z) total += std::exp(v - peak);
      const double lse = peak + std::log(total);
      r.value += (lse - z[target]) / static_cast<double>(n);
      for (std::size_t c = 0; c < classes; ++c) {
        const double prob = std::exp(z[c] - lse);
        r.grad.at(c, col) = static_cast<T>((prob - (c == target ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
  }
  return r;
}

template <typename T>
struct PitchLossResult {
  PitchLossParts parts;
  nn::Frames<T> grad_nonvoiced;
  nn::Frames<T> grad_body;
};

template <typename T>
PitchLossResult<T> pitch_loss(const nn::Frames<T>& nonvoiced, const nn::Frames<T>& body,
                              const std::vector<audio::PitchTrack>& f0, const audio::PitchStats& stats) {
  const auto& l = nonvoiced.layout;
  if (body.layout != l || f0.size() != l.batch()) throw Error(Errc::LengthMismatch, "pitch heads/targets disagree");
  std::vector<float> targets(l.columns(), 0.0f);
  for (std::size_t b = 0; b < l.batch(); ++b) {
    if (f0[b].size() != l.lengths[b]) throw Error(Errc::LengthMismatch, "pitch track length does not match frames");
    std::copy(f0[b].begin(), f0[b].end(), targets.begin() + static_cast<std::ptrdiff_t>(b * l.max_len));
  }
  const auto nv = to_double<T>(nonvoiced.data);
  const auto bd = to_double<T>(body.data);
  std::vector<double> gnv(nv.size(), 0.0);
  std::vector<double> gbd(bd.size(), 0.0);
  PitchLossResult<T> r;
  r.parts = pitch_loss(nv, bd, targets, stats, l.mask(), gnv, gbd);
  r.grad_nonvoiced = nn::Frames<T>(1, l);
  r.grad_body = nn::Frames<T>(1, l);
  std::transform(gnv.begin(), gnv.end(), r.grad_nonvoiced.data.begin(), [](double x) { return static_cast<T>(x); });
  std::transform(gbd.begin(), gbd.end(), r.grad_body.data.begin(), [](double x) { return static_cast<T>(x); });
  return r;
}

/// `truth` is laid out like `pred` (see mel_frames()).
template <typename T>
LossResult<T> mel_loss(const nn::Frames<T>& pred, const nn::Frames<T>& truth) {
  if (pred.channels != truth.channels || pred.layout != truth.layout) {
    throw Error(Errc::ShapeMismatch, "mel prediction and target shapes differ");
  }
  const auto p = to_double<T>(pred.data);
  const auto t = to_double<T>(truth.data);
  std::vector<double> g(p.size(), 0.0);
  LossResult<T> r;
  r.value = mel_loss(p, t, pred.channels, pred.layout.mask(), g);
  r.grad = nn::Frames<T>(pred.channels, pred.layout);
  std::transform(g.begin(), g.end(), r.grad.data.begin(), [](double x) { return static_cast<T>(x); });
  return r;
}

/// Packs mel spectrograms into a padded [bins x columns] activation.
template <typename T>
nn::Frames<T> mel_frames(const std::vector<const audio::MelSpec*>& mels) {
  std::vector<std::size_t> lengths;
  for (const auto* m : mels) lengths.push_back(static_cast<std::size_t>(m->frames));
  const std::size_t bins = mels.empty() ? 0 : static_cast<std::size_t>(mels.front()->bins);
  nn::Frames<T> f(bins, nn::Layout::of(lengths));
  for (std::size_t b = 0; b < mels.size(); ++b) {
    for (std::size_t c = 0; c < bins; ++c) {
      for (int t = 0; t < mels[b]->frames; ++t) {
        f.at(c, b * f.layout.max_len + static_cast<std::size_t>(t)) = static_cast<T>(mels[b]->at(static_cast<int>(c), t));
      }
    }
  }
  return f;
}

}  // namespace talknet::models
