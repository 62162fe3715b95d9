#include "talknet/models/losses.hpp"

#include <algorithm>

namespace talknet::models {

namespace {

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(Errc::LengthMismatch, std::string(what) + ": length mismatch", {{"a", a}, {"b", b}});
}

std::int32_t floor_for(const text::TokenSeq& tokens, std::size_t i) { return tokens.ids[i] == text::kBlankId ? 0 : 1; }

constexpr double kMaxDecodedFrames = 10000.0;

}  // namespace

double duration_loss(std::span<const double> pred, std::span<const std::int32_t> durations,
                     std::span<const std::uint8_t> mask, std::span<double> grad) {
  check_sizes(pred.size(), durations.size(), "duration loss");
  check_sizes(pred.size(), mask.size(), "duration loss mask");
  std::fill(grad.begin(), grad.end(), 0.0);
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double diff = pred[i] - log_duration_target(durations[i]);
    sum += diff * diff;
    if (!grad.empty()) grad[i] = 2.0 * diff / static_cast<double>(n);
  }
  return sum / static_cast<double>(n);
}

text::DurationSeq scale_durations(const text::DurationSeq& durations, const text::TokenSeq& tokens, double scale) {
  check_sizes(durations.size(), tokens.ids.size(), "duration scaling");
  text::DurationSeq out(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const std::int32_t floor = floor_for(tokens, i);
    const double base = std::max(durations[i], floor);
    const double frames = std::min(base * scale, kMaxDecodedFrames);
    out[i] = std::max(static_cast<std::int32_t>(std::lround(frames)), floor);
  }
  return out;
}

text::DurationSeq decode_log_durations(std::span<const double> pred, const text::TokenSeq& tokens, double scale) {
  check_sizes(pred.size(), tokens.ids.size(), "duration decode");
  text::DurationSeq out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double frames = std::clamp(std::expm1(std::min(pred[i], 20.0)), 0.0, kMaxDecodedFrames);
    out[i] = static_cast<std::int32_t>(std::lround(frames));
  }
  return scale_durations(out, tokens, scale);
}

text::DurationSeq decode_duration_classes(std::span<const double> logits, std::size_t classes,
                                          const text::TokenSeq& tokens, double scale) {
  const std::size_t n = tokens.ids.size();
  check_sizes(logits.size(), classes * n, "duration class decode");
  text::DurationSeq out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[c * n + i] > logits[best * n + i]) best = c;
    }
    out[i] = static_cast<std::int32_t>(best);
  }
  return scale_durations(out, tokens, scale);
}

PitchLossParts pitch_loss(std::span<const double> logit, std::span<const double> body, std::span<const float> f0,
                          const audio::PitchStats& stats, std::span<const std::uint8_t> mask,
                          std::span<double> grad_logit, std::span<double> grad_body) {
  check_sizes(logit.size(), body.size(), "pitch loss");
  check_sizes(logit.size(), f0.size(), "pitch loss");
  check_sizes(logit.size(), mask.size(), "pitch loss mask");
  std::fill(grad_logit.begin(), grad_logit.end(), 0.0);
  std::fill(grad_body.begin(), grad_body.end(), 0.0);
  if (!(stats.sigma_f0 > 0.0)) throw Error(Errc::ConfigInvalid, "pitch sigma must be positive");
  std::size_t frames = 0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++frames;
    if (f0[i] > 0.0f) ++voiced;
  }
  PitchLossParts parts;
  if (frames == 0) return parts;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double x = logit[i];
    const double y = f0[i] > 0.0f ? 0.0 : 1.0;
    // -[y ln s(x) + (1-y) ln(1 - s(x))] = softplus(x) - y x
    const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    parts.bce += (softplus - y * x) / static_cast<double>(frames);
    if (!grad_logit.empty()) grad_logit[i] = (1.0 / (1.0 + std::exp(-x)) - y) / static_cast<double>(frames);
    if (voiced > 0 && f0[i] > 0.0f) {
      const double target = (f0[i] - stats.mu_f0) / stats.sigma_f0;
      const double diff = body[i] - target;
      parts.mse += diff * diff / static_cast<double>(voiced);
      if (!grad_body.empty()) grad_body[i] = 2.0 * diff / static_cast<double>(voiced);
    }
  }
  return parts;
}

double mel_loss(std::span<const double> pred, std::span<const double> truth, std::size_t bins,
                std::span<const std::uint8_t> mask, std::span<double> grad) {
  check_sizes(pred.size(), truth.size(), "mel loss");
  if (bins == 0 || pred.size() != bins * mask.size()) {
    throw Error(Errc::ShapeMismatch, "mel loss expects [bins x frames] inputs");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t cols = mask.size();
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  if (n == 0) return 0.0;
  const double denom = static_cast<double>(n * bins);
  double sum = 0.0;
  for (std::size_t c = 0; c < bins; ++c) {
    for (std::size_t t = 0; t < cols; ++t) {
      if (!mask[t]) continue;
      const double diff = pred[c * cols + t] - truth[c * cols + t];
      sum += diff * diff;
      if (!grad.empty()) grad[c * cols + t] = 2.0 * diff / denom;
    }
  }
  return sum / denom;
}

}  // namespace talknet::models
