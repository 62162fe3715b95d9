#include "talknet/pipeline/bench.hpp"

#include <chrono>
#include <limits>

#include "talknet/error.hpp"

namespace talknet::pipeline {

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(Errc::ShapeMismatch, "line fit needs two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& t : timings) per.push_back({{"texts", t.texts}, {"chars", t.chars}, {"frames", t.frames}, {"wall_ms", t.wall_ms}});
  return {{"batch", batch},
          {"frames", frames},
          {"wall_ms", wall_ms},
          {"rtf", rtf},
          {"timings", per},
          {"fit", {{"slope_ms_per_frame", fit.slope}, {"intercept_ms", fit.intercept}, {"r2", fit.r2}}}};
}

BenchReport benchmark_rtf(Synthesizer& synth, const std::vector<std::string>& texts, std::size_t batch, std::size_t repeats) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "benchmark needs at least one text");
  if (batch == 0 || repeats == 0) throw Error(Errc::ConfigInvalid, "batch and repeats must be positive");
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.batch = batch;
  synth.synthesize_batch({texts.front()});  // warm-up
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::vector<std::string> group(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                         texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), start + batch)));
    BatchTiming timing;
    timing.texts = group.size();
    for (const auto& t : group) timing.chars += t.size();
    timing.wall_ms = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto t0 = clock::now();
      const auto mels = synth.synthesize_batch(group);
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      timing.wall_ms = std::min(timing.wall_ms, ms);
      timing.frames = 0;
      for (const auto& m : mels) timing.frames += static_cast<std::size_t>(m.frames);
    }
    report.frames += timing.frames;
    report.wall_ms += timing.wall_ms;
    report.timings.push_back(timing);
  }
  report.rtf = (static_cast<double>(report.frames) * 0.0125) / (report.wall_ms / 1000.0);
  if (report.timings.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& t : report.timings) {
      x.push_back(static_cast<double>(t.frames));
      y.push_back(t.wall_ms);
    }
    report.fit = fit_line(x, y);
  }
  return report;
}

}  // namespace talknet::pipeline
