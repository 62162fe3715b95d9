#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talknet/pipeline/inference.hpp"

namespace talknet::pipeline {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct BatchTiming {
  std::size_t texts = 0;
  std::size_t chars = 0;
  std::size_t frames = 0;
  double wall_ms = 0.0;
};

struct BenchReport {
  std::size_t batch = 1;
  std::size_t frames = 0;
  double wall_ms = 0.0;
  /// Seconds of audio implied by the frames (12.5 ms each) per wall second.
  double rtf = 0.0;
  std::vector<BatchTiming> timings;
  LinearFit fit;  // wall_ms against frames over the timed batches

  nlohmann::json to_json() const;
};

/// Times synthesize_batch over `texts` in groups of `batch`; each group is run
/// `repeats` times and its fastest run kept.
BenchReport benchmark_rtf(Synthesizer& synth, const std::vector<std::string>& texts, std::size_t batch,
                          std::size_t repeats = 3);

}  // namespace talknet::pipeline
