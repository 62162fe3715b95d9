#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talknet/models/config.hpp"
#include "talknet/nn/optim.hpp"
#include "talknet/pipeline/dataset.hpp"

namespace talknet::pipeline {

struct TrainConfig {
  models::ModelKind kind = models::ModelKind::Duration;
  std::size_t batch_size = 256;
  std::int64_t epochs = 200;
  /// When positive, overrides epochs * batches-per-epoch.
  std::int64_t steps = 0;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  double warmup_frac = 0.02;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  double channel_scale = 0.5;
  /// Duration model only: 32-way classification head instead of regression.
  bool classifier = false;
  /// Validation / checkpoint interval in steps (the final step is always evaluated).
  std::int64_t eval_every = 50;

  /// Batch 256 for duration and pitch, 64 for mel.
  static TrainConfig defaults(models::ModelKind kind);
  /// Missing keys keep defaults(kind); unknown keys raise ConfigInvalid.
  static TrainConfig from_json(const nlohmann::json& j, models::ModelKind kind);
  nlohmann::json to_json() const;
  models::ModelConfig model_config() const;
  void validate() const;
};

struct StepRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

/// Task loss plus the task's headline metric: within-one duration accuracy,
/// voiced/unvoiced accuracy, or mel MSE.
struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
  std::string metric_name;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::int64_t best_step = 0;
  EvalResult best;
  EvalResult final_train;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

/// Adam + cosine schedule over shuffled batches. Writes the best checkpoint
/// (by validation loss, or training loss without a val split) to `out` and a
/// JSONL log next to it (<out>.metrics.jsonl). On NonFinite gradients the
/// last good parameters stay on disk and the error propagates.
TrainResult train_model(const TrainConfig& cfg, const PreparedDataset& data, const std::filesystem::path& out,
                        std::ostream* progress = nullptr);

/// Eval-mode loss and metric of a saved checkpoint over utterances of `split`
/// ("" = all).
EvalResult evaluate_checkpoint(const std::filesystem::path& ckpt, const PreparedDataset& data,
                               const std::string& split = "");

}  // namespace talknet::pipeline
