#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talknet/nn/layers.hpp"

namespace talknet::models {

enum class ModelKind { Duration, Pitch, Mel };

std::string kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);

/// One row of an architecture table. A row with several kernels expands into
/// one block per kernel.
struct BlockRow {
  std::string name;
  std::size_t sub_blocks = 1;
  std::size_t channels = 0;
  std::vector<std::size_t> kernels;
  double dropout = 0.0;
  bool residual = false;
};

struct ModelConfig {
  ModelKind kind = ModelKind::Duration;
  std::size_t embed_dim = 64;
  std::vector<BlockRow> rows;
  /// Output width of the final 1x1 convolution: 1 for log-duration
  /// regression, 32 for the duration classifier variant, 80 for mel.
  std::size_t head_channels = 1;
  /// Multiplies every hidden width (embedding and trunk), not the head.
  double channel_scale = 1.0;
  /// Mel model: pitch conditioning input is f0_hz / pitch_scale_hz.
  double pitch_scale_hz = 400.0;

  static ModelConfig duration();
  static ModelConfig duration_classifier();
  static ModelConfig pitch();
  static ModelConfig mel();
  static ModelConfig for_kind(ModelKind kind);

  ModelConfig scaled(double factor) const;

  std::size_t width(std::size_t channels) const;
  std::size_t scaled_embed_dim() const { return width(embed_dim); }
  /// Expanded, scaled block list; residual blocks are named B1, B2, ...
  std::vector<nn::BlockSpec> blocks() const;
  bool is_classifier() const { return kind == ModelKind::Duration && head_channels > 1; }

  /// Throws ConfigInvalid on structural problems (even kernels, empty rows...).
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

}  // namespace talknet::models
