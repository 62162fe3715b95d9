#include "talknet/models/config.hpp"

#include <cmath>

#include "talknet/error.hpp"

namespace talknet::models {

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Duration: return "duration";
    case ModelKind::Pitch: return "pitch";
    case ModelKind::Mel: return "mel";
  }
  return "duration";
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "duration") return ModelKind::Duration;
  if (name == "pitch") return ModelKind::Pitch;
  if (name == "mel") return ModelKind::Mel;
  throw Error(Errc::ConfigInvalid, "unknown model kind '" + name + "'");
}

namespace {

// QuartzNet-5x5 trunk shared by the duration and pitch predictors.
std::vector<BlockRow> quartznet_5x5_rows() {
  return {
      {"conv1", 3, 256, {3}, 0.1, false},
      {"B", 5, 256, {5, 7, 9, 11, 13}, 0.1, true},
      {"conv2", 1, 512, {1}, 0.1, false},
  };
}

}  // namespace

ModelConfig ModelConfig::duration() {
  ModelConfig c;
  c.kind = ModelKind::Duration;
  c.embed_dim = 64;
  c.rows = quartznet_5x5_rows();
  c.head_channels = 1;
  return c;
}

ModelConfig ModelConfig::duration_classifier() {
  auto c = duration();
  c.head_channels = 32;
  return c;
}

ModelConfig ModelConfig::pitch() {
  auto c = duration();
  c.kind = ModelKind::Pitch;
  return c;
}

ModelConfig ModelConfig::mel() {
  ModelConfig c;
  c.kind = ModelKind::Mel;
  c.embed_dim = 256;
  c.rows = {
      {"conv1", 3, 256, {3}, 0.1, false},
      {"B", 5, 256, {5, 7, 9, 13, 15, 17}, 0.1, true},
      {"B", 5, 512, {21, 23, 25}, 0.1, true},
      {"conv2", 1, 1024, {1}, 0.1, false},
  };
  c.head_channels = 80;
  return c;
}

ModelConfig ModelConfig::for_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::Duration: return duration();
    case ModelKind::Pitch: return pitch();
    case ModelKind::Mel: return mel();
  }
  return duration();
}

ModelConfig ModelConfig::scaled(double factor) const {
  auto c = *this;
  c.channel_scale = factor;
  return c;
}

std::size_t ModelConfig::width(std::size_t channels) const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(channels) * channel_scale)));
}

std::vector<nn::BlockSpec> ModelConfig::blocks() const {
  std::vector<nn::BlockSpec> out;
  std::size_t residual_index = 0;
  for (const auto& row : rows) {
    for (std::size_t k : row.kernels) {
      nn::BlockSpec s;
      s.name = row.residual ? row.name + std::to_string(++residual_index)
                            : (row.kernels.size() == 1 ? row.name : row.name + std::to_string(out.size() + 1));
      s.sub_blocks = row.sub_blocks;
      s.channels = width(row.channels);
      s.kernel = k;
      s.dropout = row.dropout;
      s.residual = row.residual;
      out.push_back(s);
    }
  }
  return out;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::ConfigInvalid, why); };
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (rows.empty()) fail("model needs at least one block row");
  if (!(channel_scale > 0.0)) fail("channel_scale must be positive");
  if (head_channels == 0) fail("head width must be positive");
  if (kind == ModelKind::Mel && head_channels != 80) fail("mel head must produce 80 channels");
  if (kind == ModelKind::Pitch && head_channels != 1) fail("pitch heads are scalar");
  if (kind == ModelKind::Mel && !(pitch_scale_hz > 0.0)) fail("pitch_scale_hz must be positive");
  for (const auto& r : rows) {
    if (r.sub_blocks == 0 || r.channels == 0 || r.kernels.empty()) fail("empty block row '" + r.name + "'");
    for (auto k : r.kernels) {
      if (k % 2 == 0) fail("kernel sizes must be odd in row '" + r.name + "'");
    }
    if (!(r.dropout >= 0.0 && r.dropout < 1.0)) fail("dropout must lie in [0, 1) in row '" + r.name + "'");
  }
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"name", r.name},
                         {"sub_blocks", r.sub_blocks},
                         {"channels", r.channels},
                         {"kernels", r.kernels},
                         {"dropout", r.dropout},
                         {"residual", r.residual}});
  }
  return {{"kind", kind_name(kind)},
          {"embed_dim", embed_dim},
          {"blocks", rows_json},
          {"head_channels", head_channels},
          {"channel_scale", channel_scale},
          {"pitch_scale_hz", pitch_scale_hz}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c = for_kind(kind_from_name(j.at("kind").get<std::string>()));
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.head_channels = j.value("head_channels", c.head_channels);
    c.channel_scale = j.value("channel_scale", c.channel_scale);
    c.pitch_scale_hz = j.value("pitch_scale_hz", c.pitch_scale_hz);
    if (j.contains("blocks")) {
      c.rows.clear();
      for (const auto& r : j.at("blocks")) {
        BlockRow row;
        row.name = r.at("name").get<std::string>();
        row.sub_blocks = r.at("sub_blocks").get<std::size_t>();
        row.channels = r.at("channels").get<std::size_t>();
        row.kernels = r.at("kernels").get<std::vector<std::size_t>>();
        row.dropout = r.value("dropout", 0.0);
        row.residual = r.value("residual", false);
        c.rows.push_back(row);
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("bad model config: ") + e.what());
  }
}

}  // namespace talknet::models
