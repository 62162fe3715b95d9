#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "talknet/audio/features.hpp"
#include "talknet/io/container.hpp"
#include "talknet/models/config.hpp"
#include "talknet/nn/optim.hpp"
#include "talknet/text/vocab.hpp"

namespace talknet::pipeline {

struct CheckpointMeta {
  models::ModelConfig config;
  text::Vocab vocab;
  audio::PitchStats stats;
  nlohmann::json extra = nlohmann::json::object();
};

/// Parameters, batch-norm buffers and (optionally) Adam moments in one
/// container; meta records the config, vocabulary (with hash) and F0 stats.
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, nn::ParamList<float>& params,
                     const nn::AdamState<float>* optimizer = nullptr);

/// Throws CorruptCheckpoint when the meta block is incomplete or the stored
/// vocabulary does not match its hash.
CheckpointMeta checkpoint_meta(const io::Container& c);

/// Copies stored tensors into `params` by name (CorruptCheckpoint when one is
/// missing or mis-shaped). Restores Adam moments when `optimizer` is given.
void restore_params(const io::Container& c, nn::ParamList<float>& params, nn::AdamState<float>* optimizer = nullptr);

}  // namespace talknet::pipeline
