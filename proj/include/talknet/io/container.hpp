#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "talknet/io/ten1.hpp"

namespace talknet::io {

/// Named TEN1 tensors plus free-form JSON metadata in one file:
///   "TNCK" | u64 LE index length | JSON index | concatenated TEN1 blobs
/// The index is {"meta": {...}, "tensors": {name: {"offset": o, "shape": [...]}}}
/// with offsets relative to the first blob.
struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Ten1> tensors;
};

std::string encode_container(const Container& c);
/// Throws CorruptCheckpoint on any index/offset/shape inconsistency.
Container decode_container(const std::string& bytes);

void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

}  // namespace talknet::io
