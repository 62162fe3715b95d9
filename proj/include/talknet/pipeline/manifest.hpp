#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace talknet::pipeline {

struct ManifestEntry {
  std::string id;
  std::filesystem::path audio_path;  // resolved against the manifest's directory
  std::string text;
  std::string split = "train";
};

/// JSONL with {"id","audio_path","text"} and an optional "split". Throws
/// ParseError (with the line number) on malformed lines or duplicate ids.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace talknet::pipeline
