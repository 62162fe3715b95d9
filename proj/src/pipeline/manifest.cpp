#include "talknet/pipeline/manifest.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "talknet/error.hpp"

namespace talknet::pipeline {

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path.string(), {{"path", path.string()}});
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.id = j.at("id").get<std::string>();
      e.audio_path = j.at("audio_path").get<std::string>();
      e.text = j.at("text").get<std::string>();
      if (j.contains("split")) e.split = j["split"].get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::ParseError, "manifest line " + std::to_string(lineno) + ": " + ex.what(), {{"line", lineno}});
    }
    if (e.id.empty() || !seen.insert(e.id).second) {
      throw Error(Errc::ParseError, "duplicate or empty id '" + e.id + "' in manifest", {{"line", lineno}, {"id", e.id}});
    }
    if (e.audio_path.is_relative()) e.audio_path = base / e.audio_path;
    out.push_back(std::move(e));
  }
  return out;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write manifest " + path.string());
  for (const auto& e : entries) {
    nlohmann::json j = {{"id", e.id}, {"audio_path", e.audio_path.generic_string()}, {"text", e.text}, {"split", e.split}};
    out << j.dump() << '\n';
  }
}

}  // namespace talknet::pipeline
