#include "talknet/io/container.hpp"

#include <cstring>
#include <sstream>

#include "talknet/error.hpp"

namespace talknet::io {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'C', 'K'};

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(Errc::CorruptCheckpoint, "corrupt checkpoint: " + why);
}

}  // namespace

std::string encode_container(const Container& c) {
  nlohmann::json index;
  index["meta"] = c.meta;
  index["tensors"] = nlohmann::json::object();
  std::ostringstream blobs;
  std::size_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    index["tensors"][name] = {{"offset", offset}, {"shape", t.dims}};
    write_ten1(blobs, t);
    offset += ten1_encoded_size(t);
  }
  const std::string index_str = index.dump();
  const std::uint64_t len = index_str.size();
  std::string out(kMagic, 4);
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += index_str;
  out += blobs.str();
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) corrupt("bad magic");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 4, 8);
  if (len > bytes.size() - 12) corrupt("index length exceeds file size");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(bytes.substr(12, len));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("unparseable index: ") + e.what());
  }
  if (!index.contains("tensors") || !index["tensors"].is_object()) corrupt("index lacks tensors");
  const std::size_t base = 12 + len;
  Container c;
  c.meta = index.value("meta", nlohmann::json::object());
  for (const auto& [name, entry] : index["tensors"].items()) {
    const auto offset = entry.at("offset").get<std::size_t>();
    if (base + offset > bytes.size()) corrupt("offset of '" + name + "' past end of file");
    Ten1 t;
    try {
      std::size_t consumed = 0;
      t = parse_ten1(std::string_view(bytes).substr(base + offset), consumed);
    } catch (const Error&) {
      corrupt("tensor '" + name + "' truncated or malformed");
    }
    if (t.dims != entry.at("shape").get<std::vector<std::uint32_t>>()) corrupt("shape mismatch for '" + name + "'");
    c.tensors.emplace(name, std::move(t));
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  write_file(path, encode_container(c));
}

Container load_container(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::CheckpointMissing, "checkpoint not found: " + path.string(), {{"path", path.string()}});
  }
  return decode_container(read_file(path));
}

}  // namespace talknet::io
