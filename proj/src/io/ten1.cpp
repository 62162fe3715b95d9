#include "talknet/io/ten1.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "talknet/error.hpp"

namespace talknet::io {

namespace {

static_assert(std::endian::native == std::endian::little, "TEN1 codec assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'T', 'E', 'N', '1'};

void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(Errc::ParseError, std::string("truncated TEN1 stream while reading ") + what);
  }
}

}  // namespace

std::size_t Ten1::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::size_t ten1_encoded_size(const Ten1& t) {
  return 4 + 2 + 4 * t.dims.size() + 4 * t.values.size();
}

void write_ten1(std::ostream& out, const Ten1& t) {
  if (t.element_count() != t.values.size()) {
    throw Error(Errc::ShapeMismatch, "TEN1 dims do not match payload length");
  }
  if (t.dims.size() > 255) throw Error(Errc::ShapeMismatch, "TEN1 supports at most 255 dims");
  out.write(kMagic.data(), 4);
  const std::uint8_t header[2] = {0, static_cast<std::uint8_t>(t.dims.size())};
  out.write(reinterpret_cast<const char*>(header), 2);
  out.write(reinterpret_cast<const char*>(t.dims.data()), static_cast<std::streamsize>(4 * t.dims.size()));
  out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(4 * t.values.size()));
  if (!out) throw Error(Errc::Io, "failed writing TEN1 stream");
}

Ten1 read_ten1(std::istream& in) {
  std::array<char, 4> magic{};
  read_exact(in, magic.data(), 4, "magic");
  if (magic != kMagic) throw Error(Errc::ParseError, "bad TEN1 magic");
  std::uint8_t header[2];
  read_exact(in, header, 2, "header");
  if (header[0] != 0) throw Error(Errc::ParseError, "unsupported TEN1 dtype", {{"dtype", header[0]}});
  Ten1 t;
  t.dims.resize(header[1]);
  read_exact(in, t.dims.data(), 4 * t.dims.size(), "dims");
  t.values.resize(t.element_count());
  read_exact(in, t.values.data(), 4 * t.values.size(), "payload");
  return t;
}

Ten1 parse_ten1(std::string_view bytes, std::size_t& consumed) {
  if (bytes.size() < 6 || bytes.substr(0, 4) != std::string_view(kMagic.data(), 4)) {
    throw Error(Errc::ParseError, "bad TEN1 magic");
  }
  if (bytes[4] != 0) throw Error(Errc::ParseError, "unsupported TEN1 dtype");
  Ten1 t;
  t.dims.resize(static_cast<std::uint8_t>(bytes[5]));
  std::size_t pos = 6;
  if (bytes.size() < pos + 4 * t.dims.size()) throw Error(Errc::ParseError, "truncated TEN1 dims");
  std::memcpy(t.dims.data(), bytes.data() + pos, 4 * t.dims.size());
  pos += 4 * t.dims.size();
  t.values.resize(t.element_count());
  if (bytes.size() < pos + 4 * t.values.size()) throw Error(Errc::ParseError, "truncated TEN1 payload");
  std::memcpy(t.values.data(), bytes.data() + pos, 4 * t.values.size());
  consumed = pos + 4 * t.values.size();
  return t;
}

void save_ten1(const std::filesystem::path& path, const Ten1& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_ten1(out, t);
}

Ten1 load_ten1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_ten1(in);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

}  // namespace talknet::io
