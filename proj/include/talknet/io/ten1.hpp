#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace talknet::io {

/// Row-major f32 array as stored in a TEN1 file:
///   "TEN1" | u8 dtype (0 = f32) | u8 ndim | ndim x u32 LE dims | f32 LE payload
struct Ten1 {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
  bool operator==(const Ten1&) const = default;
};

/// Encoded byte size of `t`.
std::size_t ten1_encoded_size(const Ten1& t);

void write_ten1(std::ostream& out, const Ten1& t);
Ten1 read_ten1(std::istream& in);
/// Parses one tensor from the front of `bytes`; `consumed` receives its size.
Ten1 parse_ten1(std::string_view bytes, std::size_t& consumed);

void save_ten1(const std::filesystem::path& path, const Ten1& t);
Ten1 load_ten1(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace talknet::io
