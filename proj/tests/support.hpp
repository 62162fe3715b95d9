#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <doctest.h>

#include "talknet/error.hpp"

namespace testing {

/// Runs `f`, requires it to throw talknet::Error with `code`, returns it.
template <typename F>
talknet::Error expect_error(F&& f, talknet::Errc code) {
  try {
    f();
  } catch (const talknet::Error& e) {
    CHECK_MESSAGE(e.code() == code, "got " << talknet::errc_name(e.code()) << " expected " << talknet::errc_name(code));
    return e;
  }
  FAIL("expected " << talknet::errc_name(code));
  return talknet::Error(code, "unreachable");
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("talknet_" + tag + "_" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
