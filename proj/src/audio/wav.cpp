#include "talknet/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "talknet/error.hpp"
#include "talknet/io/ten1.hpp"

namespace talknet::audio {

namespace {

template <typename U>
U read_le(const std::string& b, std::size_t pos) {
  U v{};
  std::memcpy(&v, b.data() + pos, sizeof(U));
  return v;
}

template <typename U>
void append_le(std::string& b, U v) {
  b.append(reinterpret_cast<const char*>(&v), sizeof(U));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string b = io::read_file(path);
  auto fail = [&](const std::string& why) -> Error {
    return Error(Errc::ParseError, path.string() + ": " + why, {{"path", path.string()}});
  };
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) throw fail("not a RIFF/WAVE file");

  std::size_t pos = 12;
  int channels = 0;
  int bits = 0;
  int format = 0;
  Waveform w;
  bool have_fmt = false;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw fail("chunk '" + id + "' overruns file");
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = read_le<std::uint16_t>(b, body);
      channels = read_le<std::uint16_t>(b, body + 2);
      w.sample_rate = static_cast<int>(read_le<std::uint32_t>(b, body + 4));
      bits = read_le<std::uint16_t>(b, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (format != 1 || channels != 1 || bits != 16) throw fail("only 16-bit mono PCM is supported");
      const std::size_t n = size / 2;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = static_cast<float>(read_le<std::int16_t>(b, body + 2 * i)) / 32768.0f;
      }
      return w;
    }
    pos = body + size + (size & 1U);
  }
  throw fail("no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::string b;
  b.reserve(44 + 2 * n);
  b += "RIFF";
  append_le<std::uint32_t>(b, 36 + 2 * n);
  b += "WAVEfmt ";
  append_le<std::uint32_t>(b, 16);
  append_le<std::uint16_t>(b, 1);
  append_le<std::uint16_t>(b, 1);
  append_le<std::uint32_t>(b, static_cast<std::uint32_t>(wave.sample_rate));
  append_le<std::uint32_t>(b, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  append_le<std::uint16_t>(b, 2);
  append_le<std::uint16_t>(b, 16);
  b += "data";
  append_le<std::uint32_t>(b, 2 * n);
  for (float s : wave.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    append_le<std::int16_t>(b, static_cast<std::int16_t>(std::lround(std::min(c * 32768.0f, 32767.0f))));
  }
  io::write_file(path, b);
}

}  // namespace talknet::audio
