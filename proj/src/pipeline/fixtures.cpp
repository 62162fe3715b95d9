#include "talknet/pipeline/fixtures.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "talknet/align/viterbi.hpp"
#include "talknet/audio/wav.hpp"
#include "talknet/error.hpp"
#include "talknet/pipeline/manifest.hpp"

namespace talknet::pipeline {

namespace {

bool is_letter(const std::string& s) { return s.size() == 1 && s[0] >= 'a' && s[0] <= 'z'; }

/// Stable per-symbol number independent of vocabulary order.
unsigned symbol_code(const std::string& s) { return s.empty() ? 0u : static_cast<unsigned char>(s[0]); }

constexpr int kHarmonics = 12;

/// Harmonic amplitudes for one letter: two resonances placed by the letter.
std::array<double, kHarmonics> envelope(const std::string& letter) {
  const unsigned c = symbol_code(letter) - 'a';
  const double f1 = 1.5 + (c % 5);          // in harmonic numbers
  const double f2 = 5.0 + ((c * 7) % 6);
  std::array<double, kHarmonics> a{};
  for (int k = 0; k < kHarmonics; ++k) {
    const double h = k + 1;
    a[static_cast<std::size_t>(k)] =
        std::exp(-0.5 * std::pow((h - f1) / 1.2, 2)) + 0.6 * std::exp(-0.5 * std::pow((h - f2) / 1.5, 2)) + 0.05;
  }
  double total = 0;
  for (double v : a) total += v;
  for (double& v : a) v /= total;
  return a;
}

}  // namespace

const std::vector<std::string>& fixture_texts() {
  static const std::vector<std::string> texts = {
      "the cat sat.",   "hello there!",   "a good book",   "see me soon",    "big red dog",
      "all is well",    "keep it up!",    "who are you?",  "look at that",   "fun in the sun",
  };
  return texts;
}

text::DurationSeq scripted_durations(const text::TokenSeq& tokens, const text::Vocab& vocab) {
  const auto& ids = tokens.ids;
  text::DurationSeq d(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != text::kBlankId) {
      const auto& sym = vocab.symbol(ids[i]);
      d[i] = is_letter(sym) ? static_cast<std::int32_t>(2 + symbol_code(sym) % 4) : 3;
      continue;
    }
    if (i == 0 || i + 1 == ids.size()) {
      d[i] = 2;
    } else if (ids[i - 1] == ids[i + 1]) {
      d[i] = 1;
    }
  }
  return d;
}

audio::Waveform render_fixture(const text::TokenSeq& tokens, const text::DurationSeq& durations,
                               const text::Vocab& vocab, std::uint64_t seed, const audio::FeatureConfig& cfg) {
  std::vector<int> labels;  // token index per frame
  for (std::size_t i = 0; i < durations.size(); ++i) labels.insert(labels.end(), static_cast<std::size_t>(durations[i]), static_cast<int>(i));
  if (labels.empty()) throw Error(Errc::EmptyExpansion, "fixture has no frames");
  const int hop = cfg.hop_length();
  const std::size_t frames = labels.size();
  const std::size_t samples = (frames - 1) * static_cast<std::size_t>(hop);

  // Smooth F0 contour: a base pitch with a slow glide and one gentle wave.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double base = 110.0 + 90.0 * uni(rng);
  const double glide = (uni(rng) - 0.5) * 40.0;
  const double wave = 10.0 + 15.0 * uni(rng);
  const double cycles = 0.5 + uni(rng);

  audio::Waveform w{std::vector<float>(std::max<std::size_t>(samples, 1), 0.0f), cfg.sample_rate};
  const double sr = cfg.sample_rate;
  double phase = 0.0;
  const int ramp = static_cast<int>(0.005 * sr);
  for (std::size_t n = 0; n < samples; ++n) {
    const double pos = static_cast<double>(n) / static_cast<double>(std::max<std::size_t>(samples, 1));
    const double f0 = base + glide * pos + wave * std::sin(2.0 * std::numbers::pi * cycles * pos);
    phase += 2.0 * std::numbers::pi * f0 / sr;
    const auto frame = std::min<std::size_t>(static_cast<std::size_t>(std::lround(static_cast<double>(n) / hop)), frames - 1);
    const auto token = static_cast<std::size_t>(labels[frame]);
    const auto& sym = vocab.symbol(tokens.ids[token]);
    if (!is_letter(sym)) continue;
    // Fade in/out at the edges of each voiced run.
    double gain = 1.0;
    for (int side : {-1, 1}) {
      for (int k = 1; k <= ramp; ++k) {
        const auto m = static_cast<std::ptrdiff_t>(n) + side * k;
        if (m < 0 || m >= static_cast<std::ptrdiff_t>(samples)) break;
        const auto fm = std::min<std::size_t>(static_cast<std::size_t>(std::lround(static_cast<double>(m) / hop)), frames - 1);
        if (!is_letter(vocab.symbol(tokens.ids[static_cast<std::size_t>(labels[fm])]))) {
          gain = std::min(gain, static_cast<double>(k) / ramp);
          break;
        }
      }
    }
    const auto amp = envelope(sym);
    double s = 0.0;
    for (int k = 0; k < kHarmonics; ++k) {
      if ((k + 1) * f0 >= 0.45 * sr) break;
      s += amp[static_cast<std::size_t>(k)] * std::sin((k + 1) * phase);
    }
    w.samples[n] = static_cast<float>(0.5 * gain * s);
  }
  return w;
}

std::vector<FixtureUtterance> generate_fixtures(const std::filesystem::path& out, std::uint64_t seed) {
  const auto vocab = text::Vocab::from_corpus(fixture_texts());
  std::filesystem::create_directories(out / "wavs");
  std::filesystem::create_directories(out / "lattices");
  vocab.save(out / "vocab.txt");
  vocab.save(out / "lattices" / "vocab.txt");

  std::vector<FixtureUtterance> utts;
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < fixture_texts().size(); ++i) {
    FixtureUtterance u;
    u.id = "fx" + std::to_string(i / 10) + std::to_string(i % 10);
    u.text = fixture_texts()[i];
    u.tokens = text::insert_blanks(text::tokenize(u.text, vocab));
    u.durations = scripted_durations(u.tokens, vocab);
    const auto wave = render_fixture(u.tokens, u.durations, vocab, seed * 1000003ULL + i);
    audio::write_wav(out / "wavs" / (u.id + ".wav"), wave);
    const auto lattice = align::lattice_from_durations(u.tokens, u.durations, vocab.size());
    io::save_ten1(out / "lattices" / (u.id + ".ten"), lattice.to_ten1());
    manifest.push_back({u.id, std::filesystem::path("wavs") / (u.id + ".wav"), u.text, "train"});
    utts.push_back(std::move(u));
  }
  save_manifest(out / "manifest.jsonl", manifest);
  return utts;
}

}  // namespace talknet::pipeline
