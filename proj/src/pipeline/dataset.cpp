#include "talknet/pipeline/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "talknet/align/records.hpp"
#include "talknet/audio/wav.hpp"
#include "talknet/error.hpp"
#include "talknet/io/ten1.hpp"
#include "talknet/pipeline/manifest.hpp"

namespace talknet::pipeline {

namespace fs = std::filesystem;

namespace {

struct Prepared {
  bool ok = false;
  std::string skip_reason;
  text::TokenSeq tokens;
  align::AlignmentResult alignment;
  audio::MelSpec mel;
  audio::PitchTrack f0;
};

text::Vocab resolve_vocab(const std::vector<ManifestEntry>& entries, const fs::path& lattice_dir,
                          const PrepareOptions& options) {
  if (options.vocab) return text::Vocab::load(*options.vocab);
  if (fs::exists(lattice_dir / "vocab.txt")) return text::Vocab::load(lattice_dir / "vocab.txt");
  std::vector<std::string> texts;
  for (const auto& e : entries) texts.push_back(e.text);
  return text::Vocab::from_corpus(texts);
}

Prepared prepare_one(const ManifestEntry& e, const fs::path& lattice_dir, const text::Vocab& vocab,
                     const audio::FeatureConfig& features) {
  Prepared p;
  const auto lattice_path = lattice_dir / (e.id + ".ten");
  if (!fs::exists(lattice_path)) {
    throw Error(Errc::MissingLattice, "no lattice for utterance " + e.id, {{"id", e.id}, {"path", lattice_path.string()}});
  }
  const auto wave = audio::read_wav(e.audio_path);
  p.mel = audio::compute_log_mel(wave, features);
  p.f0 = audio::extract_f0(wave, features);
  const auto lattice = align::LogProbLattice::from_ten1(io::load_ten1(lattice_path));
  if (lattice.frames() != static_cast<std::size_t>(p.mel.frames)) {
    throw Error(Errc::FrameCountMismatch, "lattice frames differ from mel frames for " + e.id,
                {{"id", e.id}, {"lattice_frames", lattice.frames()}, {"mel_frames", p.mel.frames}});
  }
  if (lattice.vocab_size() != vocab.size()) {
    throw Error(Errc::VocabMismatch, "lattice width differs from the vocabulary for " + e.id,
                {{"id", e.id}, {"lattice_vocab", lattice.vocab_size()}, {"vocab", vocab.size()}});
  }
  p.tokens = text::insert_blanks(text::tokenize(e.text, vocab));
  try {
    p.alignment = align::viterbi_align(lattice, p.tokens);
  } catch (const Error& err) {
    if (err.code() != Errc::Infeasible) throw;
    p.skip_reason = std::string("infeasible alignment: ") + err.what();
    return p;
  }
  p.ok = true;
  return p;
}

void write_text(const fs::path& path, const std::string& s) { io::write_file(path, s); }

}  // namespace

PrepareReport prepare_training_set(const fs::path& manifest, const fs::path& lattice_dir, const fs::path& out_dir,
                                   const PrepareOptions& options) {
  const auto entries = load_manifest(manifest);
  const auto vocab = resolve_vocab(entries, lattice_dir, options);

  std::vector<Prepared> results(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
  const std::size_t workers = std::max<std::size_t>(
      1, std::min(entries.size(), options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < entries.size();) {
      try {
        results[i] = prepare_one(entries[i], lattice_dir, vocab, options.features);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  // Report the first failure in manifest order.
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  fs::create_directories(out_dir / "mel");
  fs::create_directories(out_dir / "f0");
  vocab.save(out_dir / "vocab.txt");
  PrepareReport report;
  std::vector<align::DurationRecord> records;
  std::vector<audio::PitchTrack> train_tracks, all_tracks;
  std::string index;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto& r = results[i];
    if (!r.ok) {
      std::clog << "skipping " << e.id << ": " << r.skip_reason << '\n';
      report.skipped.emplace_back(e.id, r.skip_reason);
      continue;
    }
    records.push_back(align::alignment_to_record(r.alignment, r.tokens, e.id));
    io::save_ten1(out_dir / "mel" / (e.id + ".ten"),
                  io::Ten1{{static_cast<std::uint32_t>(r.mel.bins), static_cast<std::uint32_t>(r.mel.frames)}, r.mel.values});
    io::save_ten1(out_dir / "f0" / (e.id + ".ten"), io::Ten1{{static_cast<std::uint32_t>(r.f0.size())}, r.f0});
    index += nlohmann::json{{"id", e.id}, {"text", e.text}, {"split", e.split}, {"frames", r.mel.frames}}.dump() + "\n";
    all_tracks.push_back(r.f0);
    if (e.split == "train") train_tracks.push_back(r.f0);
    report.prepared.push_back(e.id);
  }
  if (report.prepared.empty()) throw Error(Errc::EmptyDataset, "no utterance could be prepared");
  align::save_records(out_dir / "durations.jsonl", records);
  write_text(out_dir / "utterances.jsonl", index);
  const auto stats = audio::compute_f0_stats(train_tracks.empty() ? all_tracks : train_tracks);
  write_text(out_dir / "pitch_stats.json",
             nlohmann::json{{"mu_f0", stats.mu_f0}, {"sigma_f0", stats.sigma_f0}}.dump(2) + "\n");
  return report;
}

PreparedDataset::PreparedDataset(text::Vocab vocab, audio::PitchStats stats, std::vector<Utterance> utterances)
    : vocab_(std::move(vocab)), stats_(stats), utterances_(std::move(utterances)) {}

PreparedDataset PreparedDataset::load(const fs::path& dir) {
  if (!fs::exists(dir / "utterances.jsonl")) {
    throw Error(Errc::EmptyDataset, "no prepared dataset at " + dir.string(), {{"path", dir.string()}});
  }
  auto vocab = text::Vocab::load(dir / "vocab.txt");
  audio::PitchStats stats;
  try {
    const auto j = nlohmann::json::parse(io::read_file(dir / "pitch_stats.json"));
    stats.mu_f0 = j.at("mu_f0").get<double>();
    stats.sigma_f0 = j.at("sigma_f0").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseError, std::string("pitch_stats.json: ") + ex.what());
  }
  std::map<std::string, align::DurationRecord> records;
  for (auto& r : align::load_records(dir / "durations.jsonl")) records.emplace(r.id, std::move(r));

  std::vector<Utterance> utts;
  std::ifstream index(dir / "utterances.jsonl");
  std::string line;
  for (std::size_t lineno = 1; std::getline(index, line); ++lineno) {
    if (line.empty()) continue;
    Utterance u;
    try {
      const auto j = nlohmann::json::parse(line);
      u.id = j.at("id").get<std::string>();
      u.text = j.at("text").get<std::string>();
      u.split = j.value("split", "train");
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::ParseError, "utterances.jsonl line " + std::to_string(lineno) + ": " + ex.what(), {{"line", lineno}});
    }
    const auto rec = records.find(u.id);
    if (rec == records.end()) throw Error(Errc::ParseError, "no duration record for " + u.id, {{"id", u.id}});
    u.tokens = text::TokenSeq{rec->second.tokens, true};
    u.durations = rec->second.durations;
    const auto mel = io::load_ten1(dir / "mel" / (u.id + ".ten"));
    const auto f0 = io::load_ten1(dir / "f0" / (u.id + ".ten"));
    if (mel.dims.size() != 2 || f0.dims.size() != 1 || mel.dims[1] != f0.dims[0]) {
      throw Error(Errc::ShapeMismatch, "mel/f0 shapes disagree for " + u.id, {{"id", u.id}});
    }
    u.mel = audio::MelSpec{static_cast<int>(mel.dims[0]), static_cast<int>(mel.dims[1]), mel.values};
    u.f0 = f0.values;
    std::int64_t total = 0;
    for (auto d : u.durations) total += d;
    if (total != u.mel.frames) {
      throw Error(Errc::FrameCountMismatch, "durations do not cover the mel frames of " + u.id,
                  {{"id", u.id}, {"durations", total}, {"frames", u.mel.frames}});
    }
    utts.push_back(std::move(u));
  }
  if (utts.empty()) throw Error(Errc::EmptyDataset, "prepared dataset is empty", {{"path", dir.string()}});
  return PreparedDataset(std::move(vocab), stats, std::move(utts));
}

std::vector<const Utterance*> PreparedDataset::split(const std::string& name) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances_) {
    if (name.empty() || u.split == name) out.push_back(&u);
  }
  return out;
}

}  // namespace talknet::pipeline
