// talknet: command-line front end for data preparation, training, inference,
// alignment, gradient checks, benchmarking and fixture generation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "talknet/align/records.hpp"
#include "talknet/align/viterbi.hpp"
#include "talknet/error.hpp"
#include "talknet/io/ten1.hpp"
#include "talknet/models/gradcheck_suite.hpp"
#include "talknet/pipeline/bench.hpp"
#include "talknet/pipeline/dataset.hpp"
#include "talknet/pipeline/fixtures.hpp"
#include "talknet/pipeline/inference.hpp"
#include "talknet/pipeline/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace talknet;

namespace {

void print(const json& j) { std::cout << j.dump() << std::endl; }

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(io::read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

/// Default benchmark texts: 4x length range over the given vocabulary's letters.
std::vector<std::string> bench_texts() {
  const std::string base = "the cat sat on a good book and said hello there to all the big red dogs ";
  std::vector<std::string> texts;
  for (std::size_t len : {20u, 30u, 40u, 50u, 60u, 70u, 80u}) {
    std::string t;
    while (t.size() < len) t += base;
    t = t.substr(0, len);
    while (!t.empty() && t.back() == ' ') t.pop_back();
    texts.push_back(t);
  }
  return texts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"talknet: convolutional non-autoregressive text-to-mel toolkit"};
  app.require_subcommand(1);

  std::string manifest, lattices, out, vocab_path, data, config, text, ckpt_dir, lattice, texts_file, kind_name;
  std::size_t workers = 0, batch = 1, repeats = 3;
  double durations_scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool skip_models = false;

  auto* prepare = app.add_subcommand("prepare", "extract features and alignment targets");
  prepare->add_option("--manifest", manifest, "JSONL manifest")->required();
  prepare->add_option("--lattices", lattices, "directory of <id>.ten CTC lattices")->required();
  prepare->add_option("--out", out, "output dataset directory")->required();
  prepare->add_option("--vocab", vocab_path, "vocabulary file (default: <lattices>/vocab.txt)");
  prepare->add_option("--workers", workers, "parallel workers (0 = all cores)");

  auto* train = app.add_subcommand("train", "train one of the three networks");
  train->add_option("kind", kind_name, "duration | pitch | mel")->required()->check(CLI::IsMember({"duration", "pitch", "mel"}));
  train->add_option("--data", data, "prepared dataset directory")->required();
  train->add_option("--config", config, "training config JSON");
  train->add_option("--out", out, "checkpoint path")->required();

  auto* infer = app.add_subcommand("infer", "synthesize a mel-spectrogram");
  infer->add_option("--text", text, "input text")->required();
  infer->add_option("--ckpt-dir", ckpt_dir, "directory with duration/pitch/mel checkpoints")->required();
  infer->add_option("--out", out, "output TEN1 file [80 x T]")->required();
  infer->add_option("--durations-scale", durations_scale, "multiply predicted durations")->check(CLI::PositiveNumber);

  auto* align_cmd = app.add_subcommand("align", "Viterbi-align a lattice against text");
  align_cmd->add_option("--lattice", lattice, "TEN1 lattice [T x V]")->required();
  align_cmd->add_option("--text", text, "transcript")->required();
  align_cmd->add_option("--vocab", vocab_path, "vocabulary file")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every layer and model");
  gradcheck->add_option("--seeds", seeds, "seeds to run");
  gradcheck->add_flag("--layers-only", skip_models, "skip the assembled models");

  auto* bench = app.add_subcommand("bench", "measure inference real-time factor");
  bench->add_option("--ckpt-dir", ckpt_dir, "checkpoint directory")->required();
  bench->add_option("--batch", batch, "texts per forward pass")->check(CLI::PositiveNumber);
  bench->add_option("--texts", texts_file, "file with one text per line");
  bench->add_option("--repeats", repeats, "timed runs per batch (fastest kept)")->check(CLI::PositiveNumber);

  auto* fixtures = app.add_subcommand("fixtures", "generate the synthetic corpus");
  fixtures->add_option("--out", out, "output directory")->required();
  fixtures->add_option("--seed", seed, "F0 contour seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "UsageError"}, {"message", e.what()}, {"details", json::object()}}.dump() << std::endl;
    return 2;
  }

  try {
    if (*prepare) {
      pipeline::PrepareOptions opts;
      if (!vocab_path.empty()) opts.vocab = vocab_path;
      opts.workers = workers;
      const auto report = pipeline::prepare_training_set(manifest, lattices, out, opts);
      json skipped = json::array();
      for (const auto& [id, reason] : report.skipped) skipped.push_back({{"id", id}, {"reason", reason}});
      print({{"prepared", report.prepared.size()}, {"skipped", skipped}, {"out", out}});
    } else if (*train) {
      const auto kind = models::kind_from_name(kind_name);
      auto cfg = config.empty() ? pipeline::TrainConfig::defaults(kind)
                                : pipeline::TrainConfig::from_json(json::parse(io::read_file(config)), kind);
      const auto dataset = pipeline::PreparedDataset::load(data);
      const auto result = pipeline::train_model(cfg, dataset, out, &std::clog);
      print({{"checkpoint", result.checkpoint.string()},
             {"metrics", result.metrics.string()},
             {"steps", result.steps.size()},
             {"best_step", result.best_step},
             {"best_loss", result.best.loss},
             {"final_train", {{"loss", result.final_train.loss}, {result.final_train.metric_name, result.final_train.metric}}}});
    } else if (*infer) {
      pipeline::Synthesizer synth(ckpt_dir);
      const auto pred = synth.predict_durations(text, durations_scale);
      const auto mel = synth.synthesize_mel(text, durations_scale);
      io::save_ten1(out, io::Ten1{{static_cast<std::uint32_t>(mel.bins), static_cast<std::uint32_t>(mel.frames)}, mel.values});
      print({{"out", out}, {"frames", mel.frames}, {"bins", mel.bins}, {"durations", pred.durations}});
    } else if (*align_cmd) {
      const auto vocab = text::Vocab::load(vocab_path);
      const auto lat = align::LogProbLattice::from_ten1(io::load_ten1(lattice));
      const auto target = text::insert_blanks(text::tokenize(text, vocab));
      const auto result = align::viterbi_align(lat, target);
      std::cout << align::record_to_jsonl(align::alignment_to_record(result, target, fs::path(lattice).stem().string()))
                << std::endl;
    } else if (*gradcheck) {
      bool ok = true;
      auto emit = [&](const models::GradcheckCase& c, std::uint64_t s) {
        ok = ok && c.passed();
        print({{"case", c.name},
               {"seed", s},
               {"max_rel_error", c.report.max_rel_error},
               {"tolerance", c.tolerance},
               {"checked", c.report.checked},
               {"skipped", c.report.skipped},
               {"worst", c.report.worst},
               {"pass", c.passed()}});
      };
      for (auto s : seeds) {
        for (const auto& c : models::layer_gradchecks(s)) emit(c, s);
        if (!skip_models) {
          for (const auto& c : models::model_gradchecks(s)) emit(c, s);
        }
      }
      return ok ? 0 : 1;
    } else if (*bench) {
      pipeline::Synthesizer synth(ckpt_dir);
      const auto texts = texts_file.empty() ? bench_texts() : read_lines(texts_file);
      print(pipeline::benchmark_rtf(synth, texts, batch, repeats).to_json());
    } else if (*fixtures) {
      const auto utts = pipeline::generate_fixtures(out, seed);
      print({{"utterances", utts.size()},
             {"manifest", (fs::path(out) / "manifest.jsonl").string()},
             {"lattices", (fs::path(out) / "lattices").string()}});
    }
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << std::endl;
    return 1;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "ParseError"}, {"message", e.what()}, {"details", json::object()}}.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}, {"details", json::object()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
