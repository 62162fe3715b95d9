#include "talknet/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "talknet/error.hpp"
#include "talknet/models/losses.hpp"
#include "talknet/models/networks.hpp"
#include "talknet/pipeline/checkpoint.hpp"

namespace talknet::pipeline {

namespace fs = std::filesystem;
using models::ModelKind;
using Batch = std::vector<const Utterance*>;

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.batch_size = kind == ModelKind::Mel ? 64 : 256;
  return c;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, ModelKind kind) {
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, "training config must be a JSON object");
  TrainConfig c = defaults(kind);
  static const std::set<std::string> known = {"kind",  "batch_size", "epochs", "steps",       "lr_max",       "lr_min",
                                              "warmup_frac", "weight_decay", "clip_norm", "beta1", "beta2", "eps",
                                              "seed",  "channel_scale", "classifier", "eval_every"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(Errc::ConfigInvalid, "unknown training config key '" + key + "'", {{"key", key}});
  }
  try {
    if (j.contains("kind") && models::kind_from_name(j["kind"].get<std::string>()) != kind) {
      throw Error(Errc::ConfigInvalid, "config kind does not match the requested model");
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.steps = j.value("steps", c.steps);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.adam.weight_decay = j.value("weight_decay", c.adam.weight_decay);
    c.adam.clip_norm = j.value("clip_norm", c.adam.clip_norm);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.seed = j.value("seed", c.seed);
    c.channel_scale = j.value("channel_scale", c.channel_scale);
    c.classifier = j.value("classifier", c.classifier);
    c.eval_every = j.value("eval_every", c.eval_every);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ConfigInvalid, std::string("training config: ") + ex.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"kind", models::kind_name(kind)}, {"batch_size", batch_size},   {"epochs", epochs},
          {"steps", steps},                  {"lr_max", lr_max},           {"lr_min", lr_min},
          {"warmup_frac", warmup_frac},      {"weight_decay", adam.weight_decay}, {"clip_norm", adam.clip_norm},
          {"beta1", adam.beta1},             {"beta2", adam.beta2},        {"eps", adam.eps},
          {"seed", seed},                    {"channel_scale", channel_scale}, {"classifier", classifier},
          {"eval_every", eval_every}};
}

models::ModelConfig TrainConfig::model_config() const {
  auto base = kind == ModelKind::Duration && classifier ? models::ModelConfig::duration_classifier()
                                                        : models::ModelConfig::for_kind(kind);
  return base.scaled(channel_scale);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(Errc::ConfigInvalid, "batch_size must be at least 1");
  if (steps <= 0 && epochs <= 0) throw Error(Errc::ConfigInvalid, "epochs or steps must be positive");
  if (!(lr_max > 0.0) || lr_min < 0.0 || lr_min > lr_max) throw Error(Errc::ConfigInvalid, "bad learning-rate range");
  if (warmup_frac < 0.0 || warmup_frac >= 1.0) throw Error(Errc::ConfigInvalid, "warmup_frac must lie in [0, 1)");
  if (!(channel_scale > 0.0)) throw Error(Errc::ConfigInvalid, "channel_scale must be positive");
  if (classifier && kind != ModelKind::Duration) throw Error(Errc::ConfigInvalid, "classifier applies to the duration model only");
  if (eval_every < 1) throw Error(Errc::ConfigInvalid, "eval_every must be at least 1");
}

namespace {

std::vector<text::TokenSeq> tokens_of(const Batch& b) {
  std::vector<text::TokenSeq> out;
  for (const auto* u : b) out.push_back(u->tokens);
  return out;
}

std::vector<text::DurationSeq> durations_of(const Batch& b) {
  std::vector<text::DurationSeq> out;
  for (const auto* u : b) out.push_back(u->durations);
  return out;
}

std::vector<audio::PitchTrack> f0_of(const Batch& b) {
  std::vector<audio::PitchTrack> out;
  for (const auto* u : b) out.push_back(u->f0);
  return out;
}

/// One trainable network together with its loss and metric.
class Task {
 public:
  virtual ~Task() = default;
  virtual nn::ParamList<float> params() = 0;
  /// Forward, loss and backward (gradients accumulate into params).
  virtual double train_batch(const Batch& b, const nn::ForwardContext& ctx) = 0;
  /// Eval-mode loss and metric; `loss` averages per-batch losses weighted by
  /// the batch's loss denominator.
  virtual EvalResult evaluate(const Batch& b) = 0;
  /// Forward pass whose only lasting effect is on batch-norm running stats.
  virtual void run_forward(const Batch& b, const nn::ForwardContext& ctx) = 0;
  /// Sets output biases to the training targets' marginal statistics.
  virtual void init_output_bias(const Batch& train) = 0;
};

class DurationTask : public Task {
 public:
  DurationTask(const models::ModelConfig& cfg, std::size_t vocab, std::uint64_t seed) : model_(cfg, vocab, seed) {}
  nn::ParamList<float> params() override { return model_.params(); }

  double train_batch(const Batch& b, const nn::ForwardContext& ctx) override {
    const auto y = model_.forward(models::TokenBatch::from(tokens_of(b)), ctx);
    auto loss = loss_of(y, durations_of(b));
    model_.backward(loss.grad);
    return loss.value;
  }

  void run_forward(const Batch& b, const nn::ForwardContext& ctx) override {
    model_.forward(models::TokenBatch::from(tokens_of(b)), ctx);
  }

  EvalResult evaluate(const Batch& b) override {
    const auto y = model_.forward(models::TokenBatch::from(tokens_of(b)), nn::ForwardContext{});
    const auto durs = durations_of(b);
    EvalResult r{loss_of(y, durs).value, 0.0, "within1_accuracy"};
    std::size_t hits = 0, total = 0;
    const auto& l = y.layout;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::size_t n = l.lengths[i];
      std::vector<double> item(y.channels * n);
      for (std::size_t c = 0; c < y.channels; ++c) {
        for (std::size_t t = 0; t < n; ++t) item[c * n + t] = y.at(c, i * l.max_len + t);
      }
      const auto pred = y.channels == 1 ? models::decode_log_durations(item, b[i]->tokens)
                                        : models::decode_duration_classes(item, y.channels, b[i]->tokens);
      for (std::size_t t = 0; t < n; ++t) hits += std::abs(pred[t] - durs[i][t]) <= 1 ? 1 : 0;
      total += n;
    }
    r.metric = static_cast<double>(hits) / static_cast<double>(total);
    return r;
  }

 private:
  models::LossResult<float> loss_of(const nn::Frames<float>& y, const std::vector<text::DurationSeq>& durs) {
    return model_.config().is_classifier() ? models::duration_class_loss(y, durs) : models::duration_loss(y, durs);
  }

 public:
  void init_output_bias(const Batch& train) override {
    auto bias = model_.head.bias.value();
    if (bias.size() == 1) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto* u : train) {
        for (auto d : u->durations) sum += std::log1p(static_cast<double>(d)), ++n;
      }
      if (n > 0) bias[0] = static_cast<float>(sum / static_cast<double>(n));
      return;
    }
    // Log class priors with add-one smoothing.
    std::vector<double> counts(bias.size(), 1.0);
    double n = static_cast<double>(bias.size());
    for (const auto* u : train) {
      for (auto d : u->durations) counts[std::min<std::size_t>(static_cast<std::size_t>(d), bias.size() - 1)] += 1.0, n += 1.0;
    }
    for (std::size_t c = 0; c < bias.size(); ++c) bias[c] = static_cast<float>(std::log(counts[c] / n));
  }

 private:
  models::DurationModel<float> model_;
};

class PitchTask : public Task {
 public:
  PitchTask(const models::ModelConfig& cfg, std::size_t vocab, std::uint64_t seed, audio::PitchStats stats)
      : model_(cfg, vocab, seed), stats_(stats) {}
  nn::ParamList<float> params() override { return model_.params(); }

  double train_batch(const Batch& b, const nn::ForwardContext& ctx) override {
    const auto out = model_.forward(models::TokenBatch::from(tokens_of(b)), durations_of(b), ctx);
    const auto loss = models::pitch_loss(out.nonvoiced_logit, out.body, f0_of(b), stats_);
    model_.backward(loss.grad_nonvoiced, loss.grad_body);
    return loss.parts.total();
  }

  void run_forward(const Batch& b, const nn::ForwardContext& ctx) override {
    model_.forward(models::TokenBatch::from(tokens_of(b)), durations_of(b), ctx);
  }

  EvalResult evaluate(const Batch& b) override {
    const auto out = model_.forward(models::TokenBatch::from(tokens_of(b)), durations_of(b), nn::ForwardContext{});
    const auto f0 = f0_of(b);
    EvalResult r{models::pitch_loss(out.nonvoiced_logit, out.body, f0, stats_).parts.total(), 0.0, "vuv_accuracy"};
    std::size_t hits = 0, total = 0;
    const auto& l = out.body.layout;
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t t = 0; t < l.lengths[i]; ++t) {
        const bool predicted_unvoiced = out.nonvoiced_logit.at(0, i * l.max_len + t) > 0.0f;
        hits += predicted_unvoiced == (f0[i][t] == 0.0f) ? 1 : 0;
        ++total;
      }
    }
    r.metric = static_cast<double>(hits) / static_cast<double>(total);
    return r;
  }

 private:
  models::PitchModel<float> model_;
  audio::PitchStats stats_;

 public:
  void init_output_bias(const Batch& train) override {
    double unvoiced = 1.0, total = 2.0;
    for (const auto* u : train) {
      for (float f : u->f0) unvoiced += f == 0.0f ? 1.0 : 0.0, total += 1.0;
    }
    model_.head_nonvoiced.bias.value()[0] = static_cast<float>(std::log(unvoiced / (total - unvoiced)));
  }
};

class MelTask : public Task {
 public:
  MelTask(const models::ModelConfig& cfg, std::size_t vocab, std::uint64_t seed) : model_(cfg, vocab, seed) {}
  nn::ParamList<float> params() override { return model_.params(); }

  double train_batch(const Batch& b, const nn::ForwardContext& ctx) override {
    const auto y = forward(b, ctx);
    const auto loss = models::mel_loss(y, target(b));
    model_.backward(loss.grad);
    return loss.value;
  }

  void run_forward(const Batch& b, const nn::ForwardContext& ctx) override { forward(b, ctx); }

  EvalResult evaluate(const Batch& b) override {
    const double mse = models::mel_loss(forward(b, nn::ForwardContext{}), target(b)).value;
    return {mse, mse, "mel_mse"};
  }

 private:
  nn::Frames<float> forward(const Batch& b, const nn::ForwardContext& ctx) {
    return model_.forward(models::TokenBatch::from(tokens_of(b)), durations_of(b), model_.pitch_input(f0_of(b)), ctx);
  }
  static nn::Frames<float> target(const Batch& b) {
    std::vector<const audio::MelSpec*> mels;
    for (const auto* u : b) mels.push_back(&u->mel);
    return models::mel_frames<float>(mels);
  }
  models::MelModel<float> model_;

 public:
  void init_output_bias(const Batch& train) override {
    auto bias = model_.head.bias.value();
    std::vector<double> sum(bias.size(), 0.0);
    double frames = 0.0;
    for (const auto* u : train) {
      const auto& m = u->mel;
      for (int c = 0; c < std::min(static_cast<int>(bias.size()), m.bins); ++c) {
        for (int t = 0; t < m.frames; ++t) sum[static_cast<std::size_t>(c)] += m.at(c, t);
      }
      frames += static_cast<double>(m.frames);
    }
    if (frames == 0.0) return;
    for (std::size_t c = 0; c < bias.size(); ++c) bias[c] = static_cast<float>(sum[c] / frames);
  }
};

std::unique_ptr<Task> make_task(const models::ModelConfig& cfg, std::size_t vocab, std::uint64_t seed,
                                const audio::PitchStats& stats) {
  switch (cfg.kind) {
    case ModelKind::Duration: return std::make_unique<DurationTask>(cfg, vocab, seed);
    case ModelKind::Pitch: return std::make_unique<PitchTask>(cfg, vocab, seed, stats);
    case ModelKind::Mel: return std::make_unique<MelTask>(cfg, vocab, seed);
  }
  throw Error(Errc::ConfigInvalid, "unknown model kind");
}

/// Evaluates in chunks of `batch` and combines results weighted by size.
EvalResult evaluate_all(Task& task, const Batch& utts, std::size_t batch) {
  EvalResult total;
  double weight = 0.0;
  for (std::size_t start = 0; start < utts.size(); start += batch) {
    const Batch chunk(utts.begin() + static_cast<std::ptrdiff_t>(start),
                      utts.begin() + static_cast<std::ptrdiff_t>(std::min(utts.size(), start + batch)));
    const auto r = task.evaluate(chunk);
    const double w = static_cast<double>(chunk.size());
    total.loss += r.loss * w;
    total.metric += r.metric * w;
    total.metric_name = r.metric_name;
    weight += w;
  }
  total.loss /= weight;
  total.metric /= weight;
  return total;
}

/// Replaces batch-norm running statistics with averages of dropout-free batch
/// statistics over `utts`. Running stats gathered under dropout overstate the
/// variance seen at inference, and the mismatch compounds with depth.
void recalibrate_batch_norm(Task& task, const Batch& utts, std::size_t batch) {
  nn::ForwardContext ctx;
  ctx.training = true;
  ctx.dropout = false;
  std::size_t chunk = 0;
  for (std::size_t start = 0; start < utts.size(); start += batch, ++chunk) {
    const Batch part(utts.begin() + static_cast<std::ptrdiff_t>(start),
                     utts.begin() + static_cast<std::ptrdiff_t>(std::min(utts.size(), start + batch)));
    ctx.bn_momentum = 1.0 / static_cast<double>(chunk + 1);
    task.run_forward(part, ctx);
  }
}

nlohmann::json eval_json(const EvalResult& r) { return {{"loss", r.loss}, {r.metric_name, r.metric}}; }

}  // namespace

TrainResult train_model(const TrainConfig& cfg, const PreparedDataset& data, const fs::path& out, std::ostream* progress) {
  cfg.validate();
  auto train_set = data.split("train");
  if (train_set.empty()) throw Error(Errc::EmptyDataset, "no training utterances");
  auto val_set = data.split("val");
  const bool has_val = !val_set.empty();
  if (!has_val) val_set = train_set;

  const auto model_cfg = cfg.model_config();
  auto task = make_task(model_cfg, data.vocab().size(), cfg.seed, data.stats());
  task->init_output_bias(train_set);
  auto params = task->params();
  nn::AdamState<float> adam;

  const std::size_t per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total = cfg.steps > 0 ? cfg.steps : cfg.epochs * static_cast<std::int64_t>(per_epoch);

  TrainResult result;
  result.checkpoint = out;
  result.metrics = out;
  result.metrics += ".metrics.jsonl";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream log(result.metrics, std::ios::binary);
  if (!log) throw Error(Errc::Io, "cannot write " + result.metrics.string());

  CheckpointMeta meta{model_cfg, data.vocab(), data.stats(), {}};
  bool saved = false;
  double best_loss = std::numeric_limits<double>::infinity();
  auto save = [&](std::int64_t step, const EvalResult& eval) {
    meta.extra = {{"kind", models::kind_name(cfg.kind)}, {"step", step}, {"train_config", cfg.to_json()},
                  {"eval", eval_json(eval)}};
    save_checkpoint(out, meta, params, &adam);
    saved = true;
  };

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(cfg.seed + 1);
  Batch order = train_set;
  std::size_t cursor = per_epoch;  // forces a shuffle before the first step
  std::int64_t step = 0;
  try {
    for (step = 1; step <= total; ++step) {
      if (cursor == per_epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      const std::size_t begin = cursor * cfg.batch_size;
      const Batch batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + cfg.batch_size)));
      ++cursor;

      nn::zero_grads(params);
      const double loss = task->train_batch(batch, nn::ForwardContext{true, true, false, &dropout_rng});
      if (!std::isfinite(loss)) throw Error(Errc::NonFinite, "training loss is not finite", {{"step", step}});
      const double lr = nn::cosine_warmup_lr(step, total, cfg.lr_max, cfg.lr_min, cfg.warmup_frac);
      const auto info = nn::adam_step(params, adam, lr, cfg.adam);
      result.steps.push_back({step, loss, lr, info.grad_norm});
      log << nlohmann::json{{"step", step}, {"loss", loss}, {"lr", lr}, {"grad_norm", info.grad_norm}}.dump() << '\n';

      if (step % cfg.eval_every == 0 || step == total) {
        recalibrate_batch_norm(*task, train_set, cfg.batch_size);
        const auto eval = evaluate_all(*task, val_set, cfg.batch_size);
        if (!std::isfinite(eval.loss)) throw Error(Errc::NonFinite, "evaluation loss is not finite", {{"step", step}});
        const bool improved = eval.loss < best_loss;
        if (improved) {
          best_loss = eval.loss;
          result.best = eval;
          result.best_step = step;
          save(step, eval);
        }
        log << nlohmann::json{{"step", step}, {"eval", eval_json(eval)}, {"split", has_val ? "val" : "train"},
                              {"best", improved}}.dump()
            << '\n';
        if (progress != nullptr) {
          *progress << models::kind_name(cfg.kind) << " step " << step << "/" << total << " loss " << loss << " eval "
                    << eval.loss << " " << eval.metric_name << " " << eval.metric << (improved ? " *" : "") << '\n';
        }
      }
    }
  } catch (const Error& e) {
    if (e.code() != Errc::NonFinite) throw;
    // adam_step rejects bad gradients before touching parameters, so the
    // current values are the last good ones.
    if (!saved) save(step - 1, EvalResult{std::nan(""), std::nan(""), "none"});
    log << nlohmann::json{{"step", step}, {"error", e.to_json()}}.dump() << '\n';
    throw;
  }
  result.final_train = evaluate_all(*task, train_set, cfg.batch_size);
  log << nlohmann::json{{"step", total}, {"final_train", eval_json(result.final_train)}}.dump() << '\n';
  return result;
}

EvalResult evaluate_checkpoint(const fs::path& ckpt, const PreparedDataset& data, const std::string& split) {
  const auto container = io::load_container(ckpt);
  const auto meta = checkpoint_meta(container);
  if (meta.vocab.hash() != data.vocab().hash()) {
    throw Error(Errc::VocabMismatch, "checkpoint vocabulary differs from the dataset's", {{"checkpoint", ckpt.string()}});
  }
  auto task = make_task(meta.config, meta.vocab.size(), 0, meta.stats);
  auto params = task->params();
  restore_params(container, params);
  const auto utts = data.split(split);
  if (utts.empty()) throw Error(Errc::EmptyDataset, "no utterances in split '" + split + "'");
  return evaluate_all(*task, utts, 64);
}

}  // namespace talknet::pipeline
