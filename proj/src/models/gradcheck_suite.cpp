#include "talknet/models/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "talknet/models/losses.hpp"
#include "talknet/models/networks.hpp"
#include "talknet/nn/optim.hpp"

namespace talknet::models {

namespace {

using F64 = nn::Frames<double>;

F64 random_frames(std::size_t channels, const nn::Layout& layout, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  F64 f(channels, layout);
  const auto mask = layout.mask();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t col = 0; col < f.columns(); ++col) {
      if (mask[col]) f.at(c, col) = normal(rng);
    }
  }
  return f;
}

void randomize(nn::Tensor<double>& t, std::mt19937_64& rng, double mean = 0.0, double stddev = 0.5) {
  std::normal_distribution<double> normal(mean, stddev);
  for (auto& v : t.value()) v = normal(rng);
}

double dot(const F64& a, const F64& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

/// Checks loss = <forward(x), R> for a fixed random projection R.
struct ProjectedCheck {
  std::function<F64(const nn::ForwardContext&)> forward;
  std::function<void(const F64&)> backward;
  std::function<std::uint64_t()> kinks = [] { return std::uint64_t{0}; };
  bool training = false;
};

nn::GradcheckReport run_projected(const ProjectedCheck& op, std::vector<std::pair<std::string, nn::Tensor<double>*>> params,
                                  F64* input, F64* input_grad, std::uint64_t seed, double grad_scale = 1.0,
                                  std::size_t coords = 64) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  nn::ForwardContext rec{op.training, true, true, nullptr};
  const F64 y = op.forward(rec);
  const F64 proj = random_frames(y.channels, y.layout, rng);
  for (auto& [name, t] : params) t->zero_grad();
  op.backward(proj);

  std::vector<nn::GradProbe> probes;
  for (auto& [name, t] : params) {
    std::vector<double> g(t->grad().begin(), t->grad().end());
    for (auto& v : g) v *= grad_scale;
    probes.push_back({name, t->value(), std::move(g)});
  }
  if (input != nullptr) {
    std::vector<double> g = input_grad->data;
    for (auto& v : g) v *= grad_scale;
    probes.push_back({"input", input->data, std::move(g)});
  }
  nn::ForwardContext eval{op.training, false, true, nullptr};
  auto evaluate = [&]() { return nn::Evaluation{dot(op.forward(eval), proj), op.kinks()}; };
  nn::GradcheckOptions opts;
  opts.seed = seed;
  opts.max_coords_per_probe = coords;
  return nn::finite_diff_gradcheck(evaluate, probes, opts);
}

/// Shifts inputs away from zero so the first ReLU sees no near-kink values.
void push_from_zero(F64& x) {
  for (auto& v : x.data) {
    if (v != 0.0 && std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  }
}

nn::Layout two_item_layout() { return nn::Layout::of({5, 3}); }

GradcheckCase depthwise_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::DepthwiseConv1d<double> dw(3, 5);
  randomize(dw.weight, rng);
  F64 x = random_frames(3, two_item_layout(), rng);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return dw.forward(x, c); },
                    [&](const F64& g) { gx = dw.backward(g); }};
  return {"depthwise_conv", run_projected(op, {{"weight", &dw.weight}}, &x, &gx, seed)};
}

GradcheckCase linear_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Pointwise<double> pw(4, 3, true);
  randomize(pw.weight, rng);
  randomize(pw.bias, rng);
  F64 x = random_frames(4, two_item_layout(), rng);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return pw.forward(x, c); },
                    [&](const F64& g) { gx = pw.backward(g); }};
  return {"linear", run_projected(op, {{"weight", &pw.weight}, {"bias", &pw.bias}}, &x, &gx, seed), 1e-6};
}

GradcheckCase batchnorm_case(std::uint64_t seed, bool training) {
  std::mt19937_64 rng(seed);
  nn::BatchNorm1d<double> bn(3);
  randomize(bn.gamma, rng, 1.0, 0.3);
  randomize(bn.beta, rng);
  randomize(bn.running_mean, rng);
  for (auto& v : bn.running_var.value()) v = 0.5 + std::abs(v) + 0.3;
  F64 x = random_frames(3, two_item_layout(), rng);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return bn.forward(x, c); },
                    [&](const F64& g) { gx = bn.backward(g); }, [] { return std::uint64_t{0}; }, training};
  return {training ? "batchnorm_train" : "batchnorm_eval",
          run_projected(op, {{"gamma", &bn.gamma}, {"beta", &bn.beta}}, &x, &gx, seed)};
}

GradcheckCase relu_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ReluDropout<double> act(0.0);
  F64 x = random_frames(3, two_item_layout(), rng);
  push_from_zero(x);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return act.forward(x, c); },
                    [&](const F64& g) { gx = act.backward(g); }, [&] { return act.kink_hash(); }};
  return {"relu", run_projected(op, {}, &x, &gx, seed)};
}

void randomize_subblock(nn::SubBlock<double>& s, std::mt19937_64& rng) {
  randomize(s.dw.weight, rng);
  randomize(s.pw.weight, rng);
  randomize(s.bn.gamma, rng, 1.0, 0.3);
  randomize(s.bn.beta, rng, 0.0, 0.3);
  randomize(s.bn.running_mean, rng, 0.0, 0.3);
  for (auto& v : s.bn.running_var.value()) v = 0.5 + std::abs(v);
}

std::vector<std::pair<std::string, nn::Tensor<double>*>> trainable(nn::ParamList<double> list) {
  std::vector<std::pair<std::string, nn::Tensor<double>*>> out;
  for (auto& p : list) {
    if (p.trainable) out.emplace_back(p.name, p.tensor);
  }
  return out;
}

GradcheckCase subblock_case(std::uint64_t seed, bool training, double grad_scale = 1.0) {
  std::mt19937_64 rng(seed);
  nn::SubBlock<double> sb(2, 3, 3, 0.0, true);
  randomize_subblock(sb, rng);
  F64 x = random_frames(2, nn::Layout::of({5}), rng);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return sb.forward(x, c); },
                    [&](const F64& g) { gx = sb.backward(g); }, [&] { return sb.kink_hash(); }, training};
  nn::ParamList<double> params;
  sb.collect("sub", params);
  return {training ? "subblock_train" : "subblock_eval", run_projected(op, trainable(params), &x, &gx, seed, grad_scale)};
}

GradcheckCase residual_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::BlockSpec spec{"B1", 2, 3, 3, 0.0, true};
  nn::Block<double> block(3, spec);
  for (auto& s : block.subs) randomize_subblock(s, rng);
  randomize(block.res_pw.weight, rng);
  randomize(block.res_bn.gamma, rng, 1.0, 0.3);
  F64 x = random_frames(3, nn::Layout::of({4, 3}), rng);
  F64 gx;
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return block.forward(x, c); },
                    [&](const F64& g) { gx = block.backward(g); }, [&] { return block.kink_hash(); }, true};
  nn::ParamList<double> params;
  block.collect("block", params);
  return {"residual_block", run_projected(op, trainable(params), &x, &gx, seed)};
}

GradcheckCase embedding_upsample_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Embedding<double> emb(6, 3);
  emb.init(rng);
  nn::GaussianUpsampler<double> up;
  const auto batch = TokenBatch::from({{{0, 2, 0, 5, 0}, true}, {{0, 1, 0}, true}});
  const std::vector<text::DurationSeq> durs = {{1, 3, 0, 2, 1}, {2, 1, 1}};
  ProjectedCheck op{[&](const nn::ForwardContext& c) { return up.forward(emb.forward(batch.ids, batch.layout, c), durs, c); },
                    [&](const F64& g) { emb.backward(up.backward(g)); }};
  return {"embedding_gaussian_upsample", run_projected(op, {{"table", &emb.table}}, nullptr, nullptr, seed)};
}

GradcheckCase loss_case(std::uint64_t seed, const std::string& which) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 7;
  std::vector<double> a(n * (which == "mel" ? 3 : 1));
  std::vector<double> b(a.size());
  for (auto& v : a) v = normal(rng);
  for (auto& v : b) v = normal(rng);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 1, 0};
  const std::vector<std::int32_t> durs = {0, 3, 1, 1, 7, 2, 0};
  const std::vector<float> f0 = {0.0f, 120.0f, 180.0f, 0.0f, 150.0f, 210.0f, 0.0f};
  const audio::PitchStats stats{160.0, 30.0};

  std::vector<double> ga(a.size(), 0.0);
  std::vector<double> gb(b.size(), 0.0);
  std::function<double()> f;
  if (which == "duration") {
    duration_loss(a, durs, mask, ga);
    f = [&] { return duration_loss(a, durs, mask); };
  } else if (which == "pitch") {
    pitch_loss(a, b, f0, stats, mask, ga, gb);
    f = [&] { return pitch_loss(a, b, f0, stats, mask).total(); };
  } else {
    mel_loss(a, b, 3, mask, ga);
    f = [&] { return mel_loss(a, b, 3, mask); };
  }
  std::vector<nn::GradProbe> probes = {{"pred", a, ga}};
  if (which == "pitch") probes.push_back({"body", b, gb});
  nn::GradcheckOptions opts;
  opts.seed = seed;
  return {which + "_loss", nn::finite_diff_gradcheck([&] { return nn::Evaluation{f(), 0}; }, probes, opts)};
}

ModelConfig no_dropout(ModelConfig cfg, double scale) {
  for (auto& r : cfg.rows) r.dropout = 0.0;
  return cfg.scaled(scale);
}

std::vector<nn::GradProbe> param_probes(nn::ParamList<double>& params) {
  std::vector<nn::GradProbe> probes;
  for (auto& p : params) {
    if (!p.trainable) continue;
    probes.push_back({p.name, p.tensor->value(), {p.tensor->grad().begin(), p.tensor->grad().end()}});
  }
  return probes;
}

constexpr std::size_t kVocab = 8;

std::vector<text::TokenSeq> tiny_tokens() { return {{{0, 3, 0, 5, 0, 3, 0}, true}, {{0, 7, 0, 2, 0}, true}}; }
std::vector<text::DurationSeq> tiny_durations() { return {{1, 3, 0, 2, 1, 2, 0}, {0, 4, 1, 2, 1}}; }

nn::GradcheckOptions model_opts(std::uint64_t seed) {
  nn::GradcheckOptions o;
  o.seed = seed;
  o.max_coords_per_probe = 6;
  return o;
}

GradcheckCase duration_model_case(std::uint64_t seed, double scale) {
  DurationModel<double> model(no_dropout(ModelConfig::duration(), scale), kVocab, seed);
  const auto batch = TokenBatch::from(tiny_tokens());
  const auto durs = tiny_durations();
  nn::ForwardContext rec{true, true, true, nullptr};
  auto params = model.params();
  nn::zero_grads(params);
  model.backward(duration_loss(model.forward(batch, rec), durs).grad);
  auto probes = param_probes(params);
  nn::ForwardContext eval{true, false, true, nullptr};
  auto evaluate = [&] { return nn::Evaluation{duration_loss(model.forward(batch, eval), durs).value, model.kink_hash()}; };
  return {"duration_model", nn::finite_diff_gradcheck(evaluate, probes, model_opts(seed)), 1e-3};
}

GradcheckCase pitch_model_case(std::uint64_t seed, double scale) {
  PitchModel<double> model(no_dropout(ModelConfig::pitch(), scale), kVocab, seed);
  const auto batch = TokenBatch::from(tiny_tokens());
  const auto durs = tiny_durations();
  const std::vector<audio::PitchTrack> f0 = {{0, 110, 115, 120, 0, 0, 140, 150, 0}, {0, 0, 200, 190, 180, 0, 0, 175}};
  const audio::PitchStats stats{150.0, 30.0};
  nn::ForwardContext rec{true, true, true, nullptr};
  auto params = model.params();
  nn::zero_grads(params);
  auto out = model.forward(batch, durs, rec);
  auto loss = pitch_loss(out.nonvoiced_logit, out.body, f0, stats);
  model.backward(loss.grad_nonvoiced, loss.grad_body);
  auto probes = param_probes(params);
  nn::ForwardContext eval{true, false, true, nullptr};
  auto evaluate = [&] {
    auto o = model.forward(batch, durs, eval);
    return nn::Evaluation{pitch_loss(o.nonvoiced_logit, o.body, f0, stats).parts.total(), model.kink_hash()};
  };
  return {"pitch_model", nn::finite_diff_gradcheck(evaluate, probes, model_opts(seed)), 1e-3};
}

GradcheckCase mel_model_case(std::uint64_t seed, double scale) {
  MelModel<double> model(no_dropout(ModelConfig::mel(), scale), kVocab, seed);
  const auto batch = TokenBatch::from(tiny_tokens());
  const auto durs = tiny_durations();
  const auto pitch = model.pitch_input({{0, 110, 115, 120, 0, 0, 140, 150, 0}, {0, 0, 200, 190, 180, 0, 0, 175}});
  std::mt19937_64 rng(seed + 1);
  const F64 target = random_frames(80, pitch.layout, rng);
  nn::ForwardContext rec{true, true, true, nullptr};
  auto params = model.params();
  nn::zero_grads(params);
  model.backward(mel_loss(model.forward(batch, durs, pitch, rec), target).grad);
  auto probes = param_probes(params);
  nn::ForwardContext eval{true, false, true, nullptr};
  auto evaluate = [&] {
    return nn::Evaluation{mel_loss(model.forward(batch, durs, pitch, eval), target).value, model.kink_hash()};
  };
  return {"mel_model", nn::finite_diff_gradcheck(evaluate, probes, model_opts(seed)), 1e-3};
}

}  // namespace

std::vector<GradcheckCase> layer_gradchecks(std::uint64_t seed) {
  return {
      depthwise_case(seed),
      linear_case(seed),
      batchnorm_case(seed, true),
      batchnorm_case(seed, false),
      relu_case(seed),
      subblock_case(seed, false),
      subblock_case(seed, true),
      residual_case(seed),
      embedding_upsample_case(seed),
      loss_case(seed, "duration"),
      loss_case(seed, "pitch"),
      loss_case(seed, "mel"),
  };
}

std::vector<GradcheckCase> model_gradchecks(std::uint64_t seed, double channel_scale) {
  return {duration_model_case(seed, channel_scale), pitch_model_case(seed, channel_scale),
          mel_model_case(seed, channel_scale)};
}

nn::GradcheckReport corrupted_subblock_gradcheck(std::uint64_t seed) { return subblock_case(seed, false, 2.0).report; }

}  // namespace talknet::models
