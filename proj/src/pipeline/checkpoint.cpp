#include "talknet/pipeline/checkpoint.hpp"

#include <algorithm>
#include <sstream>

#include "talknet/error.hpp"

namespace talknet::pipeline {

namespace {

io::Ten1 to_ten1(std::span<const float> values, const std::vector<std::size_t>& dims) {
  io::Ten1 t;
  for (auto d : dims) t.dims.push_back(static_cast<std::uint32_t>(d));
  t.values.assign(values.begin(), values.end());
  return t;
}

const io::Ten1& find_tensor(const io::Container& c, const std::string& name, std::size_t size) {
  const auto it = c.tensors.find(name);
  if (it == c.tensors.end()) throw Error(Errc::CorruptCheckpoint, "checkpoint lacks tensor " + name, {{"tensor", name}});
  if (it->second.values.size() != size) {
    throw Error(Errc::CorruptCheckpoint, "tensor " + name + " has the wrong size",
                {{"tensor", name}, {"expected", size}, {"got", it->second.values.size()}});
  }
  return it->second;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, nn::ParamList<float>& params,
                     const nn::AdamState<float>* optimizer) {
  io::Container c;
  std::ostringstream hash;
  hash << std::hex << meta.vocab.hash();
  c.meta = {{"format", 1},
            {"config", meta.config.to_json()},
            {"vocab", meta.vocab.symbols()},
            {"vocab_hash", hash.str()},
            {"pitch_stats", {{"mu_f0", meta.stats.mu_f0}, {"sigma_f0", meta.stats.sigma_f0}}},
            {"extra", meta.extra}};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    c.tensors[p.name] = to_ten1(p.tensor->value(), p.tensor->dims());
    if (optimizer != nullptr && p.trainable && i < optimizer->m.size()) {
      c.tensors["adam.m." + p.name] = to_ten1(optimizer->m[i], p.tensor->dims());
      c.tensors["adam.v." + p.name] = to_ten1(optimizer->v[i], p.tensor->dims());
    }
  }
  if (optimizer != nullptr) c.meta["adam_step"] = optimizer->step;
  // Write beside the target and rename so readers never see a partial file.
  auto tmp = path;
  tmp += ".tmp";
  io::save_container(tmp, c);
  std::filesystem::rename(tmp, path);
}

CheckpointMeta checkpoint_meta(const io::Container& c) {
  try {
    const auto& m = c.meta;
    auto symbols = m.at("vocab").get<std::vector<std::string>>();
    if (symbols.empty() || symbols.front() != text::kBlankSymbol) throw Error(Errc::CorruptCheckpoint, "stored vocabulary lacks the blank");
    symbols.erase(symbols.begin());
    CheckpointMeta meta{models::ModelConfig::from_json(m.at("config")), text::Vocab(symbols), {}, m.value("extra", nlohmann::json::object())};
    std::ostringstream hash;
    hash << std::hex << meta.vocab.hash();
    if (hash.str() != m.at("vocab_hash").get<std::string>()) {
      throw Error(Errc::CorruptCheckpoint, "stored vocabulary does not match its hash");
    }
    meta.stats.mu_f0 = m.at("pitch_stats").at("mu_f0").get<double>();
    meta.stats.sigma_f0 = m.at("pitch_stats").at("sigma_f0").get<double>();
    return meta;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::CorruptCheckpoint, std::string("checkpoint meta: ") + ex.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptCheckpoint) throw;
    throw Error(Errc::CorruptCheckpoint, std::string("checkpoint meta: ") + e.what());
  }
}

void restore_params(const io::Container& c, nn::ParamList<float>& params, nn::AdamState<float>* optimizer) {
  for (auto& p : params) {
    const auto& t = find_tensor(c, p.name, p.tensor->size());
    std::copy(t.values.begin(), t.values.end(), p.tensor->value().begin());
  }
  if (optimizer == nullptr || !c.meta.contains("adam_step")) return;
  optimizer->m.clear();
  optimizer->v.clear();
  for (auto& p : params) {
    const std::size_t n = p.trainable ? p.tensor->size() : 0;
    if (n == 0) {
      optimizer->m.emplace_back();
      optimizer->v.emplace_back();
      continue;
    }
    optimizer->m.push_back(find_tensor(c, "adam.m." + p.name, n).values);
    optimizer->v.push_back(find_tensor(c, "adam.v." + p.name, n).values);
  }
  optimizer->step = c.meta["adam_step"].get<std::int64_t>();
}

}  // namespace talknet::pipeline
