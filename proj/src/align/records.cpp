#include "talknet/align/records.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "talknet/error.hpp"

namespace talknet::align {

DurationRecord alignment_to_record(const AlignmentResult& result, const text::TokenSeq& target,
                                   const std::string& utt_id) {
  return {utt_id, target.ids, result.durations, result.path_logprob};
}

std::string record_to_jsonl(const DurationRecord& r) {
  nlohmann::json j = {{"id", r.id}, {"tokens", r.tokens}, {"durations", r.durations}, {"score", r.score}};
  return j.dump();
}

DurationRecord record_from_json_line(const std::string& line, std::size_t line_number) {
  try {
    const auto j = nlohmann::json::parse(line);
    DurationRecord r;
    r.id = j.at("id").get<std::string>();
    r.tokens = j.at("tokens").get<std::vector<text::TokenId>>();
    r.durations = j.at("durations").get<text::DurationSeq>();
    r.score = j.at("score").get<double>();
    if (r.tokens.size() != r.durations.size()) {
      throw Error(Errc::ParseError, "tokens/durations length mismatch on line " + std::to_string(line_number),
                  {{"line", line_number}});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "malformed duration record on line " + std::to_string(line_number) + ": " + e.what(),
                {{"line", line_number}});
  }
}

void save_records(const std::filesystem::path& path, const std::vector<DurationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& r : records) out << record_to_jsonl(r) << '\n';
}

std::vector<DurationRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<DurationRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    out.push_back(record_from_json_line(line, n));
  }
  return out;
}

}  // namespace talknet::align
