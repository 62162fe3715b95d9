#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "talknet/align/viterbi.hpp"

namespace talknet::align {

struct DurationRecord {
  std::string id;
  std::vector<text::TokenId> tokens;
  text::DurationSeq durations;
  double score = 0.0;

  bool operator==(const DurationRecord&) const = default;
};

DurationRecord alignment_to_record(const AlignmentResult& result, const text::TokenSeq& target,
                                   const std::string& utt_id);

/// One JSON object per line: {"id","tokens","durations","score"}.
std::string record_to_jsonl(const DurationRecord& r);
DurationRecord record_from_json_line(const std::string& line, std::size_t line_number = 1);

void save_records(const std::filesystem::path& path, const std::vector<DurationRecord>& records);
/// Throws ParseError naming the 1-based line of the first malformed record.
std::vector<DurationRecord> load_records(const std::filesystem::path& path);

}  // namespace talknet::align
