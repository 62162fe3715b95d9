#include "talknet/text/tokens.hpp"

#include <cctype>
#include <numeric>

#include "talknet/error.hpp"

namespace talknet::text {

namespace {

bool is_space(const std::string& cp) {
  return cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0]));
}

}  // namespace

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  const auto cps = utf8_codepoints(text);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  while (begin < end && is_space(cps[begin])) ++begin;
  while (end > begin && is_space(cps[end - 1])) --end;
  if (begin == end) throw Error(Errc::EmptyInput, "nothing to tokenize");

  TokenSeq out;
  out.ids.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    std::string cp = cps[i];
    if (cp.size() == 1) cp[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(cp[0])));
    auto id = vocab.lookup(cp);
    if (!id || *id == kBlankId) {
      throw Error(Errc::UnknownSymbol, "unknown symbol '" + cps[i] + "' at position " + std::to_string(i),
                  {{"symbol", cps[i]}, {"position", i}});
    }
    out.ids.push_back(*id);
  }
  return out;
}

TokenSeq insert_blanks(const TokenSeq& seq) {
  if (seq.has_blanks) throw Error(Errc::AlreadyBlanked, "sequence already blank-interleaved");
  TokenSeq out;
  out.has_blanks = true;
  out.ids.reserve(2 * seq.ids.size() + 1);
  out.ids.push_back(kBlankId);
  for (TokenId id : seq.ids) {
    out.ids.push_back(id);
    out.ids.push_back(kBlankId);
  }
  return out;
}

bool is_blank_interleaved(const TokenSeq& seq) {
  if (seq.ids.size() % 2 == 0) return false;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const bool blank = seq.ids[i] == kBlankId;
    if (blank != (i % 2 == 0)) return false;
  }
  return true;
}

TokenSeq strip_blanks(const TokenSeq& seq) {
  if (!seq.has_blanks || !is_blank_interleaved(seq)) {
    throw Error(Errc::ShapeMismatch, "strip_blanks expects a blank-interleaved sequence");
  }
  TokenSeq out;
  for (std::size_t i = 1; i < seq.ids.size(); i += 2) out.ids.push_back(seq.ids[i]);
  return out;
}

void validate_durations(const TokenSeq& seq, std::span<const std::int32_t> durs) {
  if (seq.ids.size() != durs.size()) {
    throw Error(Errc::LengthMismatch, "durations do not match token count",
                {{"tokens", seq.ids.size()}, {"durations", durs.size()}});
  }
  for (std::size_t i = 0; i < durs.size(); ++i) {
    const int floor = seq.ids[i] == kBlankId ? 0 : 1;
    if (durs[i] < floor) {
      throw Error(Errc::ShapeMismatch, "duration below floor at position " + std::to_string(i),
                  {{"position", i}, {"duration", durs[i]}});
    }
  }
}

TokenSeq expand_by_durations(const TokenSeq& seq, std::span<const std::int32_t> durs) {
  if (seq.ids.size() != durs.size()) {
    throw Error(Errc::LengthMismatch, "durations do not match token count",
                {{"tokens", seq.ids.size()}, {"durations", durs.size()}});
  }
  std::int64_t total = 0;
  for (auto d : durs) {
    if (d < 0) throw Error(Errc::ShapeMismatch, "negative duration");
    total += d;
  }
  if (total == 0) throw Error(Errc::EmptyExpansion, "durations sum to zero");
  TokenSeq out;
  out.ids.reserve(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < durs.size(); ++i) out.ids.insert(out.ids.end(), static_cast<std::size_t>(durs[i]), seq.ids[i]);
  return out;
}

}  // namespace talknet::text
