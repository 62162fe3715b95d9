#include "talknet/text/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "talknet/error.hpp"

namespace talknet::text {

std::vector<std::string> utf8_codepoints(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocab::Vocab(const std::vector<std::string>& symbols) {
  symbols_.reserve(symbols.size() + 1);
  symbols_.emplace_back(kBlankSymbol);
  for (const auto& s : symbols) {
    if (s == kBlankSymbol) {
      throw Error(Errc::ConfigInvalid, "blank symbol may only appear at id 0");
    }
    symbols_.push_back(s);
  }
  index();
}

void Vocab::index() {
  ids_.clear();
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.empty() || utf8_codepoints(s).size() != 1) {
      throw Error(Errc::ConfigInvalid, "vocab symbols must be single code points",
                  {{"id", i}, {"symbol", s}});
    }
    if (!ids_.emplace(s, static_cast<TokenId>(i)).second) {
      throw Error(Errc::ConfigInvalid, "duplicate vocab symbol '" + s + "'", {{"id", i}});
    }
  }
}

Vocab Vocab::default_graphemes() {
  std::vector<std::string> symbols;
  symbols.emplace_back(" ");
  for (char c = 'a'; c <= 'z'; ++c) symbols.emplace_back(1, c);
  for (char c = '0'; c <= '9'; ++c) symbols.emplace_back(1, c);
  for (char c : std::string_view(".,!?'\"-;:()")) symbols.emplace_back(1, c);
  return Vocab(symbols);
}

namespace {

std::string lower_codepoint(const std::string& cp) {
  if (cp.size() == 1) {
    return std::string(1, static_cast<char>(std::tolower(static_cast<unsigned char>(cp[0]))));
  }
  return cp;
}

}  // namespace

Vocab Vocab::from_corpus(const std::vector<std::string>& texts) {
  std::set<std::string> seen;
  for (const auto& t : texts) {
    for (const auto& cp : utf8_codepoints(t)) {
      auto lc = lower_codepoint(cp);
      if (lc != kBlankSymbol && lc != "\n" && lc != "\r" && lc != "\t") seen.insert(lc);
    }
  }
  return Vocab(std::vector<std::string>(seen.begin(), seen.end()));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open vocab file " + path.string());
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 0 && line != kBlankSymbol) {
      throw Error(Errc::ParseError, "vocab line 0 must be '~'", {{"line", 1}});
    }
    if (line.empty()) {
      throw Error(Errc::ParseError, "empty vocab line", {{"line", lineno + 1}});
    }
    v.symbols_.push_back(line);
    ++lineno;
  }
  if (v.symbols_.empty()) throw Error(Errc::ParseError, "empty vocab file " + path.string());
  v.index();
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write vocab file " + path.string());
  for (const auto& s : symbols_) out << s << '\n';
}

std::optional<TokenId> Vocab::lookup(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& s : symbols_) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace talknet::text
