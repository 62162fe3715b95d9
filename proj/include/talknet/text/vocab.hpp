#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace talknet::text {

using TokenId = std::int32_t;

inline constexpr TokenId kBlankId = 0;
inline constexpr std::string_view kBlankSymbol = "~";

/// Grapheme inventory. Symbols are single UTF-8 code points; id 0 is always
/// the blank `~`.
class Vocab {
 public:
  /// `symbols` must not contain the blank; it is prepended at id 0.
  explicit Vocab(const std::vector<std::string>& symbols);

  /// Lowercase letters, digits, space and common punctuation.
  static Vocab default_graphemes();
  /// Blank plus every distinct (lowercased) code point of `texts`, sorted.
  static Vocab from_corpus(const std::vector<std::string>& texts);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(TokenId id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> lookup(std::string_view symbol) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  /// FNV-1a over the newline-joined symbol list; identifies a vocabulary in
  /// checkpoints.
  std::uint64_t hash() const;

  bool operator==(const Vocab& other) const { return symbols_ == other.symbols_; }

 private:
  Vocab() = default;
  void index();

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Splits UTF-8 text into code points (each returned as its byte string).
std::vector<std::string> utf8_codepoints(std::string_view text);

}  // namespace talknet::text
