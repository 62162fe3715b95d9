#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace talknet {

enum class Errc {
  UnknownSymbol,
  EmptyInput,
  AlreadyBlanked,
  LengthMismatch,
  EmptyExpansion,
  TooShort,
  RateMismatch,
  NoVoicedFrames,
  Infeasible,
  BadLattice,
  ParseError,
  ShapeMismatch,
  NonFinite,
  BadSchedule,
  ConfigInvalid,
  MissingLattice,
  FrameCountMismatch,
  EmptyDataset,
  CheckpointMissing,
  VocabMismatch,
  CorruptCheckpoint,
  Io,
};

std::string_view errc_name(Errc code);

/// Every failure in the library surfaces as this exception. `details` carries
/// machine-readable context (offending symbol, line number, required frames).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  Errc code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  /// {"error": <kind>, "message": ..., "details": {...}}
  nlohmann::json to_json() const;

 private:
  Errc code_;
  nlohmann::json details_;
};

}  // namespace talknet
