#include "talknet/error.hpp"

namespace talknet {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::AlreadyBlanked: return "AlreadyBlanked";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyExpansion: return "EmptyExpansion";
    case Errc::TooShort: return "TooShort";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::NoVoicedFrames: return "NoVoicedFrames";
    case Errc::Infeasible: return "Infeasible";
    case Errc::BadLattice: return "BadLattice";
    case Errc::ParseError: return "ParseError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::BadSchedule: return "BadSchedule";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingLattice: return "MissingLattice";
    case Errc::FrameCountMismatch: return "FrameCountMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::CheckpointMissing: return "CheckpointMissing";
    case Errc::VocabMismatch: return "VocabMismatch";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(errc_name(code_))}, {"message", what()}, {"details", details_}};
}

}  // namespace talknet
