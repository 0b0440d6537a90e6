#include "promptrl/error.hpp"

namespace promptrl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InsufficientRegion: return "InsufficientRegion";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::CorruptCase: return "CorruptCase";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::BridgeError: return "BridgeError";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::RepeatedAction: return "RepeatedAction";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace promptrl
