#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptrl {

enum class ErrorCode {
  EmptyMask,
  InsufficientRegion,
  InvalidCount,
  InvalidSpec,
  MissingFile,
  CorruptCase,
  ShapeMismatch,
  DegenerateSample,
  InvalidPrompt,
  InvalidThreshold,
  BridgeError,
  EmptyRegion,
  EmptyInput,
  InvalidGrid,
  DegenerateBatch,
  RepeatedAction,
  EpisodeFinished,
  InvalidConfig,
  MissingModel,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this exception; `code()` is the
// machine-checkable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace promptrl
