#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eos {

enum class ErrorCode {
  InvalidArgument,
  NonConvergence,
  NotSymmetric,
  CertificationFailed,
  NumericOverflow,
  NotDifferentiable,
  OnInvariantLine,
  NotConverged,
  NoRoot,
  NonPositiveTarget,
  KinkEncountered,
  DegenerateFit,
  InsufficientRecording,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class EosError : public std::runtime_error {
 public:
  EosError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eos
