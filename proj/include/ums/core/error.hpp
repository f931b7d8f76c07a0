#pragma once

#include <stdexcept>
#include <string>

namespace ums {

// Typed failure conditions. Callers that can recover catch ums::Error and
// branch on code(); everything else is allowed to propagate to the CLI layer.
enum class ErrorCode {
  // geometry
  NonPositiveDepth,
  NonConvergence,
  LowParallax,
  BehindCamera,
  TooFewPoints,
  NoConsensus,
  // imu
  TooFewSamples,
  EmptyInterval,
  NonMonotonicTimestamps,
  BiasDeltaTooLarge,
  // solver
  NegativeInput,
  StructureError,
  NumericalFailure,
  // initialization
  InsufficientFeatures,
  PnpFailure,
  HighResidual,
  TooFewPairs,
  RankDeficient,
  IllConditioned,
  // frontend / loop closure
  EmptyKeyframe,
  // dataset io
  MissingSensorDir,
  MalformedCsv,
  UnsortedTimestamps,
  EmptyOverlap,
  NoAssociations,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace ums
