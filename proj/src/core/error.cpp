#include "ums/core/error.hpp"

namespace ums {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::LowParallax: return "LowParallax";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyInterval: return "EmptyInterval";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::BiasDeltaTooLarge: return "BiasDeltaTooLarge";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::StructureError: return "StructureError";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InsufficientFeatures: return "InsufficientFeatures";
    case ErrorCode::PnpFailure: return "PnpFailure";
    case ErrorCode::HighResidual: return "HighResidual";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::EmptyKeyframe: return "EmptyKeyframe";
    case ErrorCode::MissingSensorDir: return "MissingSensorDir";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::UnsortedTimestamps: return "UnsortedTimestamps";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::NoAssociations: return "NoAssociations";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ums
