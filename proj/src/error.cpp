#include "adaptdet/error.hpp"

namespace adaptdet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::MissingCoverage: return "MissingCoverage";
    case ErrorCode::InconsistentAccuracy: return "InconsistentAccuracy";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingBase: return "MissingBase";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::ZeroFrames: return "ZeroFrames";
    case ErrorCode::InvalidBudget: return "InvalidBudget";
    case ErrorCode::NoFeasibleBranch: return "NoFeasibleBranch";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::KernelCoverage: return "KernelCoverage";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace adaptdet
