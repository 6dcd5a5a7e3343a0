#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace adaptdet {

enum class ErrorCode {
  EmptyDomain,
  InvalidDomain,
  ParseError,
  DuplicateEntry,
  MissingCoverage,
  InconsistentAccuracy,
  NotFound,
  OutOfRange,
  MissingBase,
  EmptyTrace,
  ZeroFrames,
  InvalidBudget,
  NoFeasibleBranch,
  InsufficientSamples,
  DegenerateFit,
  SpawnFailure,
  KernelCoverage,
  ModeMismatch,
  NoGroundTruth,
  EmptyGroundTruth,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. `code()` lets
/// callers (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the scheduler when no branch meets the budget. Carries the
/// smallest latency and energy any branch achieves so callers can relax.
class NoFeasibleBranchError : public Error {
 public:
  NoFeasibleBranchError(double min_latency_ms, double min_energy_j, const std::string& message)
      : Error(ErrorCode::NoFeasibleBranch, message),
        min_latency_ms_(min_latency_ms),
        min_energy_j_(min_energy_j) {}

  double min_latency_ms() const noexcept { return min_latency_ms_; }
  double min_energy_j() const noexcept { return min_energy_j_; }

 private:
  double min_latency_ms_;
  double min_energy_j_;
};

/// Raised when a profile file does not cover every (branch, context) pair.
class MissingCoverageError : public Error {
 public:
  MissingCoverageError(std::vector<std::string> missing, const std::string& message)
      : Error(ErrorCode::MissingCoverage, message), missing_(std::move(missing)) {}

  /// Human-readable "branch_id @ context" entries.
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

}  // namespace adaptdet
