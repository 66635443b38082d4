#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uscal {

enum class ErrorCode {
  kDegenerateLine,
  kDegenerateAnchor,
  kSingularBlock,
  kRankDeficient,
  kHomogeneousCollapse,
  kEliminationFailure,
  kSingularC,
  kNoRealSolutions,
  kInsufficientData,
  kNoModelFound,
  kNonFiniteCost,
  kParseError,
  kInvariantViolation,
};

std::string_view to_string(ErrorCode code);

// Coarse grouping used by the CLI exit-code contract.
enum class ErrorCategory { kGeometry, kSolver, kInput };
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uscal
