#pragma once

#include <stdexcept>
#include <string>

namespace mtp {

enum class PlanningErrorCode {
  kUnreachableGoal,
  kNoPointMassTrajectory,
  kInfeasiblePrimitive,
  kNoFeasibleTrajectory,
};

/// Raised when a planning stage cannot produce its output. Precondition
/// violations use std::invalid_argument instead.
class PlanningError : public std::runtime_error {
 public:
  PlanningError(PlanningErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  PlanningErrorCode code() const { return code_; }

 private:
  PlanningErrorCode code_;
};

}  // namespace mtp
