// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/error.hpp"

namespace lipshift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInterval: return "invalid interval";
    case ErrorCode::InvalidParameter: return "invalid parameter";
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::NonDoubling: return "non-doubling";
    case ErrorCode::NondifferentiablePoint: return "nondifferentiable point";
    case ErrorCode::NoBoundAvailable: return "no bound available";
    case ErrorCode::DivisionByZeroDensity: return "division by zero density";
    case ErrorCode::NoViolation: return "no violation";
    case ErrorCode::SizeCap: return "size cap";
    case ErrorCode::DegenerateScale: return "degenerate scale";
    case ErrorCode::SolverFailure: return "solver failure";
    case ErrorCode::ConfigError: return "config error";
    case ErrorCode::ExperimentError: return "experiment error";
  }
  return "unknown error";
}

}  // namespace lipshift
