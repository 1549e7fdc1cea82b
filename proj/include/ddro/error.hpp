#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddro {

enum class ErrorCode {
  duplicate_name,
  inverted_bounds,
  unknown_var,
  dimension_mismatch,
  discrete_set_unsupported,
  unbounded_factor,
  missing_bound,
  leader_space_too_large,
  quadratic_content,
  unsupported_structure,
  infeasible_decision,
  io,
  parse_failure,
  spawn_failure,
  solver_error,
  config_parse,
  empty_selection,
  invalid_argument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::duplicate_name: return "duplicate-name";
    case ErrorCode::inverted_bounds: return "inverted-bounds";
    case ErrorCode::unknown_var: return "unknown-var";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::discrete_set_unsupported: return "discrete-set-unsupported";
    case ErrorCode::unbounded_factor: return "unbounded-factor";
    case ErrorCode::missing_bound: return "missing-bound";
    case ErrorCode::leader_space_too_large: return "leader-space-too-large";
    case ErrorCode::quadratic_content: return "quadratic-content";
    case ErrorCode::unsupported_structure: return "unsupported-structure";
    case ErrorCode::infeasible_decision: return "infeasible-decision";
    case ErrorCode::io: return "io";
    case ErrorCode::parse_failure: return "parse-failure";
    case ErrorCode::spawn_failure: return "spawn-failure";
    case ErrorCode::solver_error: return "solver-reported-error";
    case ErrorCode::config_parse: return "config-parse";
    case ErrorCode::empty_selection: return "empty-selection";
    case ErrorCode::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ddro
