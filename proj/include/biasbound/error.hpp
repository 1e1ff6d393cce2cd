#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biasbound {

/// Machine-readable failure classes. The CLI maps each to an exit code.
enum class ErrorCode {
  ParseError,            // malformed input bytes
  ValidationError,       // well-formed input breaking a type invariant
  UsageError,            // missing block / bad flag for a subcommand
  InvalidArgument,       // bad argument to a library call
  ZeroCell,              // odds-ratio-type quantity with a zero cell
  EmptySelection,        // selected population has probability zero
  Boundary,              // OR-scale quantity with a selection probability of 0 or 1
  DegenerateSample,      // simulated sample has an empty selected cell
  RejectionExhausted,    // sampler could not satisfy a constraint
  InternalConsistency,   // an implementation bug, never bad input
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::ValidationError: return "validation_error";
    case ErrorCode::UsageError: return "usage_error";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::ZeroCell: return "zero_cell";
    case ErrorCode::EmptySelection: return "empty_selection";
    case ErrorCode::Boundary: return "boundary";
    case ErrorCode::DegenerateSample: return "degenerate_sample";
    case ErrorCode::RejectionExhausted: return "rejection_exhausted";
    case ErrorCode::InternalConsistency: return "internal_consistency";
  }
  return "unknown";
}

/// True for errors that mean "the requested quantity does not exist for this
/// input" rather than "the input is wrong".
inline bool is_undefined_quantity(ErrorCode code) {
  return code == ErrorCode::ZeroCell || code == ErrorCode::EmptySelection ||
         code == ErrorCode::Boundary || code == ErrorCode::DegenerateSample;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace biasbound
