#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmols {

enum class ErrorKind {
  // caller supplied something outside an operation's domain
  Domain,
  Dimension,
  Validation,
  Parse,
  Io,
  Budget,
  Overlap,
  // numerical or data-dependent failures
  DecompositionFailure,
  ZeroColumn,
  RankDeficient,
  DegenerateInput,
  Singularity,
  Exhaustion,
  Negativity,
  Physicality,
  DegenerateStatistics,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Budget: return "budget";
    case ErrorKind::Overlap: return "overlap";
    case ErrorKind::DecompositionFailure: return "decomposition-failure";
    case ErrorKind::ZeroColumn: return "zero-column";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::Exhaustion: return "exhaustion";
    case ErrorKind::Negativity: return "negativity";
    case ErrorKind::Physicality: return "physicality";
    case ErrorKind::DegenerateStatistics: return "degenerate-statistics";
  }
  return "unknown";
}

/// True for kinds caused by bad arguments rather than by the numbers themselves.
constexpr bool is_validation_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain:
    case ErrorKind::Dimension:
    case ErrorKind::Validation:
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::Budget:
    case ErrorKind::Overlap:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace pmols
