#pragma once

#include <stdexcept>
#include <string>

namespace choiforge {

enum class ErrorKind {
  InvalidInput,
  DimensionMismatch,
  SingularGram,
  NotPsd,
  Factorization,
  DegenerateDenominator,
  DegenerateData,
  DuplicateConstraint,
  Io,
  Parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::SingularGram: return "singular-gram";
    case ErrorKind::NotPsd: return "not-psd";
    case ErrorKind::Factorization: return "factorization";
    case ErrorKind::DegenerateDenominator: return "degenerate-denominator";
    case ErrorKind::DegenerateData: return "degenerate-data";
    case ErrorKind::DuplicateConstraint: return "duplicate-constraint";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace choiforge
