#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arithdyn {

enum class ErrorKind {
  AllZero,
  BoundTooLarge,
  FactorizationBudgetExceeded,
  DomainViolation,
  DegenerateImage,
  DegreeOverflow,
  PrecisionUnreachable,
  InsufficientTrace,
  BudgetExceeded,
  MissingDecomposition,
  NotComplete,
  NotProjective,
  InvalidFan,
  IncompatibleEndo,
  NotPermutation,
  NotNef,
  EmptyPolytope,
  ConjugacyFailure,
  InvalidInput,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::BoundTooLarge: return "BoundTooLarge";
    case ErrorKind::FactorizationBudgetExceeded: return "FactorizationBudgetExceeded";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::DegenerateImage: return "DegenerateImage";
    case ErrorKind::DegreeOverflow: return "DegreeOverflow";
    case ErrorKind::PrecisionUnreachable: return "PrecisionUnreachable";
    case ErrorKind::InsufficientTrace: return "InsufficientTrace";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::MissingDecomposition: return "MissingDecomposition";
    case ErrorKind::NotComplete: return "NotComplete";
    case ErrorKind::NotProjective: return "NotProjective";
    case ErrorKind::InvalidFan: return "InvalidFan";
    case ErrorKind::IncompatibleEndo: return "IncompatibleEndo";
    case ErrorKind::NotPermutation: return "NotPermutation";
    case ErrorKind::NotNef: return "NotNef";
    case ErrorKind::EmptyPolytope: return "EmptyPolytope";
    case ErrorKind::ConjugacyFailure: return "ConjugacyFailure";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type; `kind()` is
/// the machine-readable part, `what()` carries "Kind: detail".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

}  // namespace arithdyn
