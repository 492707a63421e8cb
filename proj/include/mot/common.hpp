#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mot {

inline constexpr const char* kVersion = "0.1.0";

// Error kinds surfaced by the library. The CLI maps `validation`-class
// kinds to exit code 2 and solver failures to exit code 3.
enum class Errc {
  unknown_support_point,
  empty_sample,
  empty_group,
  invalid_size,
  index_out_of_range,
  support_mismatch,
  duplicate_support_point,
  budget_exceeded,
  solver_failure,
  row_cap_exceeded,
  stalled,
  unbounded_entry,
  divisibility_violation,
  parse_error,
  invalid_argument,
};

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::unknown_support_point: return "UnknownSupportPoint";
    case Errc::empty_sample: return "EmptySample";
    case Errc::empty_group: return "EmptyGroup";
    case Errc::invalid_size: return "InvalidSize";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::support_mismatch: return "SupportMismatch";
    case Errc::duplicate_support_point: return "DuplicateSupportPoint";
    case Errc::budget_exceeded: return "BudgetExceeded";
    case Errc::solver_failure: return "SolverFailure";
    case Errc::row_cap_exceeded: return "RowCapExceeded";
    case Errc::stalled: return "Stalled";
    case Errc::unbounded_entry: return "UnboundedEntry";
    case Errc::divisibility_violation: return "DivisibilityViolation";
    case Errc::parse_error: return "ParseError";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& what)
      : std::runtime_error(std::string(errc_name(kind)) + ": " + what),
        kind_(kind) {}
  Errc kind() const noexcept { return kind_; }

  bool is_solver_failure() const noexcept {
    return kind_ == Errc::solver_failure || kind_ == Errc::stalled ||
           kind_ == Errc::row_cap_exceeded;
  }

 private:
  Errc kind_;
};

[[noreturn]] inline void fail(Errc kind, const std::string& what) {
  throw Error(kind, what);
}

// Shared numeric tolerances. Feasibility/optimality at 1e-8 keeps the
// closed-form identities assertable in double precision.
inline constexpr double kFeasTol = 1e-8;
inline constexpr double kOptTol = 1e-8;
inline constexpr double kWeightTol = 1e-12;

// Dense-mode cap on materialized tensors: N^k entries at most.
inline constexpr std::uint64_t kDefaultTensorBudget = 1'000'000;

}  // namespace mot
