#pragma once

#include <stdexcept>
#include <string>

namespace escape_dim {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A time horizon that violates the schedule (for example T <= T_r).
class ScheduleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// An exhaustive or simulated computation that would exceed its size budget.
class BudgetError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Input that does not satisfy the hypothesis of a lemma being checked.
/// Kept distinct from a failed check so callers never confuse the two.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

} // namespace detail
} // namespace escape_dim
