#pragma once

#include <stdexcept>
#include <string>

namespace npc {

/// Bad arguments or malformed input (CLI exit status 1).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input outside the domain of a geometric operation, e.g. a matrix that is not positive definite.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Operation not defined for the given target kind (log/exp on a k-pod).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Iterative method did not reach its tolerance (CLI exit status 2).
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A checked invariant failed during a run or a verification (CLI exit status 3).
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace npc
