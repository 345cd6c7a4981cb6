#pragma once

#include <stdexcept>
#include <string>

namespace blowup {

/// Caller violated a precondition (bad parameters, mismatched grids, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced something it cannot recover from (NaN, failed solve, bracket failure).
class NumericalFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw InvalidInput(what);
}

} // namespace blowup
