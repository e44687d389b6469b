#pragma once

#include <stdexcept>
#include <string>

namespace smooth_threshold {

//! Invalid arguments, malformed data, violated preconditions.
class InputError : public std::invalid_argument
{
public:
  explicit InputError(const std::string& what)
    : std::invalid_argument(what)
  {}
};

//! Numerical failure: non-convergent quadrature, divergent integrals, ...
class NumericError : public std::runtime_error
{
public:
  explicit NumericError(const std::string& what)
    : std::runtime_error(what)
  {}
};

namespace detail {

inline void
require(bool condition, const std::string& message)
{
  if (!condition)
    throw InputError(message);
}

} // namespace detail

} // namespace smooth_threshold
