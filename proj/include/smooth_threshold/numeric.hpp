#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace smooth_threshold {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

namespace numeric {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343819;

inline double
normal_pdf(double t)
{
  return inv_sqrt_2pi * std::exp(-0.5 * t * t);
}

//! P(N(0,1) > a), accurate in both tails.
inline double
normal_upper_tail(double a)
{
  return 0.5 * std::erfc(a / std::numbers::sqrt2);
}

inline double
normal_cdf(double a)
{
  return 0.5 * std::erfc(-a / std::numbers::sqrt2);
}

//! Pairwise (tree) summation; base blocks of 32 are summed sequentially.
inline double
pairwise_sum(std::span<const double> values)
{
  constexpr std::size_t block = 32;
  if (values.size() <= block) {
    double s = 0.0;
    for (double v : values)
      s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double
pairwise_sum(const Vector& v)
{
  return pairwise_sum(std::span<const double>(v.data(), v.size()));
}

//! Pairwise reduction of equally sized vectors, in place; returns the sum.
inline Vector
pairwise_reduce(std::vector<Vector>& parts)
{
  if (parts.empty())
    return Vector();
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride)
      parts[i] += parts[i + stride];
  return parts.front();
}

struct Integral
{
  double value;
  double error;
};

// Adaptive 15-point Gauss-Kronrod on [a, b]; infinite bounds are allowed.
// Throws NumericError when the error estimate exceeds abs_tol or the result
// is not finite.
template<class F>
Integral
integrate(F&& f, double a, double b, double abs_tol, const std::string& what)
{
  double error = 0.0;
  double l1 = 0.0;
  double value = 0.0;
  try {
    value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 25, 1e-13, &error, &l1);
  } catch (const std::exception& e) {
    throw NumericError("quadrature failed for " + what + ": " + e.what());
  }
  if (!std::isfinite(value) || !std::isfinite(error) || error > abs_tol)
    throw NumericError("quadrature did not converge for " + what +
                       " (estimate " + std::to_string(value) + ", error " +
                       std::to_string(error) + ")");
  return { value, error };
}

} // namespace numeric
} // namespace smooth_threshold
