#pragma once

#include "error.hpp"
#include "numeric.hpp"
#include "risk.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace smooth_threshold {

enum class SimModel
{
  binary_response,
  conditional_mean,
  one_bit_noiseless
};

enum class NoiseKind
{
  gaussian,
  logistic
};

inline std::string
to_string(SimModel m)
{
  switch (m) {
    case SimModel::binary_response:
      return "binary_response";
    case SimModel::conditional_mean:
      return "conditional_mean";
    case SimModel::one_bit_noiseless:
      return "one_bit_noiseless";
  }
  return "?";
}

inline SimModel
parse_sim_model(const std::string& s)
{
  if (s == "binary_response" || s == "binary-response")
    return SimModel::binary_response;
  if (s == "conditional_mean" || s == "conditional-mean")
    return SimModel::conditional_mean;
  if (s == "one_bit_noiseless" || s == "one-bit-noiseless")
    return SimModel::one_bit_noiseless;
  throw InputError("unknown simulation model '" + s + "'");
}

struct SimSpec
{
  SimModel model = SimModel::conditional_mean;
  Eigen::Index n = 100;
  Eigen::Index d = 10;
  Eigen::Index s = 1;
  double mu = 2.0;
  double noise_sd = 0.1;
  //! Noise law of the binary response model; logistic ignores noise_sd.
  NoiseKind noise = NoiseKind::gaussian;
  //! Unset: first s coordinates equal, normalized to unit length.
  std::optional<Vector> theta_star;
  std::uint64_t seed = 0;

  void validate() const
  {
    detail::require(n >= 1 && d >= 1 && s >= 1, "n, d and s must be positive");
    detail::require(s <= d, "sparsity s cannot exceed d");
    detail::require(std::isfinite(mu), "mu must be finite");
    if (model != SimModel::one_bit_noiseless && noise == NoiseKind::gaussian)
      detail::require(noise_sd > 0.0, "noise_sd must be positive");
    if (theta_star)
      detail::require(theta_star->size() == d && theta_star->allFinite(),
                      "theta_star must be a finite vector of length d");
  }

  Vector resolved_theta() const
  {
    if (theta_star)
      return *theta_star;
    Vector t = Vector::Zero(d);
    t.head(s).setConstant(1.0 / std::sqrt(static_cast<double>(s)));
    return t;
  }
};

struct SimData
{
  Dataset data;
  Vector theta_star;
};

namespace detail {

// Sample i of a simulation is drawn from its own stream, so any row range
// can be regenerated independently of the others.
inline void
draw_sample(const SimSpec& spec,
            const Vector& theta,
            const CounterRng& base,
            Eigen::Index i,
            double& x,
            double& y,
            Eigen::Ref<Eigen::RowVectorXd> z)
{
  CounterRng rng = base.split(static_cast<std::uint64_t>(i));
  auto noise = [&]() {
    return spec.noise == NoiseKind::logistic ? rng.logistic()
                                             : spec.noise_sd * rng.normal();
  };

  switch (spec.model) {
    case SimModel::conditional_mean: {
      y = rng.sign();
      for (Eigen::Index j = 0; j < z.size(); ++j)
        z(j) = rng.normal();
      x = spec.mu * y + z.dot(theta.transpose()) + noise();
      return;
    }
    case SimModel::binary_response:
    case SimModel::one_bit_noiseless: {
      x = rng.normal();
      for (Eigen::Index j = 0; j < z.size(); ++j)
        z(j) = rng.normal();
      const double index = x - z.dot(theta.transpose());
      const bool noiseless = spec.model == SimModel::one_bit_noiseless;
      double latent = noiseless ? index : index + noise();
      // Ties have probability zero; redraw the noise (or x) if one occurs.
      while (latent == 0.0) {
        if (noiseless) {
          x = rng.normal();
          latent = x - z.dot(theta.transpose());
        } else {
          latent = index + noise();
        }
      }
      y = latent > 0 ? 1.0 : -1.0;
      return;
    }
  }
}

} // namespace detail

//! Rows [begin, end) of the simulation described by spec.
inline Dataset
generate_rows(const SimSpec& spec, Eigen::Index begin, Eigen::Index end)
{
  spec.validate();
  detail::require(0 <= begin && begin < end, "row range must be non-empty");
  const Vector theta = spec.resolved_theta();
  const CounterRng base = CounterRng(spec.seed).split(0x5157);
  const Eigen::Index m = end - begin;
  Vector x(m), y(m);
  Matrix z(m, spec.d);
  Eigen::RowVectorXd row(spec.d);
  for (Eigen::Index r = 0; r < m; ++r) {
    detail::draw_sample(spec, theta, base, begin + r, x(r), y(r), row);
    z.row(r) = row;
  }
  return Dataset(std::move(x), std::move(y), std::move(z));
}

inline SimData
generate(const SimSpec& spec)
{
  return { generate_rows(spec, 0, spec.n), spec.resolved_theta() };
}

//! Y = sign(X - theta' Z + u) with X ~ N(0,1), Z ~ N(0, I).
inline SimData
gen_binary_response(SimSpec spec)
{
  detail::require(spec.model == SimModel::binary_response ||
                    spec.model == SimModel::one_bit_noiseless,
                  "gen_binary_response needs a binary response model");
  return generate(spec);
}

//! X = mu Y + theta' Z + u with Y uniform on {-1, +1}.
inline SimData
gen_conditional_mean(SimSpec spec)
{
  detail::require(spec.model == SimModel::conditional_mean,
                  "gen_conditional_mean needs the conditional mean model");
  return generate(spec);
}

enum class ErrorNorm
{
  l1,
  l2,
  linf
};

inline double
estimation_error(const Vector& theta_hat, const Vector& theta_star, ErrorNorm norm)
{
  detail::require(theta_hat.size() == theta_star.size(),
                  "estimate and truth must have the same length");
  const Vector diff = theta_hat - theta_star;
  switch (norm) {
    case ErrorNorm::l1:
      return diff.lpNorm<1>();
    case ErrorNorm::l2:
      return diff.norm();
    case ErrorNorm::linf:
      return diff.size() == 0 ? 0.0 : diff.lpNorm<Eigen::Infinity>();
  }
  return 0.0;
}

// Fisher-inconsistency example: X ~ N(0,1), Z uniform on {0.5, 5},
// Y = sign(X - Z). Population risks of theta under the 0-1, hinge and
// exponential losses, in closed form per Z atom.
namespace toy {

inline constexpr double atoms[2] = { 0.5, 5.0 };

inline double
risk01(double theta)
{
  double r = 0.0;
  for (double z : atoms)
    r += 0.5 * std::abs(numeric::normal_cdf(z) - numeric::normal_cdf(theta * z));
  return r;
}

inline double
risk_hinge(double theta)
{
  using numeric::normal_cdf;
  using numeric::normal_pdf;
  double r = 0.0;
  for (double z : atoms) {
    double part = 0.0;
    const double b = 1.0 + theta * z; // Y = +1: (b - X)_+ on X > z
    if (b > z)
      part += b * (normal_cdf(b) - normal_cdf(z)) + normal_pdf(b) - normal_pdf(z);
    const double a = theta * z - 1.0; // Y = -1: (X - a)_+ on X < z
    if (a < z)
      part += normal_pdf(a) - normal_pdf(z) - a * (normal_cdf(z) - normal_cdf(a));
    r += 0.5 * part;
  }
  return r;
}

inline double
risk_exp(double theta)
{
  const double e_half = std::exp(0.5);
  double r = 0.0;
  for (double z : atoms)
    r += 0.5 * e_half *
         (std::exp(theta * z) * numeric::normal_upper_tail(z + 1.0) +
          std::exp(-theta * z) * numeric::normal_cdf(z - 1.0));
  return r;
}

//! Central difference of f at theta.
template<class F>
double
slope(F&& f, double theta, double h = 1e-5)
{
  return (f(theta + h) - f(theta - h)) / (2.0 * h);
}

} // namespace toy

struct ToyRiskTable
{
  std::vector<double> theta_grid;
  std::vector<double> risk01;
  std::vector<double> risk_hinge;
  std::vector<double> risk_exp;
  std::vector<double> slope_hinge;
  std::vector<double> slope_exp;

  //! Grid point minimizing the 0-1 risk (first one on ties).
  double argmin01() const
  {
    std::size_t best = 0;
    for (std::size_t i = 1; i < risk01.size(); ++i)
      if (risk01[i] < risk01[best])
        best = i;
    return theta_grid.at(best);
  }
};

inline ToyRiskTable
toy_population_risks(const std::vector<double>& grid)
{
  ToyRiskTable t;
  for (double th : grid) {
    detail::require(std::isfinite(th), "toy grid must be finite");
    t.theta_grid.push_back(th);
    t.risk01.push_back(toy::risk01(th));
    t.risk_hinge.push_back(toy::risk_hinge(th));
    t.risk_exp.push_back(toy::risk_exp(th));
    t.slope_hinge.push_back(toy::slope(toy::risk_hinge, th));
    t.slope_exp.push_back(toy::slope(toy::risk_exp, th));
  }
  return t;
}

//! lo, lo + step, ..., hi (inclusive within half a step), computed by index.
inline std::vector<double>
uniform_grid(double lo, double hi, double step)
{
  detail::require(step > 0.0 && hi >= lo, "grid needs step > 0 and hi >= lo");
  std::vector<double> g;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 0.5));
  for (long i = 0; i <= count; ++i)
    g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

} // namespace smooth_threshold
