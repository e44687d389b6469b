#pragma once

#include "error.hpp"
#include "kernels.hpp"
#include "numeric.hpp"
#include "risk.hpp"
#include "rng.hpp"
#include "simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace smooth_threshold {

// Outcome of a numerical probe: echoed inputs, measured scalars, tables,
// and a verdict against the recorded tolerance.
struct ProbeReport
{
  struct Table
  {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
  };

  std::string probe;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, double>> values;
  std::vector<Table> tables;
  bool passed = true;
  double tolerance = 0.0;
  std::vector<std::string> notes;

  double value(const std::string& key) const
  {
    for (const auto& [k, v] : values)
      if (k == key)
        return v;
    throw InputError("probe report has no value '" + key + "'");
  }
};

//! Least-squares slope of log(y) against log(x).
inline double
log_log_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  detail::require(x.size() == y.size() && x.size() >= 2, "slope needs >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Gradient check

// Central differences of the empirical risk against the analytic gradient.
// Deviation of coordinate j is |g_j - fd_j| / |g|_inf. For compactly
// supported kernels, coordinates touched by a sample whose scaled margin
// sits on the support edge (where the gradient jumps) are skipped.
inline ProbeReport
gradient_check(const SmoothedRisk& risk,
               const Vector& theta,
               double step = 1e-5,
               double tolerance = 1e-6)
{
  detail::require(step > 0.0, "finite-difference step must be positive");
  ProbeReport rep;
  rep.probe = "gradient_check";
  rep.tolerance = tolerance;
  rep.inputs = { { "kernel", risk.loss().kernel().name() },
                 { "delta", std::to_string(risk.loss().bandwidth()) },
                 { "n", std::to_string(risk.data().n()) },
                 { "d", std::to_string(risk.dim()) },
                 { "step", std::to_string(step) } };

  const Vector g = risk.gradient(theta);
  const Eigen::Index d = risk.dim();
  std::vector<bool> skip(static_cast<std::size_t>(d), false);
  const Kernel& k = risk.loss().kernel();
  if (k.compact()) {
    const Vector u = risk.margins(theta);
    const double delta = risk.loss().bandwidth();
    const double edge = k.support_radius();
    const double zmax = risk.data().z().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double gap = std::abs(std::abs(u(i) / delta) - edge) * delta;
      const double reach = step * (1.0 + theta.cwiseAbs().maxCoeff()) * (zmax + 1.0);
      if (gap <= reach)
        for (Eigen::Index j = 0; j < d; ++j)
          if (risk.data().z()(i, j) != 0.0)
            skip[static_cast<std::size_t>(j)] = true;
    }
  }

  const double scale = g.lpNorm<Eigen::Infinity>();
  double worst = 0.0;
  int skipped = 0;
  ProbeReport::Table table{ "coordinates", { "j", "analytic", "finite_difference" }, {} };
  for (Eigen::Index j = 0; j < d; ++j) {
    if (skip[static_cast<std::size_t>(j)]) {
      ++skipped;
      continue;
    }
    const double h = step * (1.0 + std::abs(theta(j)));
    Vector plus = theta, minus = theta;
    plus(j) += h;
    minus(j) -= h;
    const double fd = (risk.risk(plus) - risk.risk(minus)) / (2.0 * h);
    const double diff = std::abs(fd - g(j));
    const double rel = scale > 0.0 ? diff / scale : diff;
    worst = std::max(worst, rel);
    table.rows.push_back({ static_cast<double>(j), g(j), fd });
  }
  rep.values = { { "max_relative_deviation", worst },
                 { "gradient_sup_norm", scale },
                 { "skipped_coordinates", static_cast<double>(skipped) } };
  rep.tables.push_back(std::move(table));
  if (skipped > 0)
    rep.notes.push_back("nondifferentiable point skipped (" + std::to_string(skipped) +
                        " coordinates)");
  rep.passed = worst < tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Variance probe

// Monte Carlo population gradients at theta for several bandwidths, with
// unit weights, streaming the simulation in chunks. Row i of the population
// sample is row i of generate(sim), so a dataset generated from `sim`
// reproduces these draws exactly.
inline std::vector<Vector>
population_gradient_mc(const SimSpec& sim,
                       const Kernel& kernel,
                       const std::vector<double>& deltas,
                       const Vector& theta,
                       Eigen::Index chunk = 8192)
{
  sim.validate();
  std::vector<std::vector<Vector>> partial(deltas.size());
  for (Eigen::Index start = 0; start < sim.n; start += chunk) {
    const Eigen::Index end = std::min(sim.n, start + chunk);
    auto data = std::make_shared<const Dataset>(generate_rows(sim, start, end));
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      SmoothedRisk r(data, SurrogateLoss(kernel, deltas[k]), WeightScheme::unit());
      partial[k].push_back(r.gradient(theta) * static_cast<double>(end - start));
    }
  }
  std::vector<Vector> out;
  for (auto& parts : partial)
    out.push_back(numeric::pairwise_reduce(parts) / static_cast<double>(sim.n));
  return out;
}

struct VarianceProbeOptions
{
  int repetitions = 50;
  Eigen::Index population_size = 1000000;
  std::uint64_t seed = 0;
  //! Evaluation point; unset means the model's theta*.
  std::optional<Vector> theta;
};

struct VarianceRow
{
  double delta;
  double mean_deviation;
  double sd_deviation;
};

// Mean over repetitions of |grad R^n_delta(theta) - grad R_delta(theta)|_inf,
// the population gradient estimated from an independent large sample.
inline std::vector<VarianceRow>
variance_probe(const SimSpec& sim,
               const Kernel& kernel,
               const std::vector<double>& deltas,
               const VarianceProbeOptions& opts,
               ProbeReport* report = nullptr)
{
  sim.validate();
  detail::require(!deltas.empty(), "delta grid is empty");
  detail::require(opts.repetitions >= 1, "repetitions must be positive");
  const Vector theta = opts.theta.value_or(sim.resolved_theta());
  detail::require(theta.size() == sim.d, "evaluation point has the wrong dimension");

  const CounterRng root(opts.seed);
  SimSpec pop = sim;
  pop.n = opts.population_size;
  pop.seed = root.split(0).at(0);
  const auto population = population_gradient_mc(pop, kernel, deltas, theta);

  std::vector<std::vector<double>> dev(deltas.size());
  for (int r = 0; r < opts.repetitions; ++r) {
    SimSpec rep = sim;
    rep.seed = root.split(static_cast<std::uint64_t>(r) + 1).at(0);
    auto data = std::make_shared<const Dataset>(generate(rep).data);
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      SmoothedRisk risk(data, SurrogateLoss(kernel, deltas[k]), WeightScheme::unit());
      dev[k].push_back((risk.gradient(theta) - population[k]).lpNorm<Eigen::Infinity>());
    }
  }

  std::vector<VarianceRow> rows;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    double m = 0.0;
    for (double v : dev[k])
      m += v;
    m /= static_cast<double>(dev[k].size());
    double ss = 0.0;
    for (double v : dev[k])
      ss += (v - m) * (v - m);
    const double sd =
      dev[k].size() > 1 ? std::sqrt(ss / static_cast<double>(dev[k].size() - 1)) : 0.0;
    rows.push_back({ deltas[k], m, sd });
  }

  if (report) {
    report->probe = "variance_probe";
    report->inputs = { { "model", to_string(sim.model) },
                       { "n", std::to_string(sim.n) },
                       { "d", std::to_string(sim.d) },
                       { "kernel", kernel.name() },
                       { "repetitions", std::to_string(opts.repetitions) },
                       { "population_size", std::to_string(opts.population_size) } };
    ProbeReport::Table t{ "deviation", { "delta", "mean_deviation", "sd_deviation" }, {} };
    for (const auto& r : rows)
      t.rows.push_back({ r.delta, r.mean_deviation, r.sd_deviation });
    report->tables.push_back(std::move(t));
    if (rows.size() >= 2) {
      std::vector<double> xs, ys;
      for (const auto& r : rows) {
        xs.push_back(r.delta);
        ys.push_back(r.mean_deviation);
      }
      report->values.push_back({ "log_log_slope", log_log_slope(xs, ys) });
    }
    report->passed = true;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Bias probe

namespace detail {

// Conditional mean model, unit weights, theta with Delta = theta* - theta.
// With s^2 = |Delta|^2 + sigma^2 and a symmetric kernel,
//   v' grad R_delta(theta) = (v'Delta / s^2) * int (delta t - mu) phi_s(delta t - mu) K(t) dt
//   v' grad R(theta)       = -(v'Delta / s^2) * mu phi_s(mu).
// Returns the two integrals (without the v'Delta / s^2 factor).
inline std::pair<double, double>
conditional_mean_gradient_factors(const Kernel& kernel,
                                  double delta,
                                  double mu,
                                  double s)
{
  auto phi_s = [s](double c) { return numeric::normal_pdf(c / s) / s; };
  const double r = kernel.quadrature_radius();
  const double smooth =
    numeric::integrate(
      [&](double t) {
        const double c = delta * t - mu;
        return c * phi_s(c) * kernel(t);
      },
      -r,
      r,
      1e-12,
      "smoothed population gradient")
      .value;
  return { smooth, -mu * phi_s(mu) };
}

} // namespace detail

struct BiasRow
{
  double delta;
  double bias;
};

// max over directions v of |v'(grad R_delta(theta) - grad R(theta))| for the
// conditional mean model, where X | Y, Z is Gaussian. Both population
// gradients are computed by quadrature. At theta = theta* both vanish for
// this model (Z is independent of the margin), so the smoothing bias is
// only visible away from theta*.
inline std::vector<BiasRow>
bias_probe(const SimSpec& sim,
           const Kernel& kernel,
           const std::vector<double>& deltas,
           const Vector& theta,
           std::vector<Vector> directions = {},
           ProbeReport* report = nullptr)
{
  if (sim.model != SimModel::conditional_mean)
    throw InputError("bias_probe needs the conditional mean model (closed-form density)");
  sim.validate();
  detail::require(theta.size() == sim.d, "evaluation point has the wrong dimension");
  detail::require(!deltas.empty(), "delta grid is empty");
  const Vector offset = sim.resolved_theta() - theta;
  if (directions.empty())
    for (Eigen::Index j = 0; j < sim.d; ++j)
      if (offset(j) != 0.0)
        directions.push_back(Vector::Unit(sim.d, j));
  for (const auto& v : directions)
    detail::require(v.size() == sim.d, "direction has the wrong dimension");

  const double s = std::sqrt(offset.squaredNorm() + sim.noise_sd * sim.noise_sd);
  std::vector<BiasRow> rows;
  for (double delta : deltas) {
    detail::require(delta > 0.0, "bandwidths must be positive");
    double worst = 0.0;
    if (offset.squaredNorm() > 0.0 && !directions.empty()) {
      const auto [smooth, exact] =
        detail::conditional_mean_gradient_factors(kernel, delta, sim.mu, s);
      for (const auto& v : directions)
        worst = std::max(worst, std::abs(v.dot(offset) / (s * s) * (smooth - exact)));
    }
    rows.push_back({ delta, worst });
  }

  if (report) {
    report->probe = "bias_probe";
    report->inputs = { { "model", to_string(sim.model) },
                       { "d", std::to_string(sim.d) },
                       { "mu", std::to_string(sim.mu) },
                       { "noise_sd", std::to_string(sim.noise_sd) },
                       { "kernel", kernel.name() },
                       { "directions", std::to_string(directions.size()) } };
    ProbeReport::Table t{ "bias", { "delta", "bias" }, {} };
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      t.rows.push_back({ r.delta, r.bias });
      if (r.bias > 0.0) {
        xs.push_back(r.delta);
        ys.push_back(r.bias);
      }
    }
    report->tables.push_back(std::move(t));
    if (xs.size() >= 2)
      report->values.push_back({ "log_log_slope", log_log_slope(xs, ys) });
    else
      report->notes.push_back("bias vanishes on the grid; no slope");
    report->passed = true;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Restricted curvature probe

struct CurvatureOptions
{
  Eigen::Index support_size = 1;
  int num_directions = 100;
  double ball_radius = 1.0;
  std::uint64_t seed = 0;
  double step = 1e-3;
};

struct CurvatureResult
{
  double rho_minus;
  double rho_plus;
  ProbeReport report;
};

namespace detail {

inline Vector
random_sparse_unit(Eigen::Index d, Eigen::Index k, CounterRng& rng)
{
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    idx[static_cast<std::size_t>(j)] = j;
  for (Eigen::Index i = 0; i < k; ++i) // partial Fisher-Yates
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(i) +
                  rng.below(static_cast<std::uint64_t>(d - i))]);
  Vector v = Vector::Zero(d);
  for (Eigen::Index i = 0; i < k; ++i)
    v(idx[static_cast<std::size_t>(i)]) = rng.normal();
  const double norm = v.norm();
  return norm > 0 ? Vector(v / norm) : Vector(Vector::Unit(d, idx[0]));
}

} // namespace detail

// Second difference [R(theta + h v) - 2 R(theta) + R(theta - h v)] / h^2
// along random sparse unit directions v at random sparse base points in the
// ball. Direction i uses its own stream, so a longer run extends a shorter
// one and can only tighten the reported [rho-, rho+] range.
template<class RiskFn>
CurvatureResult
restricted_curvature_probe(RiskFn&& risk, Eigen::Index d, const CurvatureOptions& opts)
{
  detail::require(d >= 1, "dimension must be positive");
  detail::require(opts.support_size >= 1 && opts.support_size <= d,
                  "support size must lie in [1, d]");
  detail::require(opts.num_directions >= 1, "need at least one direction");
  detail::require(opts.ball_radius > opts.step, "ball radius must exceed the step");
  const CounterRng root = CounterRng(opts.seed).split(0xc0de);
  const double h = opts.step;

  double lo = infinity, hi = -infinity;
  for (int i = 0; i < opts.num_directions; ++i) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(i));
    const Vector v = detail::random_sparse_unit(d, opts.support_size, rng);
    const double rho = (opts.ball_radius - h) * rng.uniform();
    const Vector base = rho * detail::random_sparse_unit(d, opts.support_size, rng);
    const double c =
      (risk(Vector(base + h * v)) - 2.0 * risk(base) + risk(Vector(base - h * v))) / (h * h);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }

  CurvatureResult out{ lo, hi, {} };
  auto& rep = out.report;
  rep.probe = "restricted_curvature_probe";
  rep.inputs = { { "d", std::to_string(d) },
                 { "support_size", std::to_string(opts.support_size) },
                 { "num_directions", std::to_string(opts.num_directions) },
                 { "ball_radius", std::to_string(opts.ball_radius) },
                 { "seed", std::to_string(opts.seed) },
                 { "step", std::to_string(h) } };
  rep.values = { { "rho_minus", lo }, { "rho_plus", hi } };
  rep.passed = lo > 0.0;
  if (!rep.passed)
    rep.notes.push_back("RSC not certified: observed curvature <= 0");
  return out;
}

inline CurvatureResult
restricted_curvature_probe(const SmoothedRisk& risk, const CurvatureOptions& opts)
{
  return restricted_curvature_probe([&risk](const Vector& t) { return risk.risk(t); },
                                    risk.dim(),
                                    opts);
}

} // namespace smooth_threshold
