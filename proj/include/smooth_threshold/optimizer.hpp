#pragma once

#include "error.hpp"
#include "numeric.hpp"
#include "risk.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace smooth_threshold {

//! Coordinatewise sign(v_j) max(|v_j| - tau, 0); |v_j| == tau maps to 0.
inline Vector
soft_threshold(const Vector& v, double tau)
{
  detail::require(tau >= 0.0, "threshold must be nonnegative");
  return v.unaryExpr([tau](double x) {
    const double m = std::abs(x) - tau;
    if (m <= 0.0)
      return 0.0;
    return x > 0 ? m : -m;
  });
}

//! Euclidean projection onto the ball of radius R (R may be infinite).
inline Vector
project_ball(const Vector& v, double radius)
{
  detail::require(radius > 0.0, "ball radius must be positive");
  if (std::isinf(radius))
    return v;
  const double norm = v.norm();
  if (norm <= radius)
    return v;
  return v * (radius / norm);
}

//! One proximal-gradient step from theta given the gradient there.
inline Vector
prox_step_from_gradient(const Vector& theta,
                        const Vector& gradient,
                        double lambda,
                        double eta,
                        double radius)
{
  return project_ball(soft_threshold(theta - eta * gradient, lambda * eta), radius);
}

inline Vector
prox_step(const SmoothedRisk& risk,
          const Vector& theta,
          double lambda,
          double eta,
          double radius)
{
  detail::require(lambda > 0.0 && eta > 0.0, "lambda and eta must be positive");
  return prox_step_from_gradient(theta, risk.gradient(theta), lambda, eta, radius);
}

// min over subgradients xi of |g + lambda xi|_inf, in closed form:
// |g_j + lambda sign(theta_j)| on the support, max(|g_j| - lambda, 0) off it.
inline double
suboptimality_from_gradient(const Vector& gradient, const Vector& theta, double lambda)
{
  double omega = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double g = gradient(j);
    const double t = theta(j);
    const double r = t != 0.0 ? std::abs(g + (t > 0 ? lambda : -lambda))
                              : std::max(std::abs(g) - lambda, 0.0);
    omega = std::max(omega, r);
  }
  return omega;
}

inline double
suboptimality(const SmoothedRisk& risk, const Vector& theta, double lambda)
{
  detail::require(lambda > 0.0, "lambda must be positive");
  return suboptimality_from_gradient(risk.gradient(theta), theta, lambda);
}

enum class SolverStatus
{
  converged,
  max_iterations
};

inline const char*
to_string(SolverStatus s)
{
  return s == SolverStatus::converged ? "converged" : "max_iterations";
}

struct InnerOptions
{
  double eta = 1.0;
  double radius = infinity;
  int max_iters = 10000;
  //! Halve eta whenever a step violates sufficient decrease.
  bool backtracking = true;
};

struct StageRecord
{
  int stage = 0;
  double lambda = 0.0;
  double tolerance = 0.0;
  int iterations = 0;
  double exit_omega = 0.0;
  Vector theta;
  //! Penalized objective at theta^0, theta^1, ..., theta^k.
  std::vector<double> objective_trace;
  Eigen::Index nnz = 0;
  SolverStatus status = SolverStatus::converged;
  double eta = 1.0;
  bool boundary_active = false;
  //! False if some step raised the objective by more than 1e-12 (possible
  //! only without backtracking, when eta exceeds 1 / rho+).
  bool monotone = true;
};

// Proximal-gradient iterations at fixed lambda until the suboptimality of
// the current iterate drops to eps (checked after each update) or max_iters
// is reached. The objective trace is non-increasing; with backtracking the
// step size is halved until
//   f(S(theta)) <= f(theta) - |S(theta) - theta|^2 / (2 eta).
inline StageRecord
proximal_gradient(const SmoothedRisk& risk,
                  double lambda,
                  double eps,
                  const Vector& theta0,
                  const InnerOptions& opts = {})
{
  detail::require(lambda > 0.0, "lambda must be positive");
  detail::require(eps > 0.0, "eps must be positive");
  detail::require(opts.eta > 0.0, "step size must be positive");
  detail::require(opts.max_iters >= 1, "max_iters must be at least 1");
  detail::require(theta0.size() == risk.dim(), "theta0 has the wrong dimension");
  detail::require(std::isinf(opts.radius) ||
                    theta0.norm() <= opts.radius * (1.0 + 1e-12),
                  "theta0 must lie in the constraint ball");

  StageRecord rec;
  rec.lambda = lambda;
  rec.tolerance = eps;
  rec.theta = theta0;

  auto penalized = [lambda](double risk, const Vector& th) {
    return risk + lambda * th.lpNorm<1>();
  };

  double eta = opts.eta;
  auto current = risk.risk_and_gradient(rec.theta);
  double f = penalized(current.risk, rec.theta);
  rec.objective_trace.push_back(f);
  double omega = suboptimality_from_gradient(current.gradient, rec.theta, lambda);

  int k = 0;
  while (omega > eps && k < opts.max_iters) {
    Vector next;
    RiskAndGradient next_eval;
    double f_next = 0.0;
    for (int halvings = 0;; ++halvings) {
      next = prox_step_from_gradient(rec.theta, current.gradient, lambda, eta, opts.radius);
      next_eval = risk.risk_and_gradient(next);
      f_next = penalized(next_eval.risk, next);
      if (!opts.backtracking || halvings >= 60)
        break;
      const double decrease = (next - rec.theta).squaredNorm() / (2.0 * eta);
      if (f_next <= f - decrease + 1e-15 * std::abs(f))
        break;
      eta *= 0.5;
    }
    rec.theta = std::move(next);
    current = std::move(next_eval);
    f = f_next;
    rec.objective_trace.push_back(f);
    omega = suboptimality_from_gradient(current.gradient, rec.theta, lambda);
    ++k;
  }

  rec.iterations = k;
  rec.exit_omega = omega;
  rec.status = omega <= eps ? SolverStatus::converged : SolverStatus::max_iterations;
  rec.eta = eta;
  rec.nnz = static_cast<Eigen::Index>((rec.theta.array() != 0.0).count());
  rec.boundary_active =
    std::isfinite(opts.radius) && rec.theta.norm() >= opts.radius * (1.0 - 1e-9);
  for (std::size_t i = 1; i < rec.objective_trace.size(); ++i)
    if (rec.objective_trace[i] > rec.objective_trace[i - 1] + 1e-12)
      rec.monotone = false;
  return rec;
}

// Controls of the path-following solver. Exactly one of phi / num_stages
// drives the lambda schedule.
struct PathConfig
{
  //! Starting lambda; unset means |grad R(0)|_inf.
  std::optional<double> lambda0;
  double lambda_tgt = 0.0;
  std::optional<double> phi;
  std::optional<int> num_stages = 10;
  double nu = 0.25;
  double eta = 1.0;
  //! Final-stage tolerance; unset means 1e-4 * lambda_tgt.
  std::optional<double> eps_tgt;
  double omega_radius = 10.0;
  int max_inner_iters = 10000;
  bool backtracking = true;

  void validate() const
  {
    detail::require(std::isfinite(lambda_tgt) && lambda_tgt > 0.0,
                    "lambda_tgt must be positive");
    detail::require(phi.has_value() != num_stages.has_value(),
                    "exactly one of phi and num_stages must be set");
    if (phi)
      detail::require(*phi > 0.0 && *phi < 1.0, "phi must lie in (0, 1)");
    if (num_stages)
      detail::require(*num_stages >= 1, "num_stages must be positive");
    if (lambda0)
      detail::require(*lambda0 > 0.0, "lambda0 must be positive");
    detail::require(nu > 0.0 && nu < 1.0, "nu must lie in (0, 1)");
    detail::require(eta > 0.0, "eta must be positive");
    if (eps_tgt)
      detail::require(*eps_tgt > 0.0, "eps_tgt must be positive");
    detail::require(omega_radius > 0.0, "omega radius must be positive");
    detail::require(max_inner_iters >= 1, "max_inner_iters must be positive");
  }

  double resolved_eps_tgt() const { return eps_tgt.value_or(1e-4 * lambda_tgt); }
};

struct SolutionPath
{
  std::vector<StageRecord> stages;
  Vector theta_final;
  //! Echo of the configuration with lambda0, phi, num_stages, eps_tgt resolved.
  PathConfig config;
  std::vector<std::string> warnings;
  //! Non-fatal observations, e.g. warm starts outside the lambda/2 region.
  std::vector<std::string> diagnostics;
  //! omega_{lambda_{t+1}}(theta_t) measured at each warm start.
  std::vector<double> warm_start_omega;

  bool converged() const
  {
    return std::all_of(stages.begin(), stages.end(), [](const auto& s) {
      return s.status == SolverStatus::converged;
    });
  }

  const StageRecord& final_stage() const { return stages.back(); }

  int total_iterations() const
  {
    int total = 0;
    for (const auto& s : stages)
      total += s.iterations;
    return total;
  }
};

namespace detail {

inline std::string
format_number(double v)
{
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

} // namespace detail

// Homotopy path following: lambda_t = phi^t lambda_0, each stage solved to
// tolerance nu * lambda_t and warm-started from the previous one, then a
// final stage at lambda_tgt with tolerance eps_tgt. Stage 0 is the origin
// at lambda_0.
inline SolutionPath
path_following(const SmoothedRisk& risk, const PathConfig& config)
{
  config.validate();
  SolutionPath path;
  path.config = config;

  const Eigen::Index d = risk.dim();
  const double lambda_tgt = config.lambda_tgt;
  const double lambda0 = config.lambda0.value_or(
    risk.gradient(Vector::Zero(d)).lpNorm<Eigen::Infinity>());
  const double eps_tgt = config.resolved_eps_tgt();
  path.config.lambda0 = lambda0;
  path.config.eps_tgt = eps_tgt;

  InnerOptions inner;
  inner.eta = config.eta;
  inner.radius = config.omega_radius;
  inner.max_iters = config.max_inner_iters;
  inner.backtracking = config.backtracking;

  std::vector<double> lambdas;
  if (!(lambda_tgt < lambda0)) {
    if (lambda_tgt > lambda0)
      path.warnings.push_back("lambda_tgt (" + detail::format_number(lambda_tgt) +
                              ") exceeds lambda0 (" + detail::format_number(lambda0) +
                              "); running a single stage at lambda_tgt");
    path.config.phi.reset();
    path.config.num_stages = 0;
  } else {
    int stages = 0;
    double phi = 0.0;
    if (config.num_stages) {
      stages = *config.num_stages;
      phi = std::pow(lambda_tgt / lambda0, 1.0 / stages);
    } else {
      phi = *config.phi;
      stages = static_cast<int>(
        std::ceil(std::log(lambda_tgt / lambda0) / std::log(phi) - 1e-12));
      stages = std::max(stages, 1);
    }
    path.config.phi = phi;
    path.config.num_stages = stages;
    lambdas.push_back(lambda0);
    for (int t = 1; t < stages; ++t)
      lambdas.push_back(std::pow(phi, t) * lambda0);
  }
  lambdas.push_back(lambda_tgt);

  Vector theta = Vector::Zero(d);
  for (std::size_t t = 0; t < lambdas.size(); ++t) {
    const bool last = t + 1 == lambdas.size();
    const double tol = last ? eps_tgt : config.nu * lambdas[t];
    if (t > 0)
      path.warm_start_omega.push_back(suboptimality(risk, theta, lambdas[t]));
    inner.eta = path.stages.empty() ? config.eta : path.stages.back().eta;
    StageRecord rec = proximal_gradient(risk, lambdas[t], tol, theta, inner);
    rec.stage = static_cast<int>(t);
    if (rec.status != SolverStatus::converged)
      path.warnings.push_back("stage " + std::to_string(t) +
                              " hit max_inner_iters with omega " +
                              detail::format_number(rec.exit_omega));
    if (!rec.monotone)
      path.warnings.push_back("stage " + std::to_string(t) +
                              " objective increased; eta exceeds the smoothness bound");
    if (rec.boundary_active)
      path.warnings.push_back("stage " + std::to_string(t) +
                              " ended on the constraint boundary");
    theta = rec.theta;
    path.stages.push_back(std::move(rec));
  }

  for (std::size_t t = 0; t < path.warm_start_omega.size(); ++t) {
    const double lam = path.stages[t + 1].lambda;
    if (path.warm_start_omega[t] > 0.5 * lam)
      path.diagnostics.push_back("warm start for stage " + std::to_string(t + 1) +
                              " has omega " +
                              detail::format_number(path.warm_start_omega[t]) +
                              " > lambda/2");
  }
  path.theta_final = theta;
  return path;
}

} // namespace smooth_threshold
