#pragma once

#include "error.hpp"
#include "kernels.hpp"
#include "numeric.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "risk.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace smooth_threshold {

// Inputs of the rate-optimal choices
//   delta = c_delta (s log d / n)^{1 / (2 beta + 1)},
//   lambda = C_lambda sqrt(log d / (n delta)).
// Natural logarithms throughout.
struct TuningSchedule
{
  Eigen::Index n = 1;
  Eigen::Index d = 2;
  Eigen::Index s = 1;
  double beta = 1.0;
  double c_delta = 1.0;
  double C_lambda = 1.0;

  void validate() const
  {
    detail::require(n >= 1 && s >= 1, "n and s must be positive");
    detail::require(d >= 2, "theory-driven tuning needs d >= 2 (log d > 0)");
    detail::require(beta > 0.0, "beta must be positive");
    detail::require(c_delta > 0.0 && C_lambda >= 0.0,
                    "c_delta must be positive and C_lambda nonnegative");
  }
};

inline double
theoretical_bandwidth(const TuningSchedule& t)
{
  t.validate();
  const double base = static_cast<double>(t.s) * std::log(static_cast<double>(t.d)) /
                      static_cast<double>(t.n);
  return t.c_delta * std::pow(base, 1.0 / (2.0 * t.beta + 1.0));
}

inline double
target_lambda(Eigen::Index n, Eigen::Index d, double delta, double C_lambda)
{
  detail::require(n >= 1, "n must be positive");
  detail::require(d >= 2, "theory-driven tuning needs d >= 2 (log d > 0)");
  detail::require(delta > 0.0, "delta must be positive");
  return C_lambda * std::sqrt(std::log(static_cast<double>(d)) /
                              (static_cast<double>(n) * delta));
}

// ---------------------------------------------------------------------------
// Lepski grids

struct LepskiGrid
{
  enum class Kind
  {
    bandwidth,
    sparsity
  };
  Kind kind;
  int m;
  //! bandwidth: 1, 1/2, ..., 2^-m; sparsity: 1, 2, ..., 2^m.
  std::vector<double> values;
};

// Bandwidth: smallest m with 2^-m <= 1/n <= 2^-(m-1).
// Sparsity: smallest m with 2^m <= d <= 2^(m+1).
inline LepskiGrid
build_lepski_grid(LepskiGrid::Kind kind, Eigen::Index size)
{
  detail::require(size >= 2, "Lepski grids need n >= 2 (bandwidth) or d >= 2 (sparsity)");
  const auto v = static_cast<std::uint64_t>(size);
  LepskiGrid g{ kind, 0, {} };
  if (kind == LepskiGrid::Kind::bandwidth) {
    int m = 1;
    while (!((std::uint64_t{ 1 } << (m - 1)) <= v && v <= (std::uint64_t{ 1 } << m)))
      ++m;
    g.m = m;
    for (int i = 0; i <= m; ++i)
      g.values.push_back(std::ldexp(1.0, -i));
  } else {
    int m = 0;
    while (!((std::uint64_t{ 1 } << m) <= v && v <= (std::uint64_t{ 1 } << (m + 1))))
      ++m;
    g.m = m;
    for (int i = 0; i <= m; ++i)
      g.values.push_back(std::ldexp(1.0, i));
  }
  return g;
}

//! One fit on a tuning grid.
struct GridFit
{
  double grid_value = 0.0;
  double delta = 0.0;
  double lambda = 0.0;
  Vector theta;
  bool ok = false;
  bool converged = false;
  std::string message;
};

// delta-hat = max{delta in D : |theta_delta - theta_delta'|_2 <=
//   c sqrt(s log d / (n delta')) for all delta' <= delta in D}.
// Grid points whose fit failed are skipped. Returns nullopt when the
// feasible set is empty.
inline std::optional<std::size_t>
select_lepski_bandwidth(const std::vector<GridFit>& fits,
                        Eigen::Index n,
                        Eigen::Index d,
                        Eigen::Index s,
                        double c_sel)
{
  const double scale = static_cast<double>(s) * std::log(static_cast<double>(d)) /
                       static_cast<double>(n);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].ok)
      continue;
    bool feasible = true;
    for (std::size_t j = 0; j < fits.size() && feasible; ++j) {
      if (!fits[j].ok || fits[j].grid_value > fits[i].grid_value)
        continue;
      const double bound = c_sel * std::sqrt(scale / fits[j].grid_value);
      feasible = (fits[i].theta - fits[j].theta).norm() <= bound;
    }
    if (feasible && (!best || fits[i].grid_value > fits[*best].grid_value))
      best = i;
  }
  return best;
}

// s-hat = min{s in D' : |theta_s - theta_s'|_2 <=
//   c_bar (s' log d / n)^{beta / (2 beta + 1)} for all s' >= s in D'}.
inline std::optional<std::size_t>
select_lepski_sparsity(const std::vector<GridFit>& fits,
                       Eigen::Index n,
                       Eigen::Index d,
                       double beta,
                       double c_bar)
{
  const double logd = std::log(static_cast<double>(d));
  const double expo = beta / (2.0 * beta + 1.0);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].ok)
      continue;
    bool feasible = true;
    for (std::size_t j = 0; j < fits.size() && feasible; ++j) {
      if (!fits[j].ok || fits[j].grid_value < fits[i].grid_value)
        continue;
      const double bound =
        c_bar * std::pow(fits[j].grid_value * logd / static_cast<double>(n), expo);
      feasible = (fits[i].theta - fits[j].theta).norm() <= bound;
    }
    if (feasible && (!best || fits[i].grid_value < fits[*best].grid_value))
      best = i;
  }
  return best;
}

//! Outcome of a Lepski selection over a set of grid fits.
struct LepskiSelection
{
  double value = 0.0;
  bool default_branch = false;
  //! Index of the selected fit; unset on the default branch.
  std::optional<std::size_t> index;
};

// The extreme grid point (smallest delta, largest s) always passes its own
// comparison, so the feasible set can only be empty when no grid fit
// succeeded. The default values are 1/n and 2^m respectively.
inline LepskiSelection
resolve_bandwidth_selection(const std::vector<GridFit>& fits,
                            Eigen::Index n,
                            Eigen::Index d,
                            Eigen::Index s,
                            double c_sel)
{
  if (auto pick = select_lepski_bandwidth(fits, n, d, s, c_sel))
    return { fits[*pick].grid_value, false, pick };
  return { 1.0 / static_cast<double>(n), true, std::nullopt };
}

inline LepskiSelection
resolve_sparsity_selection(const std::vector<GridFit>& fits,
                           Eigen::Index n,
                           Eigen::Index d,
                           double beta,
                           double c_bar)
{
  if (auto pick = select_lepski_sparsity(fits, n, d, beta, c_bar))
    return { fits[*pick].grid_value, false, pick };
  const LepskiGrid grid = build_lepski_grid(LepskiGrid::Kind::sparsity, d);
  return { grid.values.back(), true, std::nullopt };
}

struct LepskiResult
{
  //! Selected delta (bandwidth adaptation) or s (sparsity adaptation).
  double selected = 0.0;
  bool default_branch = false;
  double delta = 0.0;
  double lambda = 0.0;
  Vector theta;
  std::vector<GridFit> fits;
  //! Number of path-following runs performed.
  int fit_count = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline GridFit
fit_grid_point(const std::shared_ptr<const Dataset>& data,
               const Kernel& kernel,
               const WeightScheme& weights,
               double grid_value,
               double delta,
               double lambda,
               const PathConfig& base)
{
  GridFit fit;
  fit.grid_value = grid_value;
  fit.delta = delta;
  fit.lambda = lambda;
  try {
    SmoothedRisk risk(data, SurrogateLoss(kernel, delta), weights);
    PathConfig cfg = base;
    cfg.lambda_tgt = lambda;
    const auto path = path_following(risk, cfg);
    fit.theta = path.theta_final;
    fit.ok = true;
    fit.converged = path.converged();
  } catch (const std::exception& e) {
    fit.theta = Vector::Zero(data->d());
    fit.ok = false;
    fit.message = e.what();
  }
  return fit;
}

inline void
note_failures(LepskiResult& res, const char* label)
{
  for (const auto& f : res.fits)
    if (!f.ok)
      res.warnings.push_back(std::string("fit at ") + label + "=" +
                             std::to_string(f.grid_value) +
                             " failed and was excluded: " + f.message);
}

} // namespace detail

struct LepskiBandwidthOptions
{
  Eigen::Index s = 1;
  double c_sel = 2.0;
  double C_lambda = 1.0;
  PathConfig path;
  unsigned threads = 1;
};

// Bandwidth adaptation for known sparsity: fit every delta in the dyadic
// grid D with lambda_delta = C sqrt(log d / (n delta)), then select the
// largest delta whose fit stays within c sqrt(s log d / (n delta')) of every
// fit at delta' <= delta.
inline LepskiResult
lepski_bandwidth(const Dataset& data_in,
                 const Kernel& kernel,
                 const WeightScheme& weights,
                 const LepskiBandwidthOptions& opts)
{
  auto data = std::make_shared<const Dataset>(data_in);
  const Eigen::Index n = data->n();
  const Eigen::Index d = data->d();
  detail::require(d >= 2, "Lepski adaptation needs d >= 2");
  detail::require(opts.s >= 1, "s must be positive");
  detail::require(opts.c_sel >= 0.0, "c_sel must be nonnegative");
  const LepskiGrid grid = build_lepski_grid(LepskiGrid::Kind::bandwidth, n);

  LepskiResult res;
  res.fits.resize(grid.values.size());
  parallel_for(grid.values.size(), opts.threads, [&](std::size_t i) {
    const double delta = grid.values[i];
    res.fits[i] = detail::fit_grid_point(
      data, kernel, weights, delta, delta, target_lambda(n, d, delta, opts.C_lambda),
      opts.path);
  });
  res.fit_count = static_cast<int>(grid.values.size());
  detail::note_failures(res, "delta");

  const auto sel = resolve_bandwidth_selection(res.fits, n, d, opts.s, opts.c_sel);
  res.selected = sel.value;
  res.default_branch = sel.default_branch;
  if (sel.index) {
    const auto& f = res.fits[*sel.index];
    res.delta = f.delta;
    res.lambda = f.lambda;
    res.theta = f.theta;
  } else {
    const auto f = detail::fit_grid_point(data, kernel, weights, sel.value, sel.value,
                                          target_lambda(n, d, sel.value, opts.C_lambda),
                                          opts.path);
    ++res.fit_count;
    if (!f.ok)
      throw NumericError("fallback fit at delta = 1/n failed: " + f.message);
    res.delta = f.delta;
    res.lambda = f.lambda;
    res.theta = f.theta;
  }
  return res;
}

struct LepskiSparsityOptions
{
  double beta = 1.0;
  double c_delta = 1.0;
  double C_lambda = 1.0;
  double c_bar = 2.0;
  PathConfig path;
  unsigned threads = 1;
};

// Sparsity adaptation for known smoothness: for s in {1, 2, ..., 2^m} fit
// with delta_s = c (s log d / n)^{1/(2 beta + 1)} and
// lambda_s = C sqrt(log d / (n delta_s)), then select the smallest s whose
// fit stays within c_bar (s' log d / n)^{beta/(2 beta + 1)} of every fit at
// s' >= s.
inline LepskiResult
lepski_sparsity(const Dataset& data_in,
                const Kernel& kernel,
                const WeightScheme& weights,
                const LepskiSparsityOptions& opts)
{
  auto data = std::make_shared<const Dataset>(data_in);
  const Eigen::Index n = data->n();
  const Eigen::Index d = data->d();
  detail::require(d >= 2, "Lepski adaptation needs d >= 2");
  detail::require(opts.c_bar >= 0.0, "c_bar must be nonnegative");
  const LepskiGrid grid = build_lepski_grid(LepskiGrid::Kind::sparsity, d);

  LepskiResult res;
  if (std::pow(opts.c_delta, opts.beta + 0.5) > opts.C_lambda)
    res.warnings.push_back("c_delta^(beta + 1/2) exceeds C_lambda");
  res.fits.resize(grid.values.size());
  parallel_for(grid.values.size(), opts.threads, [&](std::size_t i) {
    TuningSchedule sched{ n, d, static_cast<Eigen::Index>(grid.values[i]), opts.beta,
                          opts.c_delta, opts.C_lambda };
    const double delta = theoretical_bandwidth(sched);
    res.fits[i] = detail::fit_grid_point(data, kernel, weights, grid.values[i], delta,
                                         target_lambda(n, d, delta, opts.C_lambda),
                                         opts.path);
  });
  res.fit_count = static_cast<int>(grid.values.size());
  detail::note_failures(res, "s");

  const auto sel = resolve_sparsity_selection(res.fits, n, d, opts.beta, opts.c_bar);
  res.selected = sel.value;
  res.default_branch = sel.default_branch;
  const auto& f = res.fits[sel.index.value_or(res.fits.size() - 1)];
  if (!f.ok)
    throw NumericError("no sparsity grid fit succeeded");
  res.delta = f.delta;
  res.lambda = f.lambda;
  res.theta = f.theta;
  return res;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvResult
{
  std::vector<double> lambda_grid;
  std::vector<double> mean_cv_loss;
  std::vector<double> se_cv_loss;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  std::vector<int> fold_assignment;
  int assignment_attempts = 0;
};

// Stratified assignment: each class is shuffled and dealt round-robin over
// the folds, starting at a random fold offset per class.
inline std::vector<int>
stratified_folds(const Dataset& data, int folds, CounterRng rng)
{
  std::vector<int> assignment(static_cast<std::size_t>(data.n()), 0);
  for (double label : { 1.0, -1.0 }) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      if (data.y()(i) == label)
        idx.push_back(i);
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto offset = rng.below(static_cast<std::uint64_t>(folds));
    for (std::size_t i = 0; i < idx.size(); ++i)
      assignment[static_cast<std::size_t>(idx[i])] =
        static_cast<int>((i + offset) % static_cast<std::size_t>(folds));
  }
  return assignment;
}

//! Geometric grid of `count` values from hi down to hi * ratio.
inline std::vector<double>
geometric_grid(double hi, double ratio, int count)
{
  detail::require(hi > 0.0 && ratio > 0.0 && ratio < 1.0 && count >= 1,
                  "geometric grid needs hi > 0, ratio in (0, 1) and count >= 1");
  std::vector<double> g;
  for (int i = 0; i < count; ++i)
    g.push_back(hi * std::pow(ratio, count == 1 ? 0.0 : static_cast<double>(i) / (count - 1)));
  return g;
}

struct CvOptions
{
  int folds = 5;
  std::vector<double> grid;
  std::uint64_t seed = 0;
  PathConfig path;
  unsigned threads = 1;
  int max_assignment_attempts = 20;
};

enum class WeightMode
{
  unit,
  class_frequency
};

namespace detail {

inline WeightScheme
weights_for(const Dataset& data, WeightMode mode)
{
  return mode == WeightMode::unit ? WeightScheme::unit() : class_weights(data);
}

} // namespace detail

// K-fold cross-validation of lambda_tgt at fixed bandwidth. Each training
// split is fitted with path following at every grid lambda; the held-out
// loss is the weighted smoothed risk at the same bandwidth, with weights
// estimated on the training split. lambda_1se is the largest lambda whose
// mean loss is within one standard error of the minimum.
inline CvResult
cross_validate_lambda(const Dataset& data,
                      const Kernel& kernel,
                      double delta,
                      WeightMode weight_mode,
                      const CvOptions& opts)
{
  detail::require(opts.folds >= 2, "cross-validation needs at least 2 folds");
  detail::require(!opts.grid.empty(), "cross-validation grid is empty");
  for (double l : opts.grid)
    detail::require(std::isfinite(l) && l > 0.0, "grid values must be positive");
  detail::require(data.n() >= opts.folds, "fewer samples than folds");

  CvResult res;
  res.lambda_grid = opts.grid;

  const CounterRng root = CounterRng(opts.seed).split(0xcf01d);
  bool ok = false;
  for (int attempt = 0; attempt < opts.max_assignment_attempts && !ok; ++attempt) {
    res.fold_assignment = stratified_folds(data, opts.folds, root.split(attempt));
    res.assignment_attempts = attempt + 1;
    ok = true;
    for (int f = 0; f < opts.folds && ok; ++f) {
      int pos_in = 0, neg_in = 0, pos_out = 0, neg_out = 0;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        const bool held = res.fold_assignment[static_cast<std::size_t>(i)] == f;
        const bool pos = data.y()(i) > 0;
        (held ? (pos ? pos_out : neg_out) : (pos ? pos_in : neg_in))++;
      }
      ok = pos_in > 0 && neg_in > 0 && pos_out > 0 && neg_out > 0;
    }
  }
  if (!ok)
    throw InputError("could not assign folds containing both classes; "
                     "the minority class is smaller than the number of folds");

  struct Split
  {
    std::shared_ptr<const Dataset> train;
    std::shared_ptr<const Dataset> test;
    WeightScheme train_weights = WeightScheme::unit();
  };
  std::vector<Split> splits(static_cast<std::size_t>(opts.folds));
  for (int f = 0; f < opts.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      (res.fold_assignment[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    auto& sp = splits[static_cast<std::size_t>(f)];
    sp.train = std::make_shared<const Dataset>(data.subset(tr));
    sp.test = std::make_shared<const Dataset>(data.subset(te));
    sp.train_weights = detail::weights_for(*sp.train, weight_mode);
  }

  const std::size_t G = opts.grid.size();
  const std::size_t F = splits.size();
  std::vector<double> loss(G * F, 0.0);
  parallel_for(G * F, opts.threads, [&](std::size_t task) {
    const std::size_t g = task / F;
    const std::size_t f = task % F;
    const auto& sp = splits[f];
    SmoothedRisk train(sp.train, SurrogateLoss(kernel, delta), sp.train_weights);
    PathConfig cfg = opts.path;
    cfg.lambda_tgt = opts.grid[g];
    const auto path = path_following(train, cfg);
    SmoothedRisk test(sp.test, SurrogateLoss(kernel, delta), sp.train_weights);
    loss[task] = test.risk(path.theta_final);
  });

  for (std::size_t g = 0; g < G; ++g) {
    double mean = 0.0;
    for (std::size_t f = 0; f < F; ++f)
      mean += loss[g * F + f];
    mean /= static_cast<double>(F);
    double ss = 0.0;
    for (std::size_t f = 0; f < F; ++f)
      ss += (loss[g * F + f] - mean) * (loss[g * F + f] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(F - 1));
    res.mean_cv_loss.push_back(mean);
    res.se_cv_loss.push_back(sd / std::sqrt(static_cast<double>(F)));
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < G; ++g)
    if (res.mean_cv_loss[g] < res.mean_cv_loss[best])
      best = g;
  res.lambda_min = res.lambda_grid[best];
  const double cutoff = res.mean_cv_loss[best] + res.se_cv_loss[best];
  res.lambda_1se = res.lambda_min;
  for (std::size_t g = 0; g < G; ++g)
    if (res.mean_cv_loss[g] <= cutoff && res.lambda_grid[g] > res.lambda_1se)
      res.lambda_1se = res.lambda_grid[g];
  return res;
}

} // namespace smooth_threshold
