#pragma once

#include "error.hpp"
#include "kernels.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "risk.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "tuning.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace smooth_threshold {

enum class BenchmarkTuning
{
  fixed,
  cv
};

struct BenchmarkSettings
{
  std::string kernel = "gaussian";
  double delta = 1.0;
  //! lambda_tgt is used as-is under fixed tuning and replaced under cv.
  PathConfig path;
  BenchmarkTuning tuning = BenchmarkTuning::cv;
  WeightMode weights = WeightMode::class_frequency;
  int folds = 5;
  //! Explicit CV grid; empty means cv_grid_size values from lambda0 down to
  //! lambda0 * cv_grid_ratio.
  std::vector<double> cv_grid;
  int cv_grid_size = 20;
  double cv_grid_ratio = 0.01;
  //! Tune lambda once on the first repetition and reuse it.
  bool fast_mode = false;
};

struct BenchmarkRow
{
  int repetition = 0;
  std::uint64_t seed = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  Eigen::Index nnz = 0;
  double lambda = 0.0;
  double runtime = 0.0;
  //! "ok", or the solver warnings joined by "; ".
  std::string status;
};

struct BenchmarkSummary
{
  double mean_l1, sd_l1, mean_l2, sd_l2, mean_linf, sd_linf;
};

struct BenchmarkResult
{
  std::vector<BenchmarkRow> rows;
  BenchmarkSummary summary{};
};

inline std::vector<double>
default_cv_grid(const SmoothedRisk& risk, int count, double ratio)
{
  const double lambda0 =
    risk.gradient(Vector::Zero(risk.dim())).lpNorm<Eigen::Infinity>();
  detail::require(lambda0 > 0.0, "gradient at the origin vanishes; no lambda grid");
  return geometric_grid(lambda0, ratio, count);
}

namespace detail {

inline double
tuned_lambda(const Dataset& data,
             const Kernel& kernel,
             const BenchmarkSettings& st,
             std::uint64_t seed)
{
  CvOptions cv;
  cv.folds = st.folds;
  cv.seed = seed;
  cv.path = st.path;
  cv.grid = st.cv_grid;
  if (cv.grid.empty()) {
    SmoothedRisk full(data, SurrogateLoss(kernel, st.delta), weights_for(data, st.weights));
    cv.grid = default_cv_grid(full, st.cv_grid_size, st.cv_grid_ratio);
  }
  return cross_validate_lambda(data, kernel, st.delta, st.weights, cv).lambda_1se;
}

inline double
mean_of(const std::vector<BenchmarkRow>& rows, double BenchmarkRow::*field)
{
  double m = 0.0;
  for (const auto& r : rows)
    m += r.*field;
  return m / static_cast<double>(rows.size());
}

inline double
sd_of(const std::vector<BenchmarkRow>& rows, double BenchmarkRow::*field)
{
  if (rows.size() < 2)
    return 0.0;
  const double m = mean_of(rows, field);
  double ss = 0.0;
  for (const auto& r : rows)
    ss += (r.*field - m) * (r.*field - m);
  return std::sqrt(ss / static_cast<double>(rows.size() - 1));
}

} // namespace detail

// generate -> (CV-tune lambda) -> path_following -> estimation error, per
// repetition. Repetition r simulates with seed CounterRng(seed).split(r).at(0);
// CV fold streams derive from the same key. Repetitions run in parallel,
// each writing its own row, so rows do not depend on the thread count
// (runtime aside).
inline BenchmarkResult
run_benchmark(const SimSpec& sim,
              const BenchmarkSettings& settings,
              int repetitions,
              std::uint64_t seed,
              unsigned threads = 1)
{
  sim.validate();
  detail::require(repetitions >= 1, "repetitions must be at least 1");
  detail::require(settings.delta > 0.0, "delta must be positive");
  const Kernel kernel = kernels::by_name(settings.kernel);
  const CounterRng root(seed);
  auto rep_seed = [&](int r) { return root.split(static_cast<std::uint64_t>(r)).at(0); };
  auto cv_seed = [&](int r) { return root.split(static_cast<std::uint64_t>(r)).at(1); };

  std::optional<double> shared_lambda;
  if (settings.tuning == BenchmarkTuning::cv && settings.fast_mode) {
    SimSpec s0 = sim;
    s0.seed = rep_seed(0);
    shared_lambda = detail::tuned_lambda(generate(s0).data, kernel, settings, cv_seed(0));
  }

  BenchmarkResult res;
  res.rows.resize(static_cast<std::size_t>(repetitions));
  parallel_for(res.rows.size(), threads, [&](std::size_t i) {
    const int r = static_cast<int>(i);
    const auto start = std::chrono::steady_clock::now();
    BenchmarkRow row;
    row.repetition = r;
    row.seed = rep_seed(r);
    SimSpec s = sim;
    s.seed = row.seed;
    const SimData sd = generate(s);

    PathConfig cfg = settings.path;
    if (settings.tuning == BenchmarkTuning::cv)
      cfg.lambda_tgt =
        shared_lambda ? *shared_lambda
                      : detail::tuned_lambda(sd.data, kernel, settings, cv_seed(r));
    SmoothedRisk risk(sd.data,
                      SurrogateLoss(kernel, settings.delta),
                      detail::weights_for(sd.data, settings.weights));
    const SolutionPath path = path_following(risk, cfg);

    row.lambda = cfg.lambda_tgt;
    row.l1 = estimation_error(path.theta_final, sd.theta_star, ErrorNorm::l1);
    row.l2 = estimation_error(path.theta_final, sd.theta_star, ErrorNorm::l2);
    row.linf = estimation_error(path.theta_final, sd.theta_star, ErrorNorm::linf);
    row.nnz = static_cast<Eigen::Index>((path.theta_final.array() != 0.0).count());
    row.status = "ok";
    if (!path.warnings.empty()) {
      row.status.clear();
      for (std::size_t k = 0; k < path.warnings.size(); ++k)
        row.status += (k ? "; " : "") + path.warnings[k];
    }
    row.runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.rows[i] = std::move(row);
  });

  res.summary = { detail::mean_of(res.rows, &BenchmarkRow::l1),
                  detail::sd_of(res.rows, &BenchmarkRow::l1),
                  detail::mean_of(res.rows, &BenchmarkRow::l2),
                  detail::sd_of(res.rows, &BenchmarkRow::l2),
                  detail::mean_of(res.rows, &BenchmarkRow::linf),
                  detail::sd_of(res.rows, &BenchmarkRow::linf) };
  return res;
}

} // namespace smooth_threshold
