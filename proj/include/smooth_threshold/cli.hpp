#pragma once

// Command-line front end. Everything runs in-process through cli::run so the
// subcommands are testable without spawning the executable.

#include "benchmark.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "risk.hpp"
#include "simulate.hpp"
#include "tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace smooth_threshold::cli {

struct RunConfig
{
  std::string subcommand;

  // input
  std::string input;
  std::string roles = "response=y,threshold=x,covariates=rest";
  std::string delimiter = ",";
  bool standardize = false;
  std::string weights = "class";

  // estimator
  std::string kernel = "gaussian";
  std::optional<double> delta;
  std::optional<double> lambda_tgt;
  std::optional<double> lambda0;
  std::optional<int> stages;
  std::optional<double> phi;
  double nu = 0.25;
  double eta = 1.0;
  std::optional<double> eps_tgt;
  double radius = 10.0;
  int max_iters = 10000;
  bool backtrack = true;

  // tuning
  std::string tune = "fixed";
  int folds = 5;
  std::optional<long> s;
  std::optional<double> beta;
  double c_delta = 1.0;
  double c_lambda = 1.0;
  double c_sel = 2.0;
  double c_bar = 2.0;
  int grid_size = 20;
  double grid_ratio = 0.01;

  // simulation / benchmark
  std::string model = "conditional_mean";
  long n = 1000;
  long d = 10;
  long sim_s = 1;
  double mu = 2.0;
  double noise_sd = 0.1;
  std::string noise = "gaussian";
  int reps = 1;
  bool fast = false;

  // toy example
  double lo = 0.0;
  double hi = 2.0;
  double step = 0.01;

  // diagnostics
  std::string probe = "gradient";
  std::vector<double> deltas;
  long population = 1000000;
  //! Empty: zero for gradient, truth for variance, reflected (-theta*) for bias.
  std::string at;
  double fd_step = 1e-5;
  long support_size = 1;
  int directions = 100;
  double ball_radius = 1.0;

  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  std::string trace;
  std::string theta_out;
};

namespace detail {

inline unsigned
resolved_threads(const RunConfig& c)
{
  return c.threads > 0 ? static_cast<unsigned>(c.threads) : default_threads();
}

inline char
delimiter_of(const RunConfig& c)
{
  if (c.delimiter == "\\t" || c.delimiter == "tab")
    return '\t';
  if (c.delimiter.size() != 1)
    throw InputError("delimiter must be a single character");
  return c.delimiter[0];
}

inline std::string
join(const std::vector<double>& v)
{
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? " " : "") + format_double(v[i]);
  return s;
}

inline std::string
opt_str(const std::optional<double>& v)
{
  return v ? format_double(*v) : "auto";
}

inline PathConfig
path_config(const RunConfig& c)
{
  PathConfig p;
  p.lambda0 = c.lambda0;
  if (c.phi) {
    if (c.stages)
      throw InputError("give at most one of --phi and --stages");
    p.phi = c.phi;
    p.num_stages.reset();
  } else if (c.stages) {
    p.num_stages = c.stages;
  }
  p.nu = c.nu;
  p.eta = c.eta;
  p.eps_tgt = c.eps_tgt;
  p.omega_radius = c.radius;
  p.max_inner_iters = c.max_iters;
  p.backtracking = c.backtrack;
  p.lambda_tgt = 1.0; // placeholder, replaced before solving
  return p;
}

inline void
echo_path(Document::Section& s, const PathConfig& p)
{
  s.set("lambda0", opt_str(p.lambda0));
  s.set("lambda_tgt", p.lambda_tgt);
  s.set("phi", opt_str(p.phi));
  s.set("num_stages", p.num_stages ? std::to_string(*p.num_stages) : "auto");
  s.set("nu", p.nu);
  s.set("eta", p.eta);
  s.set("eps_tgt", opt_str(p.eps_tgt));
  s.set("radius", p.omega_radius);
  s.set("max_inner_iters", p.max_inner_iters);
  s.set("backtracking", p.backtracking ? "true" : "false");
}

struct Prepared
{
  std::shared_ptr<const Dataset> data;
  WeightScheme weights = WeightScheme::unit();
  std::vector<std::string> names;
  //! Column scales applied by --standardize (ones otherwise).
  Vector scale;
  std::vector<std::string> notes;
};

inline Prepared
prepare_data(const RunConfig& c)
{
  if (c.input.empty())
    throw InputError("--input is required");
  auto loaded = load_csv(c.input, parse_roles(c.roles), delimiter_of(c));
  Prepared p;
  p.names = loaded.covariate_names;
  p.notes = loaded.notes;
  p.scale = Vector::Ones(loaded.data.d());
  Matrix z = loaded.data.z();
  if (c.standardize) {
    const double n = static_cast<double>(z.rows());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double m = z.col(j).mean();
      const double var =
        n > 1 ? (z.col(j).array() - m).square().sum() / (n - 1.0) : 0.0;
      if (var > 0.0) {
        p.scale(j) = std::sqrt(var);
        z.col(j) /= p.scale(j);
      } else {
        p.notes.push_back("column " + p.names[static_cast<std::size_t>(j)] +
                          " is constant and was not rescaled");
      }
    }
  }
  p.data = std::make_shared<const Dataset>(loaded.data.x(), loaded.data.y(), std::move(z));
  if (loaded.weights) {
    p.weights = WeightScheme::per_sample(*loaded.weights);
  } else if (c.weights == "class") {
    p.weights = class_weights(*p.data);
  } else if (c.weights == "unit") {
    p.weights = WeightScheme::unit();
  } else {
    throw InputError("--weights must be class or unit");
  }
  return p;
}

inline WeightMode
weight_mode(const RunConfig& c)
{
  return c.weights == "unit" ? WeightMode::unit : WeightMode::class_frequency;
}

inline void
echo_common(Document& doc, const RunConfig& c)
{
  auto& s = doc.section("config");
  s.set("subcommand", c.subcommand);
  s.set("seed", std::to_string(c.seed));
  s.set("threads", resolved_threads(c));
}

inline void
echo_input(Document& doc, const RunConfig& c, const Prepared& p)
{
  auto& s = doc.section("config");
  s.set("input", c.input);
  s.set("roles", c.roles);
  s.set("delimiter", c.delimiter);
  s.set("weights", p.weights.describe());
  s.set("standardize", c.standardize ? "true" : "false");
  s.set("n", p.data->n());
  s.set("d", p.data->d());
  s.set("kernel", c.kernel);
  s.set("tune", c.tune);
  for (const auto& note : p.notes)
    doc.section("notes").set("note" + std::to_string(doc.section("notes").entries.size() + 1),
                             note);
}

// Resolved bandwidth, target lambda and (for adaptive modes) the fitted
// path, following --tune.
struct Tuned
{
  double delta = 0.0;
  double lambda = 0.0;
  std::optional<CvResult> cv;
  std::optional<LepskiResult> lepski;
};

inline Tuned
tune(const RunConfig& c, const Prepared& p, const Kernel& k, const PathConfig& base)
{
  Tuned t;
  const Eigen::Index n = p.data->n();
  const Eigen::Index d = p.data->d();
  auto theory_delta = [&]() {
    if (c.delta)
      return *c.delta;
    if (!c.s || !c.beta)
      throw InputError("--delta is required unless --s and --beta are given");
    return theoretical_bandwidth(
      TuningSchedule{ n, d, static_cast<Eigen::Index>(*c.s), *c.beta, c.c_delta, c.c_lambda });
  };
  if (c.tune == "fixed") {
    t.delta = theory_delta();
    if (c.lambda_tgt)
      t.lambda = *c.lambda_tgt;
    else if (c.s && c.beta)
      t.lambda = target_lambda(n, d, t.delta, c.c_lambda);
    else
      throw InputError("--lambda-tgt is required under --tune fixed unless --s and --beta are given");
  } else if (c.tune == "cv") {
    t.delta = theory_delta();
    CvOptions o;
    o.folds = c.folds;
    o.seed = c.seed;
    o.path = base;
    o.threads = resolved_threads(c);
    SmoothedRisk full(p.data, SurrogateLoss(k, t.delta), p.weights);
    o.grid = default_cv_grid(full, c.grid_size, c.grid_ratio);
    if (p.weights.kind() == WeightScheme::Kind::per_sample)
      throw InputError("cross-validation does not support a weight column");
    t.cv = cross_validate_lambda(*p.data, k, t.delta, weight_mode(c), o);
    t.lambda = t.cv->lambda_1se;
  } else if (c.tune == "lepski-beta") {
    if (!c.s)
      throw InputError("--tune lepski-beta needs --s");
    LepskiBandwidthOptions o;
    o.s = static_cast<Eigen::Index>(*c.s);
    o.c_sel = c.c_sel;
    o.C_lambda = c.c_lambda;
    o.path = base;
    o.threads = resolved_threads(c);
    t.lepski = lepski_bandwidth(*p.data, k, p.weights, o);
    t.delta = t.lepski->delta;
    t.lambda = t.lepski->lambda;
  } else if (c.tune == "lepski-s") {
    if (!c.beta)
      throw InputError("--tune lepski-s needs --beta");
    LepskiSparsityOptions o;
    o.beta = *c.beta;
    o.c_delta = c.c_delta;
    o.C_lambda = c.c_lambda;
    o.c_bar = c.c_bar;
    o.path = base;
    o.threads = resolved_threads(c);
    t.lepski = lepski_sparsity(*p.data, k, p.weights, o);
    t.delta = t.lepski->delta;
    t.lambda = t.lepski->lambda;
  } else {
    throw InputError("--tune must be fixed, cv, lepski-beta or lepski-s");
  }
  return t;
}

inline void
emit_tuning(Document& doc, const Tuned& t)
{
  if (t.cv) {
    auto& s = doc.section("cv");
    s.set("folds", static_cast<long>(1 + *std::max_element(t.cv->fold_assignment.begin(),
                                                           t.cv->fold_assignment.end())));
    s.set("grid", join(t.cv->lambda_grid));
    s.set("lambda_min", t.cv->lambda_min);
    s.set("lambda_1se", t.cv->lambda_1se);
    s.set("assignment_attempts", t.cv->assignment_attempts);
    auto& tab = doc.table("cv", { "lambda", "mean_cv_loss", "se_cv_loss" });
    for (std::size_t g = 0; g < t.cv->lambda_grid.size(); ++g)
      tab.add({ t.cv->lambda_grid[g], t.cv->mean_cv_loss[g], t.cv->se_cv_loss[g] });
  }
  if (t.lepski) {
    auto& s = doc.section("lepski");
    s.set("selected", t.lepski->selected);
    s.set("default_branch", t.lepski->default_branch ? "true" : "false");
    s.set("fit_count", t.lepski->fit_count);
    std::vector<double> grid;
    for (const auto& f : t.lepski->fits)
      grid.push_back(f.grid_value);
    s.set("grid", join(grid));
    for (std::size_t i = 0; i < t.lepski->warnings.size(); ++i)
      doc.section("warnings").set("lepski" + std::to_string(i + 1), t.lepski->warnings[i]);
    auto& tab =
      doc.table("lepski_grid", { "grid_value", "delta", "lambda", "ok", "converged", "nnz" });
    for (const auto& f : t.lepski->fits)
      tab.add({ f.grid_value, f.delta, f.lambda, f.ok ? 1.0 : 0.0, f.converged ? 1.0 : 0.0,
                static_cast<double>((f.theta.array() != 0.0).count()) });
  }
}

inline std::ostream&
open_out(const std::string& path, std::ofstream& file, std::ostream& fallback)
{
  if (path.empty() || path == "-")
    return fallback;
  file.open(path, std::ios::binary);
  if (!file)
    throw InputError("cannot write '" + path + "'");
  return file;
}

// CSV goes to --out; the config echo goes next to it as <out>.config.txt,
// or to the error stream when writing CSV to stdout.
inline void
write_sidecar(const RunConfig& c, const Document& doc, std::ostream& err)
{
  if (c.out.empty() || c.out == "-") {
    err << doc.str();
    return;
  }
  std::ofstream f(c.out + ".config.txt", std::ios::binary);
  if (!f)
    throw InputError("cannot write '" + c.out + ".config.txt'");
  doc.write(f);
}

inline Vector
unscale(const Vector& theta, const Vector& scale)
{
  return theta.cwiseQuotient(scale);
}

// fit, path, cv, adapt-beta and adapt-s share the pipeline
// load -> tune -> path_following; they differ in what is written.
inline int
run_estimate(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const Prepared p = prepare_data(c);
  const Kernel k = kernels::by_name(c.kernel);
  PathConfig base = path_config(c);
  const Tuned t = tune(c, p, k, base);
  smooth_threshold::detail::require(t.delta > 0.0, "delta must be positive");

  SmoothedRisk risk(p.data, SurrogateLoss(k, t.delta), p.weights);
  PathConfig cfg = base;
  cfg.lambda_tgt = t.lambda;
  const SolutionPath path = path_following(risk, cfg);
  const Vector theta = unscale(path.theta_final, p.scale);

  Document doc;
  echo_common(doc, c);
  echo_input(doc, c, p);
  auto& cs = doc.section("config");
  cs.set("delta", t.delta);
  if (c.s)
    cs.set("s", *c.s);
  if (c.beta)
    cs.set("beta", *c.beta);
  cs.set("c_delta", c.c_delta);
  cs.set("c_lambda", c.c_lambda);
  echo_path(cs, path.config);
  emit_tuning(doc, t);

  const auto& last = path.final_stage();
  auto& r = doc.section("result");
  r.set("lambda_tgt", t.lambda);
  r.set("delta", t.delta);
  r.set("exit_omega", last.exit_omega);
  r.set("nnz", static_cast<long>((theta.array() != 0.0).count()));
  r.set("objective", objective(risk, path.theta_final, t.lambda));
  r.set("risk", risk.risk(path.theta_final));
  r.set("stages", static_cast<long>(path.stages.size()));
  r.set("total_iterations", path.total_iterations());
  r.set("converged", path.converged() ? "true" : "false");
  for (std::size_t i = 0; i < path.warnings.size(); ++i)
    doc.section("warnings").set("solver" + std::to_string(i + 1), path.warnings[i]);
  for (std::size_t i = 0; i < path.diagnostics.size(); ++i)
    doc.section("diagnostics").set("path" + std::to_string(i + 1), path.diagnostics[i]);

  if (c.subcommand == "path") {
    // per-stage CSV, coefficients on the original covariate scale
    std::vector<std::string> header{ "stage", "lambda", "tolerance", "iterations",
                                     "nnz", "objective", "omega", "status" };
    for (const auto& nm : p.names)
      header.push_back(nm);
    std::ofstream file;
    std::ostream& os = open_out(c.out, file, out);
    write_csv_row(os, header);
    for (const auto& st : path.stages) {
      const Vector th = unscale(st.theta, p.scale);
      std::vector<std::string> row{ std::to_string(st.stage),
                                    format_double(st.lambda),
                                    format_double(st.tolerance),
                                    std::to_string(st.iterations),
                                    std::to_string((th.array() != 0.0).count()),
                                    format_double(objective(risk, st.theta, st.lambda)),
                                    format_double(st.exit_omega),
                                    to_string(st.status) };
      for (Eigen::Index j = 0; j < th.size(); ++j)
        row.push_back(format_double(th(j)));
      write_csv_row(os, row);
    }
    if (!c.trace.empty()) {
      std::ofstream tf(c.trace, std::ios::binary);
      if (!tf)
        throw InputError("cannot write '" + c.trace + "'");
      write_csv_row(tf, { "stage", "iteration", "objective" });
      for (const auto& st : path.stages)
        for (std::size_t k2 = 0; k2 < st.objective_trace.size(); ++k2)
          write_csv_row(tf, { std::to_string(st.stage), std::to_string(k2),
                              format_double(st.objective_trace[k2]) });
    }
    write_sidecar(c, doc, err);
    return 0;
  }

  auto& coef = doc.table("coefficients", { "index", "name", "theta" });
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    coef.rows.push_back({ std::to_string(j + 1), p.names[static_cast<std::size_t>(j)],
                          format_double(theta(j)) });
  std::ofstream file;
  open_out(c.out, file, out) << doc.str();
  return 0;
}

inline SimSpec
sim_spec(const RunConfig& c)
{
  SimSpec s;
  s.model = parse_sim_model(c.model);
  s.n = c.n;
  s.d = c.d;
  s.s = c.sim_s;
  s.mu = c.mu;
  s.noise_sd = c.noise_sd;
  if (c.noise == "gaussian")
    s.noise = NoiseKind::gaussian;
  else if (c.noise == "logistic")
    s.noise = NoiseKind::logistic;
  else
    throw InputError("--noise must be gaussian or logistic");
  s.seed = c.seed;
  s.validate();
  return s;
}

inline void
echo_sim(Document& doc, const SimSpec& s)
{
  auto& sec = doc.section("simulation");
  sec.set("model", to_string(s.model));
  sec.set("n", s.n);
  sec.set("d", s.d);
  sec.set("s", s.s);
  sec.set("mu", s.mu);
  sec.set("noise_sd", s.noise_sd);
  sec.set("noise", s.noise == NoiseKind::gaussian ? "gaussian" : "logistic");
  sec.set("seed", std::to_string(s.seed));
}

inline int
run_simulate(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SimSpec s = sim_spec(c);
  const SimData sd = generate(s);
  {
    std::ofstream file;
    write_dataset_csv(open_out(c.out, file, out), sd.data);
  }
  std::string theta_path = c.theta_out;
  if (theta_path.empty() && !c.out.empty() && c.out != "-")
    theta_path = c.out + ".theta.csv";
  if (!theta_path.empty()) {
    std::ofstream tf(theta_path, std::ios::binary);
    if (!tf)
      throw InputError("cannot write '" + theta_path + "'");
    write_csv_row(tf, { "index", "theta_star" });
    for (Eigen::Index j = 0; j < sd.theta_star.size(); ++j)
      write_csv_row(tf, { std::to_string(j + 1), format_double(sd.theta_star(j)) });
  }
  Document doc;
  echo_common(doc, c);
  echo_sim(doc, s);
  if (!theta_path.empty())
    doc.section("config").set("theta_out", theta_path);
  write_sidecar(c, doc, err);
  return 0;
}

inline int
run_bench(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SimSpec s = sim_spec(c);
  BenchmarkSettings st;
  st.kernel = c.kernel;
  st.delta = c.delta.value_or(1.0);
  st.path = path_config(c);
  if (c.tune == "cv") {
    st.tuning = BenchmarkTuning::cv;
  } else if (c.tune == "fixed") {
    if (!c.lambda_tgt)
      throw InputError("bench with --tune fixed needs --lambda-tgt");
    st.tuning = BenchmarkTuning::fixed;
    st.path.lambda_tgt = *c.lambda_tgt;
  } else {
    throw InputError("bench supports --tune fixed or cv");
  }
  st.weights = weight_mode(c);
  st.folds = c.folds;
  st.cv_grid_size = c.grid_size;
  st.cv_grid_ratio = c.grid_ratio;
  st.fast_mode = c.fast;
  const BenchmarkResult res = run_benchmark(s, st, c.reps, c.seed, resolved_threads(c));

  {
    std::ofstream file;
    std::ostream& os = open_out(c.out, file, out);
    write_csv_row(os, { "repetition", "seed", "l1", "l2", "linf", "nnz", "lambda",
                        "runtime", "status" });
    for (const auto& r : res.rows)
      write_csv_row(os, { std::to_string(r.repetition), std::to_string(r.seed),
                          format_double(r.l1), format_double(r.l2), format_double(r.linf),
                          std::to_string(r.nnz), format_double(r.lambda),
                          format_double(r.runtime), r.status });
  }
  Document doc;
  echo_common(doc, c);
  echo_sim(doc, s);
  auto& cs = doc.section("config");
  cs.set("kernel", c.kernel);
  cs.set("delta", st.delta);
  cs.set("tune", c.tune);
  cs.set("repetitions", c.reps);
  cs.set("folds", c.folds);
  cs.set("grid_size", c.grid_size);
  cs.set("grid_ratio", c.grid_ratio);
  cs.set("fast", c.fast ? "true" : "false");
  cs.set("weights", c.weights);
  echo_path(cs, st.path);
  if (st.tuning == BenchmarkTuning::cv) // chosen per repetition, see the lambda column
    cs.set("lambda_tgt", st.fast_mode ? "cv (shared)" : "cv");
  auto& sum = doc.section("summary");
  sum.set("mean_l1", res.summary.mean_l1);
  sum.set("sd_l1", res.summary.sd_l1);
  sum.set("mean_l2", res.summary.mean_l2);
  sum.set("sd_l2", res.summary.sd_l2);
  sum.set("mean_linf", res.summary.mean_linf);
  sum.set("sd_linf", res.summary.sd_linf);
  write_sidecar(c, doc, err);
  return 0;
}

inline int
run_toy(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const auto table = toy_population_risks(uniform_grid(c.lo, c.hi, c.step));
  {
    std::ofstream file;
    std::ostream& os = open_out(c.out, file, out);
    write_csv_row(os, { "theta", "risk01", "risk_hinge", "risk_exp", "slope_hinge",
                        "slope_exp" });
    for (std::size_t i = 0; i < table.theta_grid.size(); ++i)
      write_csv_row(os, { format_double(table.theta_grid[i]), format_double(table.risk01[i]),
                          format_double(table.risk_hinge[i]), format_double(table.risk_exp[i]),
                          format_double(table.slope_hinge[i]),
                          format_double(table.slope_exp[i]) });
  }
  Document doc;
  echo_common(doc, c);
  auto& cs = doc.section("config");
  cs.set("lo", c.lo);
  cs.set("hi", c.hi);
  cs.set("step", c.step);
  doc.section("result").set("argmin_risk01", table.argmin01());
  write_sidecar(c, doc, err);
  return 0;
}

inline void
append_probe(Document& doc, const ProbeReport& rep)
{
  auto& s = doc.section("probe");
  s.set("name", rep.probe);
  s.set("passed", rep.passed ? "true" : "false");
  s.set("tolerance", rep.tolerance);
  auto& in = doc.section("inputs");
  for (const auto& [k, v] : rep.inputs)
    in.set(k, v);
  auto& vals = doc.section("values");
  for (const auto& [k, v] : rep.values)
    vals.set(k, v);
  for (std::size_t i = 0; i < rep.notes.size(); ++i)
    doc.section("notes").set("note" + std::to_string(i + 1), rep.notes[i]);
  for (const auto& t : rep.tables) {
    auto& tab = doc.table(t.name, t.header);
    for (const auto& r : t.rows)
      tab.add(r);
  }
}

inline int
run_diagnose(const RunConfig& c, std::ostream& out, std::ostream&)
{
  Document doc;
  echo_common(doc, c);
  ProbeReport rep;
  if (c.probe == "gradient" || c.probe == "curvature") {
    const Prepared p = prepare_data(c);
    echo_input(doc, c, p);
    if (!c.delta)
      throw InputError("--delta is required for this probe");
    doc.section("config").set("delta", *c.delta);
    SmoothedRisk risk(p.data, SurrogateLoss(kernels::by_name(c.kernel), *c.delta), p.weights);
    if (c.probe == "gradient") {
      Vector theta = Vector::Zero(risk.dim());
      const std::string at = c.at.empty() ? "zero" : c.at;
      if (at == "random") {
        CounterRng rng = CounterRng(c.seed).split(0x9c);
        for (Eigen::Index j = 0; j < theta.size(); ++j)
          theta(j) = rng.normal() / std::sqrt(static_cast<double>(theta.size()));
      } else if (at != "zero") {
        throw InputError("--at must be zero or random for the gradient probe");
      }
      doc.section("config").set("at", at);
      rep = gradient_check(risk, theta, c.fd_step);
    } else {
      CurvatureOptions o;
      o.support_size = c.support_size;
      o.num_directions = c.directions;
      o.ball_radius = c.ball_radius;
      o.seed = c.seed;
      rep = restricted_curvature_probe(risk, o).report;
    }
  } else if (c.probe == "variance" || c.probe == "bias") {
    const SimSpec s = sim_spec(c);
    echo_sim(doc, s);
    const Kernel k = kernels::by_name(c.kernel);
    if (c.deltas.empty())
      throw InputError("--deltas is required for this probe");
    doc.section("config").set("deltas", join(c.deltas));
    // the population gradients vanish at theta* under the conditional mean
    // model, so the bias probe defaults to the reflected point -theta*
    const std::string at = !c.at.empty() ? c.at : c.probe == "bias" ? "reflected" : "truth";
    Vector theta;
    if (at == "truth")
      theta = s.resolved_theta();
    else if (at == "reflected")
      theta = -s.resolved_theta();
    else if (at == "zero")
      theta = Vector::Zero(s.d);
    else
      throw InputError("--at must be truth, reflected or zero for this probe");
    doc.section("config").set("at", at);
    if (c.probe == "variance") {
      VarianceProbeOptions o;
      o.repetitions = c.reps;
      o.population_size = c.population;
      o.seed = c.seed;
      o.theta = theta;
      variance_probe(s, k, c.deltas, o, &rep);
    } else {
      bias_probe(s, k, c.deltas, theta, {}, &rep);
    }
  } else {
    throw InputError("--probe must be gradient, variance, bias or curvature");
  }
  append_probe(doc, rep);
  std::ofstream file;
  open_out(c.out, file, out) << doc.str();
  return 0;
}

inline void
add_path_options(CLI::App* sub, RunConfig& c)
{
  sub->add_option("--kernel", c.kernel, "kernel name")->capture_default_str();
  sub->add_option("--delta", c.delta, "bandwidth");
  sub->add_option("--lambda-tgt", c.lambda_tgt, "target penalty level");
  sub->add_option("--lambda0", c.lambda0, "initial penalty level (default |grad R(0)|_inf)");
  sub->add_option("--stages", c.stages, "number of geometric stages");
  sub->add_option("--phi", c.phi, "stage ratio in (0, 1)");
  sub->add_option("--nu", c.nu, "intermediate tolerance factor")->capture_default_str();
  sub->add_option("--eta", c.eta, "initial step size")->capture_default_str();
  sub->add_option("--eps-tgt", c.eps_tgt, "final-stage tolerance (default 1e-4 lambda_tgt)");
  sub->add_option("--radius", c.radius, "l2 constraint radius")->capture_default_str();
  sub->add_option("--max-iters", c.max_iters, "inner iteration cap per stage")
    ->capture_default_str();
  sub->add_option("--backtrack", c.backtrack, "halve eta until sufficient decrease")
    ->capture_default_str();
}

inline void
add_input_options(CLI::App* sub, RunConfig& c)
{
  sub->add_option("--input,-i", c.input, "CSV file")->required();
  sub->add_option("--roles", c.roles, "column roles, e.g. response=y,threshold=x,covariates=rest")
    ->capture_default_str();
  sub->add_option("--delimiter", c.delimiter, "field delimiter (\\t for tab)")
    ->capture_default_str();
  sub->add_flag("--standardize", c.standardize, "scale covariates to unit variance");
  sub->add_option("--weights", c.weights, "class or unit (ignored with a weight column)")
    ->capture_default_str();
}

inline void
add_tuning_options(CLI::App* sub, RunConfig& c)
{
  sub->add_option("--tune", c.tune, "fixed, cv, lepski-beta or lepski-s")->capture_default_str();
  sub->add_option("--folds", c.folds, "cross-validation folds")->capture_default_str();
  sub->add_option("--s", c.s, "sparsity level");
  sub->add_option("--beta", c.beta, "smoothness level");
  sub->add_option("--c-delta", c.c_delta, "bandwidth constant")->capture_default_str();
  sub->add_option("--c-lambda", c.c_lambda, "penalty constant")->capture_default_str();
  sub->add_option("--c-sel", c.c_sel, "Lepski bandwidth selection constant")
    ->capture_default_str();
  sub->add_option("--c-bar", c.c_bar, "Lepski sparsity selection constant")
    ->capture_default_str();
  sub->add_option("--grid-size", c.grid_size, "CV lambda grid size")->capture_default_str();
  sub->add_option("--grid-ratio", c.grid_ratio, "CV grid lower end as a fraction of lambda0")
    ->capture_default_str();
}

inline void
add_sim_options(CLI::App* sub, RunConfig& c)
{
  sub->add_option("--model", c.model, "binary_response, conditional_mean or one_bit_noiseless")
    ->capture_default_str();
  sub->add_option("--n", c.n, "sample size")->capture_default_str();
  sub->add_option("--d", c.d, "dimension")->capture_default_str();
  sub->add_option("--sparsity", c.sim_s, "true sparsity s")->capture_default_str();
  sub->add_option("--mu", c.mu, "conditional mean shift")->capture_default_str();
  sub->add_option("--noise-sd", c.noise_sd, "noise standard deviation")->capture_default_str();
  sub->add_option("--noise", c.noise, "gaussian or logistic")->capture_default_str();
}

inline void
add_common_options(CLI::App* sub, RunConfig& c)
{
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--threads", c.threads,
                  "worker threads (default: SMOOTH_THRESHOLD_THREADS or 1)");
  sub->add_option("--out,-o", c.out, "output file (default stdout)");
}

inline std::string
error_record(const std::string& kind, const std::string& message)
{
  return nlohmann::json{ { "error", kind }, { "message", message } }.dump();
}

} // namespace detail

//! Parses args (without the program name), runs, returns the exit status.
inline int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  RunConfig c;
  CLI::App app{ "Sparse individualized thresholds from a kernel-smoothed 0-1 loss",
                "smooth-threshold" };
  app.require_subcommand(1);

  struct Entry
  {
    const char* name;
    const char* help;
  };
  for (Entry e : { Entry{ "fit", "fit at one penalty level" },
                   Entry{ "path", "per-stage regularization path as CSV" },
                   Entry{ "cv", "cross-validate lambda (one-SE rule) and fit" },
                   Entry{ "adapt-beta", "Lepski bandwidth adaptation (known s)" },
                   Entry{ "adapt-s", "Lepski sparsity adaptation (known beta)" } }) {
    auto* sub = app.add_subcommand(e.name, e.help);
    detail::add_input_options(sub, c);
    detail::add_path_options(sub, c);
    detail::add_tuning_options(sub, c);
    detail::add_common_options(sub, c);
    if (std::string(e.name) == "path")
      sub->add_option("--trace", c.trace, "per-iteration objective trace CSV");
  }
  {
    auto* sub = app.add_subcommand("simulate", "write a simulated dataset and theta*");
    detail::add_sim_options(sub, c);
    detail::add_common_options(sub, c);
    sub->add_option("--theta-out", c.theta_out, "theta* CSV (default <out>.theta.csv)");
  }
  {
    auto* sub = app.add_subcommand("bench", "repeated simulate-and-fit benchmark");
    detail::add_sim_options(sub, c);
    detail::add_path_options(sub, c);
    detail::add_common_options(sub, c);
    sub->add_option("--tune", c.tune, "fixed or cv")->capture_default_str();
    sub->add_option("--folds", c.folds, "cross-validation folds")->capture_default_str();
    sub->add_option("--reps", c.reps, "repetitions")->capture_default_str();
    sub->add_flag("--fast", c.fast, "tune lambda once and reuse it");
    sub->add_option("--weights", c.weights, "class or unit")->capture_default_str();
    sub->add_option("--grid-size", c.grid_size, "CV lambda grid size")->capture_default_str();
    sub->add_option("--grid-ratio", c.grid_ratio, "CV grid lower end over lambda0")
      ->capture_default_str();
  }
  {
    auto* sub = app.add_subcommand("toy-risks", "population risks of the toy example");
    sub->add_option("--lo", c.lo, "grid start")->capture_default_str();
    sub->add_option("--hi", c.hi, "grid end")->capture_default_str();
    sub->add_option("--step", c.step, "grid spacing")->capture_default_str();
    detail::add_common_options(sub, c);
  }
  {
    auto* sub = app.add_subcommand("diagnose", "numerical probes");
    sub->add_option("--probe", c.probe, "gradient, variance, bias or curvature")
      ->capture_default_str();
    sub->add_option("--input,-i", c.input, "CSV file (gradient, curvature)");
    sub->add_option("--roles", c.roles, "column roles")->capture_default_str();
    sub->add_option("--delimiter", c.delimiter, "field delimiter")->capture_default_str();
    sub->add_flag("--standardize", c.standardize, "scale covariates to unit variance");
    sub->add_option("--weights", c.weights, "class or unit")->capture_default_str();
    sub->add_option("--kernel", c.kernel, "kernel name")->capture_default_str();
    sub->add_option("--delta", c.delta, "bandwidth (gradient, curvature)");
    sub->add_option("--deltas", c.deltas, "bandwidth grid (variance, bias)")->delimiter(',');
    sub->add_option("--reps", c.reps, "repetitions (variance)")->capture_default_str();
    sub->add_option("--population", c.population, "Monte Carlo population size")
      ->capture_default_str();
    sub->add_option("--at", c.at,
                    "evaluation point: zero or random (gradient); truth, reflected or zero "
                    "(variance, bias)");
    sub->add_option("--fd-step", c.fd_step, "central difference step (gradient)")->capture_default_str();
    sub->add_option("--support-size", c.support_size, "sparsity of probe directions (curvature)")->capture_default_str();
    sub->add_option("--directions", c.directions, "number of random directions (curvature)")->capture_default_str();
    sub->add_option("--ball-radius", c.ball_radius, "radius around the evaluation point (curvature)")->capture_default_str();
    detail::add_sim_options(sub, c);
    detail::add_common_options(sub, c);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << detail::error_record("usage", e.what()) << '\n';
    return 2;
  }
  c.subcommand = app.get_subcommands().front()->get_name();

  try {
    if (c.threads < 0)
      throw InputError("--threads must be nonnegative");
    const std::string& sc = c.subcommand;
    if (sc == "cv")
      c.tune = "cv";
    else if (sc == "adapt-beta")
      c.tune = "lepski-beta";
    else if (sc == "adapt-s")
      c.tune = "lepski-s";
    if (sc == "fit" || sc == "path" || sc == "cv" || sc == "adapt-beta" || sc == "adapt-s")
      return detail::run_estimate(c, out, err);
    if (sc == "simulate")
      return detail::run_simulate(c, out, err);
    if (sc == "bench")
      return detail::run_bench(c, out, err);
    if (sc == "toy-risks")
      return detail::run_toy(c, out, err);
    return detail::run_diagnose(c, out, err);
  } catch (const InputError& e) {
    err << detail::error_record("input", e.what()) << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << detail::error_record("numeric", e.what()) << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << detail::error_record("internal", e.what()) << '\n';
    return 1;
  }
}

} // namespace smooth_threshold::cli
