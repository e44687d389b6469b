#include "oracles.hpp"

#include "smooth_threshold/benchmark.hpp"
#include "smooth_threshold/simulate.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace smooth_threshold;

namespace {

SimSpec
spec(SimModel model, Eigen::Index n, Eigen::Index d, Eigen::Index s, std::uint64_t seed)
{
  SimSpec sp;
  sp.model = model;
  sp.n = n;
  sp.d = d;
  sp.s = s;
  sp.seed = seed;
  return sp;
}

// E over X ~ N(0,1) and Z uniform on {0.5, 5} of loss(Y (X - theta Z)),
// Y = sign(X - Z), by Simpson's rule on [-12, 12].
template<class Loss>
double
toy_risk_oracle(double theta, Loss loss)
{
  double r = 0.0;
  for (double z : { 0.5, 5.0 }) {
    auto f = [&](double x) {
      const double y = x > z ? 1.0 : -1.0;
      return oracle::phi(x) * loss(y * (x - theta * z));
    };
    // split at every jump or kink, staying off the cut points themselves
    std::vector<double> cuts = { -12.0, z, theta * z, theta * z - 1, theta * z + 1, 12.0 };
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
      if (cuts[k + 1] > cuts[k])
        r += 0.5 * oracle::simpson(f, cuts[k] + 1e-12, cuts[k + 1] - 1e-12, 4000);
  }
  return r;
}

} // namespace

TEST(Generate, DeterministicForFixedSeed)
{
  for (auto model : { SimModel::binary_response, SimModel::conditional_mean,
                      SimModel::one_bit_noiseless }) {
    const auto a = generate(spec(model, 200, 7, 3, 11));
    const auto b = generate(spec(model, 200, 7, 3, 11));
    EXPECT_EQ(a.data.x(), b.data.x());
    EXPECT_EQ(a.data.y(), b.data.y());
    EXPECT_EQ(a.data.z(), b.data.z());
    const auto c = generate(spec(model, 200, 7, 3, 12));
    EXPECT_NE(a.data.x(), c.data.x());
  }
}

TEST(Generate, RowRangesMatchFullDraw)
{
  const auto sp = spec(SimModel::conditional_mean, 100, 4, 2, 3);
  const auto full = generate(sp).data;
  const auto part = generate_rows(sp, 40, 70);
  EXPECT_EQ(part.x(), full.x().segment(40, 30));
  EXPECT_EQ(part.z(), full.z().middleRows(40, 30));
}

TEST(Generate, DefaultThetaIsUnitNorm)
{
  const auto sd = generate(spec(SimModel::conditional_mean, 10, 20, 5, 0));
  EXPECT_NEAR(sd.theta_star.norm(), 1.0, 1e-15);
  EXPECT_EQ((sd.theta_star.array() != 0.0).count(), 5);
  EXPECT_EQ(sd.theta_star(0), 1.0 / std::sqrt(5.0));
}

TEST(Generate, Validation)
{
  auto sp = spec(SimModel::conditional_mean, 10, 3, 4, 0);
  EXPECT_THROW(generate(sp), InputError);
  sp.s = 1;
  sp.noise_sd = 0.0;
  EXPECT_THROW(generate(sp), InputError);
  sp.model = SimModel::one_bit_noiseless;
  EXPECT_NO_THROW(generate(sp));
  EXPECT_THROW(gen_conditional_mean(sp), InputError);
  EXPECT_THROW(gen_binary_response(spec(SimModel::conditional_mean, 5, 2, 1, 0)), InputError);
}

TEST(Generate, NoiselessLabelsAreExact)
{
  const auto sd = generate(spec(SimModel::one_bit_noiseless, 2000, 10, 3, 21));
  const Vector index = sd.data.x() - sd.data.z() * sd.theta_star;
  for (Eigen::Index i = 0; i < index.size(); ++i)
    EXPECT_EQ(sd.data.y()(i), index(i) > 0 ? 1.0 : -1.0);
  EXPECT_EQ(zero_one_risk(sd.data, sd.theta_star, WeightScheme::unit()), 0.0);
}

TEST(Generate, ConditionalMeanLabelsMatchSignOfMargin)
{
  // P(flip) = Phi(-mu / noise_sd) = Phi(-20)
  const auto sd = generate(spec(SimModel::conditional_mean, 20000, 10, 3, 5));
  const Vector index = sd.data.x() - sd.data.z() * sd.theta_star;
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < index.size(); ++i)
    agree += (index(i) > 0 ? 1.0 : -1.0) == sd.data.y()(i);
  EXPECT_EQ(agree, 20000);
}

TEST(Generate, ClassBalance)
{
  const Eigen::Index n = 1000;
  int passing = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sd = generate(spec(SimModel::conditional_mean, n, 2, 1, seed));
    const double frac = static_cast<double>(sd.data.count(1.0)) / n;
    passing += std::abs(frac - 0.5) <= 1.5 / std::sqrt(double(n));
  }
  EXPECT_GE(passing, 95);
}

TEST(Generate, BinaryResponseNoiseFlipRate)
{
  // P(sign(index + u) != sign(index)) for index ~ N(0, 2), u ~ N(0, s^2)
  // equals atan(s / sqrt(2)) / pi.
  auto sp = spec(SimModel::binary_response, 40000, 1, 1, 9);
  sp.noise_sd = 0.5;
  const auto sd = generate(sp);
  const Vector index = sd.data.x() - sd.data.z() * sd.theta_star;
  double flips = 0;
  for (Eigen::Index i = 0; i < index.size(); ++i)
    flips += (index(i) > 0 ? 1.0 : -1.0) != sd.data.y()(i);
  const double p = std::atan(0.5 / std::sqrt(2.0)) / oracle::pi;
  EXPECT_NEAR(flips / 40000, p, 4 * std::sqrt(p * (1 - p) / 40000));
}

TEST(Generate, TruthBeatsPerturbedParameterOnZeroOneRisk)
{
  int held = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const auto sd = generate(spec(SimModel::binary_response, 5000, 10, 3, 100 + rep));
    CounterRng rng(rep);
    Vector dir(10);
    for (Eigen::Index j = 0; j < 10; ++j)
      dir(j) = rng.normal();
    const Vector other = sd.theta_star + dir / dir.norm();
    held += zero_one_risk(sd.data, sd.theta_star, WeightScheme::unit()) <=
            zero_one_risk(sd.data, other, WeightScheme::unit()) + 0.01;
  }
  EXPECT_GT(held, 10);
}

TEST(ToyRisks, PublishedSlopesAndMinimizer)
{
  const auto table = toy_population_risks(uniform_grid(0.0, 2.0, 0.01));
  EXPECT_EQ(table.theta_grid.size(), 201u);
  EXPECT_EQ(table.argmin01(), 1.0);
  EXPECT_NEAR(toy::slope(toy::risk_hinge, 1.0), -0.035, 3e-3);
  EXPECT_NEAR(toy::slope(toy::risk_exp, 1.0), -0.059, 3e-3);
  EXPECT_LT(table.slope_hinge[100], 0.0);
  EXPECT_LT(table.slope_exp[100], 0.0);
  for (std::size_t i = 0; i < table.theta_grid.size(); ++i) {
    EXPECT_TRUE(std::isfinite(table.risk01[i]));
    EXPECT_TRUE(std::isfinite(table.risk_hinge[i]));
    EXPECT_TRUE(std::isfinite(table.risk_exp[i]));
  }
}

TEST(ToyRisks, MatchQuadratureOracle)
{
  for (double theta : { -0.5, 0.0, 0.3, 1.0, 1.7, 2.5 }) {
    EXPECT_NEAR(toy::risk01(theta),
                toy_risk_oracle(theta, [](double u) { return u < 0 ? 1.0 : 0.0; }), 1e-6)
      << theta;
    EXPECT_NEAR(toy::risk_hinge(theta),
                toy_risk_oracle(theta, [](double u) { return std::max(1.0 - u, 0.0); }), 1e-6)
      << theta;
    EXPECT_NEAR(toy::risk_exp(theta),
                toy_risk_oracle(theta, [](double u) { return std::exp(-u); }), 1e-6)
      << theta;
  }
}

TEST(ToyRisks, MinimizedAtOneOnAnyGridContainingOne)
{
  for (double step : { 0.25, 0.1, 0.05, 0.001 }) {
    const auto t = toy_population_risks(uniform_grid(-1.0, 3.0, step));
    EXPECT_NEAR(t.argmin01(), 1.0, 1e-12) << step;
  }
}

TEST(EstimationError, Examples)
{
  Vector a(2), b(2);
  a << 3, -4;
  b.setZero();
  EXPECT_EQ(estimation_error(a, b, ErrorNorm::l2), 5.0);
  EXPECT_EQ(estimation_error(a, b, ErrorNorm::l1), 7.0);
  EXPECT_EQ(estimation_error(a, b, ErrorNorm::linf), 4.0);
  for (auto norm : { ErrorNorm::l1, ErrorNorm::l2, ErrorNorm::linf })
    EXPECT_EQ(estimation_error(a, a, norm), 0.0);
  EXPECT_THROW(estimation_error(a, Vector::Zero(3), ErrorNorm::l2), InputError);

  CounterRng rng(3);
  for (int t = 0; t < 100; ++t) {
    Vector u(6);
    for (Eigen::Index j = 0; j < 6; ++j)
      u(j) = rng.normal();
    const Vector zero = Vector::Zero(6);
    EXPECT_LE(estimation_error(u, zero, ErrorNorm::linf), estimation_error(u, zero, ErrorNorm::l2));
    EXPECT_LE(estimation_error(u, zero, ErrorNorm::l2),
              estimation_error(u, zero, ErrorNorm::l1) * (1 + 1e-15));
  }
}

TEST(Benchmark, SingleRepetitionIsDeterministic)
{
  const auto sp = spec(SimModel::conditional_mean, 300, 16, 3, 0);
  BenchmarkSettings st;
  st.tuning = BenchmarkTuning::fixed;
  st.path.lambda_tgt = 0.02;
  const auto a = run_benchmark(sp, st, 1, 42);
  const auto b = run_benchmark(sp, st, 1, 42);
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].l2, b.rows[0].l2);
  EXPECT_EQ(a.rows[0].seed, b.rows[0].seed);
  EXPECT_EQ(a.rows[0].lambda, 0.02);
  EXPECT_EQ(a.summary.sd_l2, 0.0);
  EXPECT_EQ(a.summary.mean_l2, a.rows[0].l2);
}

TEST(Benchmark, RowsIndependentOfThreadCount)
{
  const auto sp = spec(SimModel::conditional_mean, 200, 10, 2, 0);
  BenchmarkSettings st;
  st.cv_grid_size = 5;
  st.folds = 3;
  const auto one = run_benchmark(sp, st, 4, 7, 1);
  const auto many = run_benchmark(sp, st, 4, 7, 3);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(one.rows[r].repetition, static_cast<int>(r));
    EXPECT_EQ(one.rows[r].l1, many.rows[r].l1);
    EXPECT_EQ(one.rows[r].lambda, many.rows[r].lambda);
  }
  EXPECT_EQ(one.summary.mean_l2, many.summary.mean_l2);
  EXPECT_NE(one.rows[0].seed, one.rows[1].seed);
}

TEST(Benchmark, WarningsAreRecordedNotFatal)
{
  const auto sp = spec(SimModel::conditional_mean, 200, 10, 2, 0);
  BenchmarkSettings st;
  st.tuning = BenchmarkTuning::fixed;
  st.path.lambda_tgt = 1e-4;
  st.path.max_inner_iters = 1;
  const auto res = run_benchmark(sp, st, 2, 1);
  for (const auto& row : res.rows)
    EXPECT_NE(row.status, "ok");
  EXPECT_THROW(run_benchmark(sp, st, 0, 1), InputError);
}
