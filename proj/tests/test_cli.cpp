#include "smooth_threshold/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace smooth_threshold;
namespace fs = std::filesystem;

namespace {

struct Run
{
  int status;
  std::string out;
  std::string err;
};

Run
invoke(std::vector<std::string> args)
{
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return { status, out.str(), err.str() };
}

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("smooth_threshold_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  std::string simulate(const std::string& name, const std::string& n = "400",
                       const std::string& d = "20")
  {
    const auto r = invoke({ "simulate", "--n", n, "--d", d, "--sparsity", "3", "--seed", "7",
                            "--out", path(name) });
    EXPECT_EQ(r.status, 0) << r.err;
    return path(name);
  }

  static std::string slurp(const std::string& p)
  {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

  static Document parse(const std::string& text)
  {
    std::istringstream in(text);
    return Document::parse(in);
  }

  static std::vector<std::vector<std::string>> csv(const std::string& text)
  {
    std::istringstream in(text);
    return read_csv(in);
  }

  fs::path dir;
};

} // namespace

TEST_F(CliTest, FitWritesResultSchema)
{
  const auto data = simulate("sim.csv");
  const auto r = invoke({ "fit", "-i", data, "--delta", "1", "--lambda-tgt", "0.01" });
  ASSERT_EQ(r.status, 0) << r.err;
  const Document doc = parse(r.out);
  for (const char* key : { "lambda_tgt", "exit_omega", "nnz", "objective", "converged" })
    EXPECT_TRUE(doc.get("result", key)) << key;
  EXPECT_EQ(doc.get("result", "lambda_tgt"), "0.01");
  const auto* coef = doc.find_table("coefficients");
  ASSERT_NE(coef, nullptr);
  EXPECT_EQ(coef->rows.size(), 20u);
  EXPECT_EQ(coef->header, (std::vector<std::string>{ "index", "name", "theta" }));
  long nnz = 0;
  for (const auto& row : coef->rows)
    nnz += *parse_double(row[2]) != 0.0;
  EXPECT_EQ(std::to_string(nnz), *doc.get("result", "nnz"));
  EXPECT_LE(*parse_double(*doc.get("result", "exit_omega")),
            *parse_double(*doc.get("config", "eps_tgt")));
  EXPECT_EQ(doc.get("config", "weights"), "inverse_class_probability");
  EXPECT_EQ(doc.get("config", "seed"), "0");
  EXPECT_EQ(doc.get("config", "n"), "400");
}

TEST_F(CliTest, ConfigEchoReproducesTheRun)
{
  const auto data = simulate("sim.csv");
  const std::vector<std::string> args = { "cv", "-i", data, "--delta", "1", "--seed", "3",
                                          "--folds", "3", "--out", path("a.txt") };
  ASSERT_EQ(invoke(args).status, 0);
  auto threaded = args;
  threaded.back() = path("b.txt");
  threaded.insert(threaded.end(), { "--threads", "3" });
  ASSERT_EQ(invoke(threaded).status, 0);
  const Document a = parse(slurp(path("a.txt")));
  const Document b = parse(slurp(path("b.txt")));
  EXPECT_EQ(a.find_table("coefficients")->rows, b.find_table("coefficients")->rows);
  EXPECT_TRUE(a.get("cv", "grid"));
  EXPECT_EQ(a.get("cv", "lambda_1se"), b.get("cv", "lambda_1se"));
  for (const char* key : { "kernel", "delta", "nu", "eta", "radius", "num_stages", "lambda0" })
    EXPECT_TRUE(a.get("config", key)) << key;
}

TEST_F(CliTest, ToyRisksCsv)
{
  const auto r = invoke({ "toy-risks", "--lo", "0", "--hi", "2", "--step", "0.01" });
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 202u);
  EXPECT_EQ(rows[0][4], "slope_hinge");
  EXPECT_EQ(rows[101][0], "1");
  EXPECT_NEAR(*parse_double(rows[101][4]), -0.035, 3e-3);
  EXPECT_NEAR(*parse_double(rows[101][5]), -0.059, 3e-3);
  // config echo goes to stderr when the CSV goes to stdout
  EXPECT_EQ(parse(r.err).get("result", "argmin_risk01"), "1");
}

TEST_F(CliTest, SimulateFitPathNnzGrowsAlongThePath)
{
  const auto data = simulate("sim.csv", "600", "40");
  EXPECT_TRUE(fs::exists(data + ".theta.csv"));
  EXPECT_TRUE(fs::exists(data + ".config.txt"));
  ASSERT_EQ(invoke({ "fit", "-i", data, "--delta", "1", "--lambda-tgt", "0.005" }).status, 0);
  const auto r = invoke({ "path", "-i", data, "--delta", "1", "--lambda-tgt", "0.005",
                          "--stages", "25", "--out", path("path.csv"), "--trace",
                          path("trace.csv") });
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(slurp(path("path.csv")));
  ASSERT_EQ(rows.size(), 27u);
  EXPECT_EQ(rows[0][4], "nnz");
  EXPECT_EQ(rows[0].size(), 8u + 40u);
  int ok = 0, pairs = 0;
  for (std::size_t i = 2; i < rows.size(); ++i, ++pairs) {
    EXPECT_LT(*parse_double(rows[i][1]), *parse_double(rows[i - 1][1]));
    ok += std::stol(rows[i][4]) >= std::stol(rows[i - 1][4]);
  }
  EXPECT_GE(ok, 0.9 * pairs);
  EXPECT_TRUE(parse(slurp(path("path.csv.config.txt"))).get("config", "lambda_tgt"));
  EXPECT_EQ(csv(slurp(path("trace.csv")))[0][2], "objective");
}

TEST_F(CliTest, StandardizeReportsOriginalScale)
{
  const auto data = simulate("sim.csv", "300", "5");
  // multiply z2 by 10 and write a second file
  auto rows = csv(slurp(data));
  for (std::size_t i = 1; i < rows.size(); ++i)
    rows[i][3] = format_double(10.0 * *parse_double(rows[i][3]));
  {
    std::ofstream f(path("scaled.csv"), std::ios::binary);
    for (const auto& r : rows)
      write_csv_row(f, r);
  }
  auto fit = [&](const std::string& file) {
    const auto r = invoke({ "fit", "-i", file, "--standardize", "--delta", "1",
                            "--lambda-tgt", "0.01", "--eps-tgt", "1e-9" });
    EXPECT_EQ(r.status, 0) << r.err;
    return parse(r.out).find_table("coefficients")->rows;
  };
  const auto base = fit(data), scaled = fit(path("scaled.csv"));
  for (std::size_t j = 0; j < base.size(); ++j) {
    const double factor = j == 1 ? 0.1 : 1.0;
    EXPECT_NEAR(*parse_double(scaled[j][2]), factor * *parse_double(base[j][2]), 1e-6) << j;
  }
}

TEST_F(CliTest, WeightColumnActivatesPerSampleScheme)
{
  std::ofstream(path("w.csv")) << "y,x,z1,w\n1,0.5,1,2\n-1,-0.2,0.3,1\n1,1.1,-0.4,1\n-1,0.1,2,3\n";
  const auto r = invoke({ "fit", "-i", path("w.csv"), "--roles", "weight=w", "--delta", "1",
                          "--lambda-tgt", "0.01" });
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(parse(r.out).get("config", "weights"), "per_sample");
}

TEST_F(CliTest, ErrorRecordAndExitCode)
{
  auto r = invoke({ "fit", "-i", path("missing.csv"), "--lambda-tgt", "0.1", "--delta", "1" });
  EXPECT_EQ(r.status, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(r.err.rfind("{\"error\":\"input\"", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("missing.csv"), std::string::npos);

  std::ofstream(path("bad.csv")) << "y,x,z1\n1,2,NA\n";
  r = invoke({ "fit", "-i", path("bad.csv"), "--lambda-tgt", "0.1", "--delta", "1" });
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("rows 1"), std::string::npos);

  r = invoke({ "fit", "--no-such-flag" });
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(r.err.rfind("{\"error\":\"usage\"", 0), 0u) << r.err;

  r = invoke({});
  EXPECT_EQ(r.status, 2);

  r = invoke({ "simulate", "--n", "10", "--d", "2", "--sparsity", "5" });
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("sparsity"), std::string::npos);
}

TEST_F(CliTest, SolverWarningsKeepExitStatusZero)
{
  const auto data = simulate("sim.csv");
  const auto r = invoke({ "fit", "-i", data, "--delta", "1", "--lambda-tgt", "0.001",
                          "--max-iters", "1" });
  EXPECT_EQ(r.status, 0) << r.err;
  const Document doc = parse(r.out);
  EXPECT_EQ(doc.get("result", "converged"), "false");
  ASSERT_NE(doc.find_section("warnings"), nullptr);
  EXPECT_FALSE(doc.find_section("warnings")->entries.empty());
}

TEST_F(CliTest, TheoryDrivenTuning)
{
  const auto data = simulate("sim.csv", "500", "30");
  const auto r = invoke({ "fit", "-i", data, "--s", "3", "--beta", "2", "--c-lambda", "0.05" });
  ASSERT_EQ(r.status, 0) << r.err;
  const Document doc = parse(r.out);
  const double delta = *parse_double(*doc.get("result", "delta"));
  EXPECT_NEAR(delta, std::pow(3 * std::log(30.0) / 500, 0.2), 1e-12);
  EXPECT_NEAR(*parse_double(*doc.get("result", "lambda_tgt")),
              0.05 * std::sqrt(std::log(30.0) / (500 * delta)), 1e-12);
}

TEST_F(CliTest, AdaptSubcommands)
{
  const auto data = simulate("sim.csv", "256", "16");
  auto r = invoke({ "adapt-beta", "-i", data, "--s", "3", "--c-lambda", "0.05" });
  ASSERT_EQ(r.status, 0) << r.err;
  Document doc = parse(r.out);
  EXPECT_EQ(doc.get("lepski", "fit_count"), "9");
  ASSERT_NE(doc.find_table("lepski_grid"), nullptr);
  EXPECT_EQ(doc.find_table("lepski_grid")->rows.size(), 9u);

  r = invoke({ "adapt-s", "-i", data, "--beta", "2", "--c-delta", "2", "--c-lambda", "0.05" });
  ASSERT_EQ(r.status, 0) << r.err;
  doc = parse(r.out);
  EXPECT_EQ(doc.get("lepski", "fit_count"), "4"); // d = 16 sits on a tie: m = 3
}

TEST_F(CliTest, BenchTable)
{
  const auto r = invoke({ "bench", "--n", "200", "--d", "8", "--sparsity", "2", "--reps", "3",
                          "--tune", "fixed", "--lambda-tgt", "0.01", "--seed", "5" });
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0][0], "repetition");
  EXPECT_TRUE(parse(r.err).get("summary", "mean_l2"));
}

TEST_F(CliTest, DiagnoseProbes)
{
  const auto data = simulate("sim.csv", "200", "6");
  auto r = invoke({ "diagnose", "--probe", "gradient", "-i", data, "--delta", "0.7",
                    "--at", "random" });
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(parse(r.out).get("probe", "passed"), "true");

  r = invoke({ "diagnose", "--probe", "bias", "--d", "8", "--sparsity", "3", "--deltas",
               "0.5,0.25,0.125" });
  ASSERT_EQ(r.status, 0) << r.err;
  Document doc = parse(r.out);
  EXPECT_EQ(doc.get("config", "at"), "reflected");
  EXPECT_GE(*parse_double(*doc.get("values", "log_log_slope")), 1.8);

  r = invoke({ "diagnose", "--probe", "curvature", "-i", data, "--delta", "1",
               "--support-size", "2", "--directions", "20" });
  ASSERT_EQ(r.status, 0) << r.err;
  doc = parse(r.out);
  EXPECT_TRUE(doc.get("values", "rho_minus"));

  r = invoke({ "diagnose", "--probe", "bias", "--model", "binary_response", "--deltas", "0.5" });
  EXPECT_EQ(r.status, 2);
}
