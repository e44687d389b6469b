#include "smooth_threshold/io.hpp"
#include "smooth_threshold/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace smooth_threshold;

namespace {

LoadedData
load(const std::string& text, const std::string& roles = "")
{
  std::istringstream in(text);
  return load_csv(in, parse_roles(roles));
}

std::string
error_of(const std::string& text, const std::string& roles = "")
{
  try {
    load(text, roles);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Numbers, ShortestRoundTrip)
{
  CounterRng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<int>(rng.below(40)) - 20);
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Numbers, StrictParse)
{
  EXPECT_EQ(*parse_double(" 1.5 "), 1.5);
  EXPECT_EQ(*parse_double("+3"), 3.0);
  EXPECT_EQ(*parse_double("1e-3"), 1e-3);
  EXPECT_FALSE(parse_double(""));
  EXPECT_FALSE(parse_double("NA"));
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double("1,5"));
}

TEST(Csv, QuotingRoundTrip)
{
  const std::vector<std::string> fields = { "plain", "with,comma", "with \"quote\"", "line\nbreak", "" };
  std::ostringstream os;
  write_csv_row(os, fields);
  write_csv_row(os, { "a", "b" });
  EXPECT_EQ(os.str().substr(0, 6), "plain,");
  std::istringstream in(os.str());
  const auto rows = read_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], fields);
  EXPECT_EQ(rows[1], (std::vector<std::string>{ "a", "b" }));
}

TEST(Csv, LineEndingsBomAndDelimiters)
{
  std::istringstream in("\xEF\xBB\xBFy;x\r\n1;2\n\n-1;3\n");
  const auto rows = read_csv(in, ';');
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "y");
  EXPECT_EQ(rows[2], (std::vector<std::string>{ "-1", "3" }));
}

TEST(Document, RoundTrip)
{
  Document doc;
  doc.section("config").set("kernel", "gaussian");
  doc.section("config").set("delta", 0.25);
  doc.section("config").set("seed", std::uint64_t{ 18446744073709551615u });
  doc.section("result").set("status", "converged");
  doc.section("config").set("delta", 0.5); // overwrite keeps order
  auto& t = doc.table("theta", { "j", "value" });
  t.add({ 0, 0.125 });
  t.add({ 1, -3e-9 });
  const std::string text = doc.str();
  std::istringstream in(text);
  const Document back = Document::parse(in);
  EXPECT_EQ(back.get("config", "delta"), "0.5");
  EXPECT_EQ(back.get("config", "seed"), "18446744073709551615");
  EXPECT_EQ(back.get("result", "status"), "converged");
  EXPECT_FALSE(back.get("result", "missing"));
  ASSERT_NE(back.find_table("theta"), nullptr);
  EXPECT_EQ(back.find_table("theta")->rows[1][1], "-3e-09");
  EXPECT_EQ(back.str(), text);
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Document, MalformedInput)
{
  std::istringstream orphan("key = value\n");
  EXPECT_THROW(Document::parse(orphan), InputError);
  std::istringstream noeq("[config]\nkey value\n");
  EXPECT_THROW(Document::parse(noeq), InputError);
}

TEST(Roles, Parsing)
{
  auto r = parse_roles("response=label,threshold=age,covariates=a:b,weight=w");
  EXPECT_EQ(r.response, "label");
  EXPECT_EQ(r.threshold, "age");
  EXPECT_EQ(r.covariates, (std::vector<std::string>{ "a", "b" }));
  EXPECT_EQ(r.weight, "w");
  r = parse_roles("covariates=rest");
  EXPECT_TRUE(r.covariates.empty());
  EXPECT_EQ(r.response, "y");
  EXPECT_THROW(parse_roles("colour=red"), InputError);
  EXPECT_THROW(parse_roles("response"), InputError);
}

TEST(LoadCsv, ThreeRows)
{
  const auto l = load("y,x,z1,z2\n1,0.5,1,2\n-1,1.5,3,4\n1,-2,5,6\n");
  EXPECT_EQ(l.data.n(), 3);
  EXPECT_EQ(l.data.d(), 2);
  EXPECT_EQ(l.data.z()(2, 1), 6.0);
  EXPECT_EQ(l.covariate_names, (std::vector<std::string>{ "z1", "z2" }));
  EXPECT_TRUE(l.notes.empty());
  EXPECT_FALSE(l.weights);
}

TEST(LoadCsv, ZeroOneResponse)
{
  const auto l = load("y,x,z1\n1,0.5,1\n0,1.5,3\n");
  EXPECT_EQ(l.data.y()(1), -1.0);
  ASSERT_EQ(l.notes.size(), 1u);
  EXPECT_NE(l.notes[0].find("mapped 0 to -1"), std::string::npos);
}

TEST(LoadCsv, RolesSelectAndOrderColumns)
{
  const auto l = load("w,b,a,label,t\n2,1,7,1,0.1\n3,2,8,-1,0.2\n",
                      "response=label,threshold=t,covariates=a:b,weight=w");
  EXPECT_EQ(l.data.d(), 2);
  EXPECT_EQ(l.data.z()(0, 0), 7.0);
  EXPECT_EQ(l.data.z()(0, 1), 1.0);
  ASSERT_TRUE(l.weights);
  EXPECT_EQ((*l.weights)(1), 3.0);
  const auto rest = load("w,b,a,label,t\n2,1,7,1,0.1\n3,2,8,-1,0.2\n",
                         "response=label,threshold=t,weight=w");
  EXPECT_EQ(rest.covariate_names, (std::vector<std::string>{ "b", "a" }));
}

TEST(LoadCsv, Errors)
{
  EXPECT_NE(error_of("").find("empty"), std::string::npos);
  EXPECT_NE(error_of("y,x,z1\n").find("no data rows"), std::string::npos);
  EXPECT_NE(error_of("y,x,z1\n1,2,3\n", "threshold=age").find("'age'"), std::string::npos);
  const std::string na = error_of("y,x,z1\n1,2,3\n-1,2,NA\n1,1,1\n1,,2\n");
  EXPECT_NE(na.find("rows 2, 4"), std::string::npos) << na;
  EXPECT_NE(error_of("y,x,z1\n2,2,3\n").find("-1/+1 or 0/1"), std::string::npos);
  EXPECT_NE(error_of("y,x\n1,2\n").find("no covariate"), std::string::npos);
  EXPECT_THROW(load_csv("/nonexistent/file.csv", ColumnRoles{}), InputError);
}

TEST(LoadCsv, SimulatedDatasetRoundTripsBitExactly)
{
  SimSpec sp;
  sp.n = 500;
  sp.d = 12;
  sp.s = 3;
  sp.seed = 99;
  for (auto model : { SimModel::conditional_mean, SimModel::binary_response }) {
    sp.model = model;
    const auto data = generate(sp).data;
    std::ostringstream os;
    write_dataset_csv(os, data);
    const auto back = load(os.str());
    EXPECT_EQ(back.data.x(), data.x());
    EXPECT_EQ(back.data.y(), data.y());
    EXPECT_EQ(back.data.z(), data.z());
  }
}
