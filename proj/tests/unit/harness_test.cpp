#include "qoco/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qoco/trace_io.hpp"

namespace qoco {
namespace {

using nlohmann::json;

std::vector<std::pair<double, double>> sample(const std::vector<double>& Ts, double (*f)(double)) {
  std::vector<std::pair<double, double>> out;
  for (double T : Ts) out.emplace_back(T, f(T));
  return out;
}

TEST(FitSlopeTest, PowerLawsRecoverExponent) {
  const std::vector<double> Ts{256, 1024, 4096, 16384};
  EXPECT_NEAR(fit_slope(sample(Ts, [](double T) { return 2.0 * std::sqrt(T); })).slope, 0.5, 1e-12);
  EXPECT_NEAR(fit_slope(sample(Ts, [](double T) { return 5.0 * std::pow(T, 0.75); })).slope, 0.75, 1e-12);
}

// ln(3 ln T) against ln T at ln T = 2, 4, 8 is ln 3 + ln 2 * {1, 2, 3} against {2, 4, 8}.
TEST(FitSlopeTest, LogarithmicGrowthHasSmallSlope) {
  const std::vector<double> Ts{std::exp(2.0), std::exp(4.0), std::exp(8.0)};
  const FitResult fit = fit_slope(sample(Ts, [](double T) { return 3.0 * std::log(T); }));
  const double xs[3] = {2.0, 4.0, 8.0};
  const double ys[3] = {std::log(6.0), std::log(12.0), std::log(24.0)};
  const double xm = (xs[0] + xs[1] + xs[2]) / 3.0, ym = (ys[0] + ys[1] + ys[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (xs[i] - xm) * (ys[i] - ym);
    sxx += (xs[i] - xm) * (xs[i] - xm);
  }
  EXPECT_NEAR(fit.slope, sxy / sxx, 1e-12);
  EXPECT_GT(fit.slope, 0.0);
  EXPECT_LT(fit.slope, std::log(2.0) / 2.0);
}

TEST(FitSlopeTest, SkipsNonPositiveAndNeedsThree) {
  EXPECT_THROW(fit_slope({{10, 1}, {100, 2}}), InsufficientSamplesError);
  EXPECT_THROW(fit_slope({{10, 1}, {100, 0}, {1000, 3}}), InsufficientSamplesError);
  const FitResult f = fit_slope({{10, 1}, {100, 10}, {1000, 100}, {10000, -1}});
  EXPECT_EQ(f.used, 3);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
}

TEST(LogRatioTest, ExactLogPasses) {
  std::vector<std::pair<double, double>> pairs;
  for (double T : {100.0, 1000.0, 10000.0}) pairs.emplace_back(T, 4.0 * std::log(T));
  const LogRatioResult r = log_ratio_test(pairs, 0.2);
  EXPECT_TRUE(r.within);
  EXPECT_NEAR(r.median, 4.0, 1e-12);
  EXPECT_NEAR(r.max_relative_deviation, 0.0, 1e-12);
}

TEST(LogRatioTest, SqrtGrowthFails) {
  std::vector<std::pair<double, double>> pairs;
  for (double T : {100.0, 1000.0, 10000.0}) pairs.emplace_back(T, std::sqrt(T));
  EXPECT_FALSE(log_ratio_test(pairs, 0.2).within);
}

json minimal_ocs() {
  return json{{"name", "unit_ocs"},
              {"policy", "ocs"},
              {"set", {{"kind", "cube"}, {"dim", 1}, {"lo", 0.0}, {"hi", 1.0}}},
              {"adversary", {{"scenario", "hidden_set"}, {"hidden_point", {0.4}}}},
              {"horizons", {32, 64, 128}},
              {"grid", {{"points_per_dimension", 21}}}};
}

TEST(ParseConfigTest, AcceptsMinimalConfig) {
  const ExperimentConfig c = parse_config(minimal_ocs());
  EXPECT_EQ(c.policy, PolicyKind::kOcs);
  EXPECT_EQ(c.horizons, (std::vector<long>{32, 64, 128}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1}));
  EXPECT_TRUE(c.certificate_enabled("lindley"));
}

TEST(ParseConfigTest, RejectsBadInput) {
  json unknown = minimal_ocs();
  unknown["colour"] = "blue";
  EXPECT_THROW(parse_config(unknown), ConfigError);
  json decreasing = minimal_ocs();
  decreasing["horizons"] = {64, 32};
  EXPECT_THROW(parse_config(decreasing), ConfigError);
  json with_cost = minimal_ocs();
  with_cost["adversary"]["cost"] = "random_linear";
  EXPECT_THROW(parse_config(with_cost), ConfigError);
  json genoco_no_cost = minimal_ocs();
  genoco_no_cost["policy"] = "genoco";
  EXPECT_THROW(parse_config(genoco_no_cost), ConfigError);
  json bad_set = minimal_ocs();
  bad_set["set"] = {{"kind", "torus"}};
  EXPECT_THROW(parse_config(bad_set), ConfigError);
  json ftpl_on_box = minimal_ocs();
  ftpl_on_box["learner"] = "ftpl";
  EXPECT_THROW(parse_config(ftpl_on_box), ConfigError);
}

TEST(DeriveSeedTest, StreamsDifferAndRepeat) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
}

PolicyTrace small_trace(int T, int d, int k) {
  PolicyTrace trace;
  for (int t = 1; t <= T; ++t) {
    TraceRecord r;
    r.t = t;
    r.action = Vector::Constant(d, 0.25 * t);
    r.constraint_values = Vector::Constant(k, -0.5);
    r.queue_vector = Vector::Zero(k);
    r.step_size = 0.1;
    trace.push_back(r);
  }
  return trace;
}

TEST(TraceCsvTest, RowsAndHeader) {
  const std::string csv = trace_csv(small_trace(3, 1, 1));
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "t,x_1,cost,g_1,Q_1,eta,grad_norm");
  EXPECT_EQ(lines[1], "1,0.25,0,-0.5,0,0.1,0");
}

TEST(TraceCsvTest, WideHeader) {
  EXPECT_EQ(trace_csv_header(2, 2), "t,x_1,x_2,cost,g_1,g_2,Q_1,Q_2,eta,grad_norm");
  const std::string csv = trace_csv(small_trace(2, 2, 2));
  EXPECT_EQ(std::count(csv.begin(), csv.begin() + static_cast<long>(csv.find('\n')), ','), 9);
}

TEST(TraceCsvTest, EmitIsByteIdenticalOnRerun) {
  const std::filesystem::path dir = std::filesystem::path(::testing::TempDir()) / "qoco_trace_test";
  std::filesystem::remove_all(dir);
  const PolicyTrace trace = small_trace(5, 2, 1);
  emit_traces(trace, dir / "a" / "trace.csv");
  emit_traces(trace, dir / "b.csv");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a" / "trace.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "b.csv"), trace_csv(trace));
  std::filesystem::remove_all(dir);
}

TEST(TraceCsvTest, EmptyTraceRejected) {
  std::ostringstream out;
  EXPECT_THROW(write_trace_csv({}, out), Error);
}

TEST(DigestTest, FnvKnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex_digest(0xabcULL), "0000000000000abc");
}

TEST(RunExperimentTest, OcsHiddenPointCertificatesPass) {
  const ExperimentConfig c = parse_config(minimal_ocs());
  std::vector<RunResult> runs;
  RunOptions opt;
  opt.runs = &runs;
  const ExperimentReport rep = run_experiment(c, opt);
  EXPECT_EQ(rep.certificate_failures, 0) << rep.report.dump(2);
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[2].trace.size(), 128u);
  EXPECT_EQ(rep.report["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(rep.report["runs"].size(), 3u);
}

TEST(RunExperimentTest, GenOcoPlainCertificatesPass) {
  json j{{"name", "unit_genoco"},
         {"policy", "genoco"},
         {"set", {{"kind", "cube"}, {"dim", 1}, {"lo", 0.0}, {"hi", 1.0}}},
         {"adversary", {{"scenario", "hidden_set"}, {"hidden_point", {0.5}}, {"cost", "random_linear"}}},
         {"horizons", {32, 64, 128}},
         {"grid", {{"points_per_dimension", 21}}}};
  const ExperimentReport rep = run_experiment(parse_config(j));
  EXPECT_EQ(rep.certificate_failures, 0) << rep.report["certificate_failures"].dump();
  EXPECT_TRUE(rep.report["runs"][0].contains("regret"));
}

TEST(RunExperimentTest, SwitchCertificatesPass) {
  json j{{"name", "unit_switch"},
         {"policy", "switch"},
         {"switch", {{"N", 2}}},
         {"horizons", {16, 32, 64}},
         {"grid", {{"points_per_dimension", 20}}}};
  std::vector<RunResult> runs;
  RunOptions opt;
  opt.runs = &runs;
  const ExperimentReport rep = run_experiment(parse_config(j), opt);
  EXPECT_EQ(rep.certificate_failures, 0) << rep.report["certificate_failures"].dump();
  EXPECT_EQ(runs.back().physical_max.size(), 64u);
}

TEST(RunExperimentTest, SameSeedSameDigest) {
  const ExperimentConfig c = parse_config(minimal_ocs());
  const ExperimentReport a = run_experiment(c), b = run_experiment(c);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(a.report["runs"][i]["trace_digest"], b.report["runs"][i]["trace_digest"]);
}

}  // namespace
}  // namespace qoco
