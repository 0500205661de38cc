#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qoco/adversaries.hpp"
#include "qoco/base_learners.hpp"
#include "qoco/core.hpp"
#include "qoco/geometry.hpp"
#include "qoco/genoco.hpp"
#include "qoco/offline_oracle.hpp"

namespace qoco {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum class PolicyKind { kOcs, kGenOco, kSwitch };

const char* to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

// Growth expectation checked on the per-horizon seed means of a metric.
struct Expectation {
  std::string metric;
  std::optional<double> slope_min;
  std::optional<double> slope_max;
  // Ratio test: metric / ln T within this relative band of its median.
  std::optional<double> log_ratio_tolerance;
};

struct SwitchSpec {
  int N = 2;
  int service_max = 0;
  std::string replay_csv;
  Vector hidden;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PolicyKind policy = PolicyKind::kOcs;
  LearnerMode learner = LearnerMode::kAdaptiveConvex;
  GenOcoVariant variant = GenOcoVariant::kPlain;
  CostMode cost_mode = CostMode::kConvex;
  std::optional<AdmissibleSet> set;  // unused by the switch policy
  AdversaryConfig adversary;
  bool sign_controlled = false;  // wrap the cost stream with regret_sign_controller
  ProblemParams params;          // T is set per horizon
  std::vector<long> horizons;
  std::vector<std::uint64_t> seeds;
  GridSpec grid;
  SwitchSpec switch_spec;
  std::optional<double> theta_alpha;
  int restart_check_every = 1;
  double ftpl_scale = 1.0;
  // Rounds that get the sampled convexity and magnitude checks: the first
  // check_prefix rounds and then every check_every-th round.
  int check_prefix = 8;
  int check_every = 4096;
  bool write_traces = true;
  std::map<std::string, bool> certificate_toggles;
  std::vector<Expectation> expectations;
  nlohmann::json echo;

  bool certificate_enabled(const std::string& name) const;
};

// Throws ConfigError on unknown keys, bad values, or incompatible
// scenario/policy pairs.
ExperimentConfig parse_config(const nlohmann::json& json);
ExperimentConfig load_config(const std::filesystem::path& path);

// Independent stream seeds derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct RunResult {
  long T = 0;
  std::uint64_t seed = 0;
  PolicyTrace trace;

  Vector violation;             // per constraint: max subinterval sum (OCS) or sum of g+ (genoco)
  double max_violation = 0.0;   // max over constraints
  double final_queue = 0.0;     // max_i Q_i(T)
  std::optional<double> regret;  // genoco: Regret_T against the grid optimum
  double epsilon_grid = 0.0;
  double switch_max_queue = 0.0;  // switch: max physical queue at T

  // Per-round series (index t-1).
  std::vector<double> queue_norm;        // ||Q(t)||_2
  std::vector<double> regret_series;     // genoco
  std::vector<double> epsilon_series;    // genoco
  std::vector<double> physical_max;      // switch: max_ij physical queue
  std::vector<double> surrogate_regret;  // vs grid optimum
  std::vector<double> learner_bound;

  // Constants the certificates used.
  double G = 0.0;
  double D = 0.0;
  double V = 0.0;
  double alpha = 0.0;
  double F = 0.0;
  int phase_count = 1;
  std::optional<Prop1Result> prop1;

  std::map<std::string, long> certificate_failures;
  std::map<std::string, int> first_failure_round;

  long total_failures() const;
  void fail(const std::string& name, int round, long count = 1);
  void pass(const std::string& name) { certificate_failures.emplace(name, 0); }
};

// Shared per-experiment state (the offline grid).
class ExperimentContext {
 public:
  explicit ExperimentContext(const ExperimentConfig& config);
  const ExperimentConfig& config() const { return *config_; }
  const Grid& grid() const { return grid_; }

 private:
  const ExperimentConfig* config_;
  Grid grid_;
};

// One fresh adversary + policy for T rounds, with certificates evaluated.
RunResult run_single(const ExperimentContext& context, long T, std::uint64_t seed);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int used = 0;
};

// OLS on (ln T, ln metric), skipping non-positive metrics. Throws
// InsufficientSamplesError with fewer than 3 usable pairs.
FitResult fit_slope(const std::vector<std::pair<double, double>>& pairs);

struct LogRatioResult {
  std::vector<double> ratios;  // metric / ln T
  double median = 0.0;
  double max_relative_deviation = 0.0;
  bool within = false;
};

// Requires T > 1 for every pair.
LogRatioResult log_ratio_test(const std::vector<std::pair<double, double>>& pairs, double tolerance);

struct ExperimentReport {
  nlohmann::json report;
  nlohmann::json timing;
  long certificate_failures = 0;
  long expectation_failures = 0;

  bool ok() const { return certificate_failures == 0 && expectation_failures == 0; }
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // traces and report files when set
  std::vector<RunResult>* runs = nullptr;
};

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Human-readable summary of a report JSON.
std::string summarize_report(const nlohmann::json& report);

}  // namespace qoco
