// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qoco/genoco.hpp"
#include "qoco/harness.hpp"
#include "qoco/ocs.hpp"
#include "qoco/offline_oracle.hpp"
#include "qoco/switchsim.hpp"
#include "qoco/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qoco;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Experiment {
  ExperimentConfig config;
  ExperimentReport report;
  std::vector<RunResult> runs;  // kept only when asked for
  double seconds = 0.0;
  fs::path out_dir;
};

class Suite {
 public:
  Suite(fs::path config_dir, fs::path scratch) : config_dir_(std::move(config_dir)), scratch_(std::move(scratch)) {}

  const Experiment& run(const std::string& name, bool keep_runs = false) {
    auto it = experiments_.find(name);
    if (it != experiments_.end()) return it->second;
    Experiment e;
    e.config = load_config(config_dir_ / (name + ".json"));
    e.config.write_traces = true;
    e.out_dir = scratch_ / "first" / name;
    fs::remove_all(e.out_dir);
    RunOptions opt;
    opt.out_dir = e.out_dir;
    if (keep_runs) opt.runs = &e.runs;
    const auto start = Clock::now();
    e.report = run_experiment(e.config, opt);
    e.seconds = seconds_since(start);
    std::cout << "  ran " << name << " in " << e.seconds << " s" << std::endl;
    return experiments_.emplace(name, std::move(e)).first->second;
  }

  const std::map<std::string, Experiment>& experiments() const { return experiments_; }
  const fs::path& scratch() const { return scratch_; }

 private:
  fs::path config_dir_;
  fs::path scratch_;
  std::map<std::string, Experiment> experiments_;
};

long certificate_failures(const Experiment& e, const std::string& name) {
  const json& f = e.report.report.at("certificate_failures");
  return f.contains(name) ? f.at(name).get<long>() : -1;
}

// Failure count, or a failure of the outcome when the certificate never ran.
void require_certificate(Outcome& o, const Experiment& e, const std::string& name) {
  const long n = certificate_failures(e, name);
  o.require(n >= 0, e.config.name + " did not evaluate " + name);
  o.require(n == 0, e.config.name + " " + name + " failed on " + std::to_string(n) + " rounds");
}

std::optional<double> fitted_slope(const Experiment& e, const std::string& metric) {
  const json& fits = e.report.report.at("fits");
  if (!fits.contains(metric) || fits.at(metric).at("slope").is_null()) return std::nullopt;
  return fits.at(metric).at("slope").get<double>();
}

double horizon_mean(const Experiment& e, const std::string& metric, long T) {
  for (const json& h : e.report.report.at("horizons"))
    if (h.at("T").get<long>() == T) return h.at(metric).at("mean").get<double>();
  throw Error("horizon " + std::to_string(T) + " missing from " + e.config.name);
}

// --- 1 -------------------------------------------------------------------

Outcome lindley_identity() {
  Outcome o;
  Rng rng(20240101);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int len = 1 + static_cast<int>(rng.index(512));
    const double drift = rng.uniform(-0.5, 0.5);
    std::vector<double> v(static_cast<std::size_t>(len));
    for (double& x : v) x = drift + rng.uniform(-1.0, 1.0);
    QueueState q = QueueState::zeros(1);
    PolicyTrace trace;
    for (int t = 0; t < len; ++t) {
      queue_update(q, Vector::Constant(1, v[static_cast<std::size_t>(t)]));
      TraceRecord r;
      r.t = t + 1;
      r.action = Vector::Zero(1);
      r.constraint_values = Vector::Constant(1, v[static_cast<std::size_t>(t)]);
      r.queue_vector = q.queues;
      trace.push_back(std::move(r));
    }
    double brute = 0.0;
    for (int i = 0; i < len; ++i) {
      double s = 0.0;
      for (int j = i; j < len; ++j) {
        s += v[static_cast<std::size_t>(j)];
        brute = std::max(brute, s);
      }
    }
    worst = std::max(worst, std::abs(brute - q.running_max[0]));
    worst = std::max(worst, std::abs(brute - max_violation(trace)[0]));
  }
  o.require(worst <= 1e-9, "max deviation " + std::to_string(worst));
  o.detail << "1000 sequences, max |brute - running max| = " << worst;
  return o;
}

// --- 2 -------------------------------------------------------------------

Outcome learner_certificates(const Suite& suite) {
  Outcome o;
  long runs = 0, evaluated = 0;
  for (const auto& [name, e] : suite.experiments()) {
    for (const json& run : e.report.report.at("runs")) {
      ++runs;
      const json& certs = run.at("certificates");
      if (!certs.contains("learner_regret")) continue;
      ++evaluated;
      const long n = certs.at("learner_regret").get<long>();
      o.require(n == 0, name + " T=" + std::to_string(run.at("T").get<long>()) + " seed " +
                            std::to_string(run.at("seed").get<long>()) + ": " + std::to_string(n) + " rounds");
    }
  }
  o.require(evaluated > 0 && evaluated == runs, std::to_string(runs - evaluated) + " runs lack the learner certificate");
  o.detail << evaluated << " of " << runs << " runs checked";
  return o;
}

// --- 3 -------------------------------------------------------------------

Outcome theorem2_convex(Suite& suite) {
  Outcome o;
  double seconds = 0.0;
  for (const char* name : {"ocs_hidden_set_sweep", "ocs_multi_task"}) {
    const Experiment& e = suite.run(name);
    seconds += e.seconds;
    const auto slope = fitted_slope(e, "max_violation");
    o.require(slope && *slope >= 0.3 && *slope <= 0.6, std::string(name) + " slope outside [0.3, 0.6]");
    require_certificate(o, e, "cum_viol_bd");
    o.detail << name << " slope " << (slope ? *slope : NAN) << "; ";
  }
  o.require(seconds < 600.0, "runtime");
  o.detail << "runtime " << seconds << " s";
  return o;
}

// --- 4 -------------------------------------------------------------------

Outcome theorem2_strongly_convex(Suite& suite) {
  Outcome o;
  double seconds = 0.0;
  for (const char* name : {"ocs_strongly_convex_a05", "ocs_strongly_convex_a1"}) {
    const Experiment& e = suite.run(name);
    seconds += e.seconds;
    const json& lr = e.report.report.at("fits").at("final_queue").at("log_ratio");
    const double dev = lr.at("max_relative_deviation").is_null() ? INFINITY
                                                                  : lr.at("max_relative_deviation").get<double>();
    o.require(dev <= 0.2, std::string(name) + " Q(T)/ln T deviates " + std::to_string(dev));
    require_certificate(o, e, "prop1");
    require_certificate(o, e, "q_str_cvx");
    o.detail << name << " ratio median " << lr.at("median").get<double>() << " max dev " << dev << "; ";
  }
  o.require(seconds < 600.0, "runtime");
  o.detail << "runtime " << seconds << " s";
  return o;
}

// --- 5 -------------------------------------------------------------------

Outcome proposition1_extremal_check(std::vector<double>* sequence_out) {
  Outcome o;
  const auto start = Clock::now();
  const long T = 100000;
  const Prop1Result r = verify_proposition1(1.0, Prop1Mode::kEqualityGreedy, 1.0, T);
  const double seconds = seconds_since(start);
  o.require(r.hypothesis_met, "hypothesis");
  o.require(static_cast<long>(r.sequence.size()) == T, "sequence length");
  // Recomputed here from the sequence: c = Q(1) = 1 gives c1 = 1.
  const double c1 = 1.0;
  double worst_log = -INFINITY, worst_sqrt = -INFINITY;
  for (long t = 1; t <= static_cast<long>(r.sequence.size()); ++t) {
    const double q = r.sequence[static_cast<std::size_t>(t - 1)];
    const double lt = std::log(static_cast<double>(t));
    worst_sqrt = std::max(worst_sqrt, q - std::sqrt(static_cast<double>(t)));
    if (t >= 3) worst_log = std::max(worst_log, q - (lt + 2.0 * std::log(lt) + c1));
  }
  o.require(worst_log <= 0.0, "log bound");
  o.require(worst_sqrt <= 1e-12, "sqrt bound");
  o.require(r.log_bound_holds && r.sqrt_bound_holds, "library verdict");
  o.require(seconds < 30.0, "runtime");
  o.detail << "Q(1e5) = " << r.sequence.back() << ", worst log margin " << worst_log << ", worst sqrt margin "
           << worst_sqrt << ", runtime " << seconds << " s";
  if (sequence_out) *sequence_out = r.sequence;
  return o;
}

// --- 6 -------------------------------------------------------------------

long negative_regret_rounds(const Experiment& e) {
  long n = 0;
  for (const RunResult& r : e.runs)
    for (double v : r.regret_series) n += v < -1e-9 ? 1 : 0;
  return n;
}

Outcome theorem3(Suite& suite) {
  Outcome o;
  const Experiment& plain = suite.run("genoco_plain");
  const auto regret = fitted_slope(plain, "regret");
  const auto viol = fitted_slope(plain, "max_violation");
  o.require(regret && *regret <= 0.6, "regret slope");
  o.require(viol && *viol <= 0.85, "violation slope");
  require_certificate(o, plain, "main_eq");
  const Experiment& sc = suite.run("genoco_sign_controlled", true);
  const long negative = negative_regret_rounds(sc);
  o.require(negative == 0, "sign-controlled stream has " + std::to_string(negative) + " negative-regret rounds");
  require_certificate(o, sc, "thm3_conditional");
  const double seconds = plain.seconds + sc.seconds;
  o.require(seconds < 600.0, "runtime");
  o.detail << "regret slope " << (regret ? *regret : NAN) << ", violation slope " << (viol ? *viol : NAN)
           << ", sign-controlled negative rounds " << negative << ", runtime " << seconds << " s";
  return o;
}

// --- 7 -------------------------------------------------------------------

Outcome theorem4(Suite& suite) {
  Outcome o;
  const Experiment& plain = suite.run("genoco_strongly_convex");
  require_certificate(o, plain, "thm4_regret");
  require_certificate(o, plain, "gronwall_ineq");
  const Experiment& sc = suite.run("genoco_strongly_convex_sign_controlled", true);
  const long negative = negative_regret_rounds(sc);
  o.require(negative == 0, "sign-controlled stream has " + std::to_string(negative) + " negative-regret rounds");
  require_certificate(o, sc, "thm4_regret");
  require_certificate(o, sc, "thm4_conditional");
  const double seconds = plain.seconds + sc.seconds;
  o.require(seconds < 600.0, "runtime");
  o.detail << "regret slope " << fitted_slope(plain, "regret").value_or(NAN) << ", conditional stream final Q mean "
           << horizon_mean(sc, "final_queue", sc.config.horizons.back()) << ", runtime " << seconds << " s";
  return o;
}

// --- 8 -------------------------------------------------------------------

Outcome theorem5(Suite& suite) {
  Outcome o;
  const long T = 16384;
  double seconds = 0.0;
  std::map<int, double> at_T;
  for (int S : {2, 4, 8}) {
    const Experiment& e = suite.run("ocs_s_feasible_S" + std::to_string(S));
    seconds += e.seconds;
    const auto slope = fitted_slope(e, "max_violation");
    o.require(slope && *slope <= 0.6, "S=" + std::to_string(S) + " slope");
    require_certificate(o, e, "gen_reg_decomp");
    at_T[S] = horizon_mean(e, "max_violation", T);
    o.detail << "S=" << S << " slope " << slope.value_or(NAN) << " V(T)=" << at_T[S] << "; ";
  }
  for (int S : {4, 8}) {
    const double ratio = at_T[S] / at_T[2];
    const double cap = 1.3 * std::sqrt(S / 2.0);
    o.require(ratio <= cap, "S=" + std::to_string(S) + " ratio " + std::to_string(ratio) + " above sqrt(S) band");
  }
  o.require(seconds < 900.0, "runtime");
  o.detail << "runtime " << seconds << " s";
  return o;
}

// --- 9 -------------------------------------------------------------------

// Sinkhorn-balanced positive matrix or a random convex combination of permutations.
Vector random_doubly_stochastic(int n, Rng& rng, bool sinkhorn) {
  if (sinkhorn) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(0.01, 1.0);
    for (int it = 0; it < 10000; ++it) {
      m = m.array().colwise() / m.rowwise().sum().array();
      m = m.array().rowwise() / m.colwise().sum().array();
      if ((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15) break;
    }
    Vector x(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) x[i * n + j] = m(i, j);
    return x;
  }
  Vector x = Vector::Zero(n * n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  const int parts = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n * n)));
  double total = 0.0;
  for (int c = 0; c < parts; ++c) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.index(i + 1)]);
    const double w = rng.uniform(0.0, 1.0);
    total += w;
    for (int i = 0; i < n; ++i) x[i * n + perm[static_cast<std::size_t>(i)]] += w;
  }
  return x / total;
}

Outcome switch_simulator(Suite& suite) {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(909);
  double worst_recon = 0.0, worst_weight = 0.0;
  int over_count = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 5;
    const Vector x = random_doubly_stochastic(n, rng, trial % 2 == 0);
    const BvnDecomposition dec = bvn_decompose(x, n);
    worst_recon = std::max(worst_recon, (bvn_reconstruct(dec) - x).cwiseAbs().maxCoeff());
    double w = 0.0;
    for (const BvnComponent& c : dec.components) w += c.weight;
    worst_weight = std::max(worst_weight, std::abs(w - 1.0));
    if (static_cast<int>(dec.components.size()) > (n - 1) * (n - 1) + 1) ++over_count;
  }
  o.require(worst_recon <= 1e-8, "reconstruction " + std::to_string(worst_recon));
  o.require(worst_weight <= 1e-9, "weight sum");
  o.require(over_count == 0, std::to_string(over_count) + " decompositions exceed (N-1)^2+1 components");

  // Sampling: entry frequencies over M draws within 3 binomial standard errors.
  const int M = 4000;
  int entries = 0, outside = 0;
  double max_z = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const Vector x = random_doubly_stochastic(n, rng, trial % 2 == 0);
    const BvnDecomposition dec = bvn_decompose(x, n);
    Vector freq = Vector::Zero(n * n);
    for (int s = 0; s < M; ++s) freq += sample_matching(dec, rng);
    freq /= M;
    for (int i = 0; i < n * n; ++i) {
      const double var = x[i] * (1.0 - x[i]) / M;
      if (var < 1e-14) {
        o.require(std::abs(freq[i] - x[i]) < 1e-6, "degenerate entry sampled");
        continue;
      }
      const double z = std::abs(freq[i] - x[i]) / std::sqrt(var);
      ++entries;
      max_z = std::max(max_z, z);
      if (z > 3.0) ++outside;
    }
  }
  // Under unbiased sampling about 0.27% of entries land outside 3 sigma.
  o.require(outside <= entries / 100, std::to_string(outside) + " of " + std::to_string(entries) + " entries outside 3 sigma");
  const double bvn_seconds = seconds_since(start);

  double seconds = bvn_seconds;
  for (const char* name : {"switch_N2", "switch_N3"}) {
    const Experiment& e = suite.run(name);
    seconds += e.seconds;
    const auto slope = fitted_slope(e, "switch_max_queue");
    o.require(slope.value_or(0.0) <= 0.6, std::string(name) + " mean max queue slope");
    require_certificate(o, e, "bvn");
    require_certificate(o, e, "feasibility");
    std::vector<std::pair<double, double>> max_pairs;
    for (const json& h : e.report.report.at("horizons"))
      max_pairs.emplace_back(h.at("T").get<double>(), h.at("switch_max_queue").at("max").get<double>());
    double max_slope = NAN;
    try {
      max_slope = fit_slope(max_pairs).slope;
    } catch (const InsufficientSamplesError&) {
    }
    o.detail << name << " slope(mean of max) " << slope.value_or(NAN) << " slope(max over seeds) " << max_slope
             << "; ";
  }
  o.require(seconds < 900.0, "runtime");
  o.detail << "bvn max error " << worst_recon << ", sampling " << outside << "/" << entries
           << " outside 3 sigma (max z " << max_z << "), runtime " << seconds << " s";
  return o;
}

// --- 10 ------------------------------------------------------------------

RoundReveal reveal_of(FunctionOracle cost, FunctionOracle g) {
  RoundReveal r;
  r.cost = std::move(cost);
  r.constraints.push_back(std::move(g));
  return r;
}

// The cost rewards the policy's current action, so the moving policy beats
// every fixed grid point and each phase ends with negative regret.
PolicyTrace negative_regret_stream(int rounds, int* restarts, bool* resets_ok) {
  const AdmissibleSet box = AdmissibleSet::cube(1, 0.0, 1.0);
  const Grid grid = Grid::build(box, GridSpec{21, 0});
  GenOcoOptions opt;
  opt.V = 1.0;
  opt.variant = GenOcoVariant::kPhaseRestart;
  GenOcoPolicy policy(box, LearnerMode::kAdaptiveConvex, opt, 0, &grid);
  PolicyTrace trace;
  *restarts = 0;
  *resets_ok = true;
  for (int t = 1; t <= rounds; ++t) {
    const Vector x = policy.action();
    const int phases = policy.phase_count();
    trace.push_back(policy.round(reveal_of(FunctionOracle::quadratic(4.0, x, -1.0),
                                           FunctionOracle::affine(Vector{{-1.0}}, 0.5 + (t % 2) * 0.1))));
    if (policy.phase_count() != phases) {
      ++*restarts;
      *resets_ok = *resets_ok && policy.phase_count() == phases + 1 && policy.queue() == 0.0 &&
                   policy.phase_start() == t + 1 && policy.last_phase_regret() < 0.0;
    }
  }
  return trace;
}

Outcome variant_sanity(Suite& suite, std::string* stream_csv) {
  Outcome o;
  const auto start = Clock::now();
  const Experiment& theta = suite.run("genoco_theta");
  require_certificate(o, theta, "theta_recursion");
  require_certificate(o, theta, "theta_accounting");
  const Experiment& restart = suite.run("genoco_phase_restart");
  require_certificate(o, restart, "phase_reset");
  int restarts = 0;
  bool resets_ok = false;
  const PolicyTrace stream = negative_regret_stream(400, &restarts, &resets_ok);
  o.require(restarts >= 1, "constructed stream never restarted");
  o.require(resets_ok, "restart did not reset the queue or advance the phase");
  if (stream_csv) *stream_csv = trace_csv(stream);
  const double seconds = seconds_since(start);
  o.require(seconds < 120.0, "runtime");
  o.detail << "constructed stream restarts " << restarts << ", runtime " << seconds << " s";
  return o;
}

// --- 11 ------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism(const Suite& suite, const std::vector<double>& prop1_sequence, const std::string& stream_csv) {
  Outcome o;
  const auto start = Clock::now();
  long files = 0, digests = 0;
  for (const auto& [name, e] : suite.experiments()) {
    const fs::path second = suite.scratch() / "second" / name;
    fs::remove_all(second);
    RunOptions opt;
    opt.out_dir = second;
    const ExperimentReport again = run_experiment(e.config, opt);
    const json& a = e.report.report.at("runs");
    const json& b = again.report.at("runs");
    o.require(a.size() == b.size(), name + " run count");
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      ++digests;
      o.require(a[i].at("trace_digest") == b[i].at("trace_digest"), name + " digest differs");
      const std::string rel = a[i].value("trace_file", "");
      if (rel.empty()) continue;
      ++files;
      o.require(slurp(e.out_dir / rel) == slurp(second / rel), name + "/" + rel + " differs");
    }
    fs::remove_all(second);
    fs::remove_all(e.out_dir / "traces");
  }
  std::vector<double> seq_again;
  proposition1_extremal_check(&seq_again);
  o.require(seq_again == prop1_sequence, "extremal sequence differs");
  int restarts = 0;
  bool ok = false;
  o.require(trace_csv(negative_regret_stream(400, &restarts, &ok)) == stream_csv, "restart stream differs");
  o.detail << files << " trace files byte-identical, " << digests << " digests equal, runtime "
           << seconds_since(start) << " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qoco acceptance suite"};
  std::string scratch = "acceptance_scratch";
  std::string configs = QOCO_CONFIG_DIR;
  app.add_option("--scratch", scratch, "directory for reports and traces");
  app.add_option("--configs", configs, "directory holding the experiment configs");
  CLI11_PARSE(app, argc, argv);

  Suite suite(configs, scratch);
  std::vector<std::pair<int, Outcome>> results;
  std::vector<double> prop1_sequence;
  std::string stream_csv;
  auto record = [&](int id, const char* title, const std::function<Outcome()>& body) {
    std::cout << "criterion " << id << ": " << title << std::endl;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << o.detail.str()
              << std::endl;
    results.emplace_back(id, std::move(o));
  };

  record(1, "Lindley identity", lindley_identity);
  record(3, "OCS convex violation growth", [&] { return theorem2_convex(suite); });
  record(4, "OCS strongly convex queue growth", [&] { return theorem2_strongly_convex(suite); });
  record(5, "extremal queue sequence", [&] { return proposition1_extremal_check(&prop1_sequence); });
  record(6, "generalized OCO, convex costs", [&] { return theorem3(suite); });
  record(7, "generalized OCO, strongly convex costs", [&] { return theorem4(suite); });
  record(8, "S-feasible constraints", [&] { return theorem5(suite); });
  record(9, "input-queued switch", [&] { return switch_simulator(suite); });
  record(10, "theta-damped and phase-restart variants", [&] { return variant_sanity(suite, &stream_csv); });
  record(2, "base-learner regret certificates", [&] { return learner_certificates(suite); });
  record(11, "determinism", [&] { return determinism(suite, prop1_sequence, stream_csv); });

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  std::cout << "\nsummary\n";
  for (const auto& [id, o] : results) {
    std::cout << "  criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "\n";
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
