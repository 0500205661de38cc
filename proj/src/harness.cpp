#include "qoco/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "qoco/checks.hpp"
#include "qoco/ocs.hpp"
#include "qoco/switchsim.hpp"
#include "qoco/trace_io.hpp"

namespace qoco {
namespace {

using nlohmann::json;

bool within(double lhs, double rhs) { return lhs <= rhs + 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)}); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json from_vector(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

AdmissibleSet parse_set(const json& j) {
  const std::string kind = get<std::string>(j, "kind", "");
  if (kind == "box") {
    check_keys(j, {"kind", "lo", "hi"}, "set");
    return AdmissibleSet::box(to_vector(j.at("lo"), "set.lo"), to_vector(j.at("hi"), "set.hi"));
  }
  if (kind == "cube") {
    check_keys(j, {"kind", "dim", "lo", "hi"}, "set");
    return AdmissibleSet::cube(get<int>(j, "dim", 1), get<double>(j, "lo", -1.0), get<double>(j, "hi", 1.0));
  }
  if (kind == "ball") {
    check_keys(j, {"kind", "center", "radius"}, "set");
    return AdmissibleSet::ball(to_vector(j.at("center"), "set.center"), get<double>(j, "radius", 1.0));
  }
  if (kind == "simplex") {
    check_keys(j, {"kind", "dim"}, "set");
    return AdmissibleSet::simplex(get<int>(j, "dim", 2));
  }
  if (kind == "birkhoff") {
    check_keys(j, {"kind", "n"}, "set");
    return AdmissibleSet::birkhoff(get<int>(j, "n", 2));
  }
  throw ConfigError("unknown set kind '" + kind + "'");
}

AffineSpec parse_affine(const json& j, const std::string& where) {
  check_keys(j, {"slope", "offset"}, where);
  return AffineSpec{to_vector(j.at("slope"), where + ".slope"), get<double>(j, "offset", 0.0)};
}

AdversaryConfig parse_adversary(const json& j) {
  check_keys(j,
             {"scenario", "k", "hidden_point", "hidden_radius", "alpha", "S", "beta", "slope_scale", "b_lo", "b_hi",
              "cost", "cost_scale", "cost_alpha", "cost_direction", "script"},
             "adversary");
  AdversaryConfig a;
  a.scenario = scenario_from_string(get<std::string>(j, "scenario", "hidden_set"));
  a.k = get<int>(j, "k", 1);
  if (j.contains("hidden_point")) a.hidden_point = to_vector(j.at("hidden_point"), "adversary.hidden_point");
  a.hidden_radius = get<double>(j, "hidden_radius", a.hidden_radius);
  a.alpha = get<double>(j, "alpha", a.alpha);
  a.S = get<int>(j, "S", a.S);
  a.beta = get<double>(j, "beta", a.beta);
  a.slope_scale = get<double>(j, "slope_scale", a.slope_scale);
  a.b_lo = get<double>(j, "b_lo", a.b_lo);
  a.b_hi = get<double>(j, "b_hi", a.b_hi);
  a.cost = cost_kind_from_string(get<std::string>(j, "cost", "none"));
  a.cost_scale = get<double>(j, "cost_scale", a.cost_scale);
  a.cost_alpha = get<double>(j, "cost_alpha", a.cost_alpha);
  if (j.contains("cost_direction")) a.cost_direction = to_vector(j.at("cost_direction"), "adversary.cost_direction");
  if (j.contains("script")) {
    if (!j.at("script").is_array()) throw ConfigError("adversary.script must be an array");
    for (const json& r : j.at("script")) {
      check_keys(r, {"cost", "constraints"}, "script round");
      ScriptedRound round;
      if (r.contains("cost")) round.cost = parse_affine(r.at("cost"), "script.cost");
      for (const json& g : r.at("constraints")) round.constraints.push_back(parse_affine(g, "script.constraint"));
      a.script.push_back(std::move(round));
    }
  }
  return a;
}

bool script_has_costs(const AdversaryConfig& a) {
  return !a.script.empty() &&
         std::all_of(a.script.begin(), a.script.end(), [](const ScriptedRound& r) { return r.cost.has_value(); });
}

bool stream_has_costs(const AdversaryConfig& a) {
  return a.cost != CostKind::kNone || (a.scenario == Scenario::kCustomScripted && script_has_costs(a));
}

bool is_check_round(const ExperimentConfig& cfg, int t) {
  return t <= cfg.check_prefix || (cfg.check_every > 0 && t % cfg.check_every == 0);
}

// Convexity and magnitude spot checks of one reveal.
void spot_check(const ExperimentConfig& cfg, const RoundReveal& reveal, const AdmissibleSet& set, double F,
                std::uint64_t seed, int t, RunResult& r) {
  if (!is_check_round(cfg, t)) return;
  if (cfg.certificate_enabled("convexity")) {
    bool ok = true;
    std::uint64_t stream = 0;
    for (const FunctionOracle& g : reveal.constraints)
      ok = verify_convexity_sample(g, set, 200, derive_seed(seed, 1000 + 16 * t + stream++)) && ok;
    if (reveal.cost) ok = verify_convexity_sample(*reveal.cost, set, 200, derive_seed(seed, 1000 + 16 * t + 15)) && ok;
    if (ok) {
      r.pass("convexity");
    } else {
      r.fail("convexity", t);
    }
  }
  if (cfg.certificate_enabled("magnitude")) {
    const double m = sampled_magnitude(reveal, set, 1000, derive_seed(seed, 7000 + t));
    if (within(m, F)) {
      r.pass("magnitude");
    } else {
      r.fail("magnitude", t);
    }
  }
}

// Running surrogate regret of an OCS-style policy against the grid optimum.
class SurrogateTracking {
 public:
  SurrogateTracking(const Grid& grid, int k) : grid_(grid), tracker_(grid, FeasibilitySpec{}, k) {}

  void add(const FunctionOracle& surrogate, const Vector& x, double lipschitz, RunResult& r) {
    const Vector values = grid_.evaluate(surrogate);
    tracker_.add_values(&values, {}, lipschitz);
    policy_ += surrogate.value(x);
    r.surrogate_regret.push_back(policy_ - tracker_.best().second);
    epsilon_.push_back(tracker_.epsilon());
  }
  void add_values(const Vector& values, double policy_value, double lipschitz, RunResult& r) {
    tracker_.add_values(&values, {}, lipschitz);
    policy_ += policy_value;
    r.surrogate_regret.push_back(policy_ - tracker_.best().second);
    epsilon_.push_back(tracker_.epsilon());
  }

  void reset() {
    tracker_.reset();
    policy_ = 0.0;
  }

  double policy_total() const { return policy_; }
  double cumulative_at(int index) const { return tracker_.cumulative_at(index); }
  const std::vector<double>& epsilon() const { return epsilon_; }

 private:
  const Grid& grid_;
  GridTracker tracker_;
  double policy_ = 0.0;
  std::vector<double> epsilon_;
};

// With per_phase set, the bound restarts wherever the trace's phase changes.
void check_learner(const ExperimentConfig& cfg, LearnerMode mode, double D, const std::vector<double>& epsilon,
                   RunResult& r, bool per_phase = false) {
  if (mode == LearnerMode::kFtpl || !cfg.certificate_enabled("learner_regret")) return;
  if (per_phase) {
    r.learner_bound.clear();
    std::size_t begin = 0;
    while (begin < r.trace.size()) {
      std::size_t end = begin;
      while (end < r.trace.size() && r.trace[end].phase == r.trace[begin].phase) ++end;
      const PolicyTrace phase(r.trace.begin() + static_cast<long>(begin), r.trace.begin() + static_cast<long>(end));
      const std::vector<double> bound = learner_regret_bound(phase, mode, D);
      r.learner_bound.insert(r.learner_bound.end(), bound.begin(), bound.end());
      begin = end;
    }
  } else {
    r.learner_bound = learner_regret_bound(r.trace, mode, D);
  }
  r.pass("learner_regret");
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    if (!within(r.surrogate_regret[i], r.learner_bound[i] + epsilon[i])) r.fail("learner_regret", static_cast<int>(i + 1));
  }
}

void record_certificate(const ExperimentConfig& cfg, const CertificateInputs& in, Certificate which, RunResult& r) {
  const std::string name = to_string(which);
  if (!cfg.certificate_enabled(name)) return;
  r.pass(name);
  const std::vector<int> failures = verify_recursion_certificates(in, which);
  if (!failures.empty()) r.fail(name, failures.front(), static_cast<long>(failures.size()));
}

void check_lindley(const ExperimentConfig& cfg, RunResult& r) {
  try {
    r.violation = max_violation(r.trace);
    r.pass("lindley");
  } catch (const ConsistencyError&) {
    if (!cfg.certificate_enabled("lindley")) throw;
    r.fail("lindley", static_cast<int>(r.trace.size()));
    // Fall back to the direct scan.
    const int k = static_cast<int>(r.trace.front().constraint_values.size());
    r.violation = Vector::Zero(k);
    for (int i = 0; i < k; ++i) {
      std::vector<double> inc;
      for (const TraceRecord& rec : r.trace) inc.push_back(rec.constraint_values[i]);
      r.violation[i] = max_subinterval_sum(inc);
    }
  }
  r.max_violation = r.violation.maxCoeff();
  r.final_queue = r.trace.back().queue_vector.maxCoeff();
}

// Certificates shared by the OCS and switch runs.
void finish_ocs(const ExperimentConfig& cfg, LearnerMode mode, int k, double D, double max_grad, double alpha,
                bool per_round_feasible, const std::vector<double>& epsilon, RunResult& r) {
  r.D = D;
  r.G = 2.0 * max_grad;
  r.alpha = alpha;
  check_lindley(cfg, r);
  check_learner(cfg, mode, D, epsilon, r);
  if (mode == LearnerMode::kFtpl || !per_round_feasible || r.G <= 0.0) return;

  CertificateInputs in;
  in.trace = &r.trace;
  in.G = r.G;
  in.D = D;
  in.alpha = alpha;
  if (mode == LearnerMode::kAdaptiveConvex) {
    record_certificate(cfg, in, Certificate::kQIneq, r);
    if (cfg.certificate_enabled("cum_viol_bd")) {
      r.pass("cum_viol_bd");
      const double c = r.G * D * std::sqrt(2.0 * k);
      for (std::size_t i = 0; i < r.queue_norm.size(); ++i) {
        if (!within(r.queue_norm[i], c * std::sqrt(static_cast<double>(i + 1)))) {
          r.fail("cum_viol_bd", static_cast<int>(i + 1));
        }
      }
    }
  } else if (alpha > 0.0) {
    record_certificate(cfg, in, Certificate::kQStrCvx, r);
    const double c = k * r.G * r.G / (4.0 * alpha);
    r.prop1 = verify_proposition1_sequence(c, r.queue_norm);
    if (cfg.certificate_enabled("prop1")) {
      r.pass("prop1");
      const Prop1Result& p = *r.prop1;
      if (!p.hypothesis_met) r.fail("prop1", p.hypothesis_failure_round);
      if (!(p.log_bound_holds && p.sqrt_bound_holds && p.integral_bound_holds)) {
        r.fail("prop1", static_cast<int>(r.trace.size()));
      }
    }
  }
}

RunResult run_ocs(const ExperimentContext& ctx, long T, std::uint64_t seed) {
  const ExperimentConfig& cfg = ctx.config();
  const AdmissibleSet& set = *cfg.set;
  AdversaryConfig ac = cfg.adversary;
  ac.rng_seed = derive_seed(seed, 1);
  Adversary adv(ac, set);
  const AdversaryConfig& resolved = adv.config();
  const int k = resolved.k;
  OcsPolicy policy(set, k, cfg.learner, derive_seed(seed, 2), cfg.ftpl_scale);

  RunResult r;
  r.T = T;
  r.seed = seed;
  r.F = adv.magnitude_bound();
  r.trace.reserve(static_cast<std::size_t>(T));
  const bool s_feasible = resolved.scenario == Scenario::kSFeasible;
  SurrogateTracking tracking(ctx.grid(), k);
  std::vector<RoundReveal> stream;
  stream.reserve(static_cast<std::size_t>(T));
  std::vector<double> hidden_surrogate_regret;
  double hidden_surrogate = 0.0;
  double max_grad = 0.0;
  double alpha = std::numeric_limits<double>::infinity();
  const double Lg = adv.constraint_gradient_bound();

  for (int t = 1; t <= T; ++t) {
    const Vector x = policy.action();
    RoundReveal reveal = adv.reveal(t, x);
    for (const FunctionOracle& g : reveal.constraints) {
      max_grad = std::max(max_grad, g.subgradient(x).norm());
      alpha = std::min(alpha, g.strong_convexity());
    }
    spot_check(cfg, reveal, set, r.F, seed, t, r);
    TraceRecord rec = policy.round(reveal);
    const FunctionOracle& surrogate = *policy.last_surrogate();
    tracking.add(surrogate, x, 2.0 * rec.queue_vector.sum() * Lg, r);
    if (s_feasible) {
      hidden_surrogate += surrogate.value(resolved.hidden_point);
      hidden_surrogate_regret.push_back(tracking.policy_total() - hidden_surrogate);
    }
    r.queue_norm.push_back(rec.queue_vector.norm());
    r.trace.push_back(std::move(rec));
    stream.push_back(std::move(reveal));
  }

  if (cfg.certificate_enabled("feasibility")) {
    r.pass("feasibility");
    if (!certify_feasibility(resolved, stream, resolved.hidden_point)) r.fail("feasibility", 0);
  }
  finish_ocs(cfg, cfg.learner, k, set.diameter(), max_grad, alpha, !s_feasible, tracking.epsilon(), r);
  if (s_feasible && r.G > 0.0) {
    CertificateInputs in;
    in.trace = &r.trace;
    in.G = r.G;
    in.F = r.F;
    in.S = resolved.S;
    in.surrogate_regret_at_comparator = std::move(hidden_surrogate_regret);
    record_certificate(cfg, in, Certificate::kGenRegDecomp, r);
  }
  return r;
}

RunResult run_genoco(const ExperimentContext& ctx, long T, std::uint64_t seed) {
  const ExperimentConfig& cfg = ctx.config();
  const AdmissibleSet& set = *cfg.set;
  const Grid& grid = ctx.grid();
  AdversaryConfig ac = cfg.sign_controlled ? regret_sign_controller(cfg.adversary) : cfg.adversary;
  ac.rng_seed = derive_seed(seed, 1);
  Adversary adv(ac, set);
  const AdversaryConfig& resolved = adv.config();
  const double D = set.diameter();
  const double Lf = adv.cost_gradient_bound();
  const double Lg = adv.constraint_gradient_bound();

  ProblemParams params = cfg.params;
  params.T = T;
  params.d = set.dimension();
  params.k = 1;
  if (!params.G) params.G = std::max(Lf, 2.0 * Lg);
  if (!params.alpha && resolved.cost_alpha > 0.0) params.alpha = resolved.cost_alpha;
  const double V = choose_V(params, cfg.cost_mode);

  GenOcoOptions options;
  options.V = V;
  options.variant = cfg.variant;
  options.theta_alpha = cfg.theta_alpha;
  options.restart_check_every = cfg.restart_check_every;
  options.ftpl_scale = cfg.ftpl_scale;
  GenOcoPolicy policy(set, cfg.learner, options, derive_seed(seed, 2), &grid);

  RunResult r;
  r.T = T;
  r.seed = seed;
  r.V = V;
  r.D = D;
  r.F = adv.magnitude_bound();
  r.alpha = params.alpha.value_or(0.0);
  r.trace.reserve(static_cast<std::size_t>(T));
  GridTracker costs(grid, FeasibilitySpec{Feasibility::kPerRound, 1}, 1);
  SurrogateTracking tracking(grid, 1);
  std::vector<RoundReveal> stream;
  stream.reserve(static_cast<std::size_t>(T));
  std::vector<double> surrogate_regret_at_comparator;
  double policy_cost = 0.0;
  double max_cost_grad = 0.0;
  double max_constraint_grad = 0.0;
  double sum_g_plus = 0.0;
  double sum_theta = 0.0;
  int tracked_phase = 1;

  for (int t = 1; t <= T; ++t) {
    const Vector x = policy.action();
    RoundReveal reveal = adv.reveal(t, x);
    const FunctionOracle& f = *reveal.cost;
    const FunctionOracle& g = reveal.constraints.front();
    max_cost_grad = std::max(max_cost_grad, f.subgradient(x).norm());
    max_constraint_grad = std::max(max_constraint_grad, g.subgradient(x).norm());
    spot_check(cfg, reveal, set, r.F, seed, t, r);
    TraceRecord rec = policy.round(reveal);

    const Vector f_values = grid.evaluate(f);
    const Vector g_values = grid.evaluate(g);
    costs.add_values(&f_values, {g_values}, Lf);
    const double Q = rec.queue_vector[0];
    const Vector surrogate_values = V * f_values + 2.0 * Q * g_values.cwiseMax(0.0);
    // A restart also resets the learner, so its regret is measured per phase.
    if (cfg.variant == GenOcoVariant::kPhaseRestart && rec.phase != tracked_phase) {
      tracking.reset();
      tracked_phase = rec.phase;
    }
    tracking.add_values(surrogate_values, policy.last_surrogate()->value(x), V * Lf + 2.0 * Q * Lg, r);

    policy_cost += rec.cost_value;
    std::pair<int, double> best;
    try {
      best = costs.best();
    } catch (const InfeasibleError&) {
      throw InfeasibleError("no grid point satisfies every constraint up to round " + std::to_string(t) +
                            "; refine the grid or place the hidden point on it");
    }
    r.regret_series.push_back(policy_cost - best.second);
    r.epsilon_series.push_back(costs.epsilon());
    surrogate_regret_at_comparator.push_back(tracking.policy_total() - tracking.cumulative_at(best.first));
    sum_g_plus += std::max(0.0, rec.constraint_values[0]);
    sum_theta += rec.theta;
    r.queue_norm.push_back(Q);
    r.trace.push_back(std::move(rec));
    stream.push_back(std::move(reveal));
  }

  r.G = std::max(max_cost_grad, 2.0 * max_constraint_grad);
  r.phase_count = policy.phase_count();
  r.violation = Vector::Constant(1, sum_g_plus);
  r.max_violation = sum_g_plus;
  r.final_queue = r.trace.back().queue_vector[0];
  r.regret = r.regret_series.back();
  r.epsilon_grid = r.epsilon_series.back();

  if (cfg.certificate_enabled("feasibility")) {
    r.pass("feasibility");
    if (!certify_feasibility(resolved, stream, resolved.hidden_point)) r.fail("feasibility", 0);
  }
  if (cfg.certificate_enabled("grad_bd")) {
    r.pass("grad_bd");
    for (const TraceRecord& rec : r.trace) {
      if (!within(rec.surrogate_grad_norm, (V + rec.queue_vector[0]) * r.G)) r.fail("grad_bd", rec.t);
    }
  }

  switch (cfg.variant) {
    case GenOcoVariant::kPlain: {
      check_learner(cfg, cfg.learner, D, tracking.epsilon(), r);
      if (cfg.certificate_enabled("violation_identity")) {
        r.pass("violation_identity");
        double prev = 0.0;
        double running = 0.0;
        for (const TraceRecord& rec : r.trace) {
          const double q = rec.queue_vector[0];
          running += std::max(0.0, rec.constraint_values[0]);
          if (q < prev || std::abs(q - running) > 1e-9 * std::max(1.0, running)) r.fail("violation_identity", rec.t);
          prev = q;
        }
      }
      if (r.G <= 0.0 || cfg.learner == LearnerMode::kFtpl) break;
      CertificateInputs in;
      in.trace = &r.trace;
      in.G = r.G;
      in.D = D;
      in.V = V;
      in.alpha = r.alpha;
      in.regret_at_comparator = r.regret_series;
      in.surrogate_regret_at_comparator = surrogate_regret_at_comparator;
      if (cfg.cost_mode == CostMode::kConvex) {
        record_certificate(cfg, in, Certificate::kMainEq, r);
        if (cfg.certificate_enabled("thm3_conditional")) {
          r.pass("thm3_conditional");
          const double GD = r.G * D;
          for (std::size_t i = 0; i < r.trace.size(); ++i) {
            if (r.regret_series[i] < 0.0) continue;
            const double st = std::sqrt(static_cast<double>(i + 1));
            if (!within(r.queue_norm[i], 2.0 * GD * st + std::sqrt(2.0 * GD * V * st))) {
              r.fail("thm3_conditional", static_cast<int>(i + 1));
            }
          }
        }
      } else if (r.alpha > 0.0) {
        record_certificate(cfg, in, Certificate::kGronwallIneq, r);
        const double G0 = *params.G;
        const double g2a = G0 * G0 / r.alpha;
        if (cfg.certificate_enabled("thm4_regret")) {
          r.pass("thm4_regret");
          for (std::size_t i = 1; i < r.trace.size(); ++i) {
            const double lt = std::log(static_cast<double>(i + 1));
            if (!within(r.regret_series[i], g2a * lt + r.epsilon_series[i])) r.fail("thm4_regret", static_cast<int>(i + 1));
          }
        }
        if (cfg.certificate_enabled("thm4_conditional")) {
          r.pass("thm4_conditional");
          for (std::size_t i = 1; i < r.trace.size(); ++i) {
            if (r.regret_series[i] < 0.0) continue;
            const double lt = std::log(static_cast<double>(i + 1));
            const double q = r.queue_norm[i];
            if (!within(q * q, 2.0 * V * g2a * lt)) r.fail("thm4_conditional", static_cast<int>(i + 1));
          }
        }
      }
      break;
    }
    case GenOcoVariant::kThetaDamped: {
      check_learner(cfg, cfg.learner, D, tracking.epsilon(), r);
      const double a = policy.theta_alpha();
      if (cfg.certificate_enabled("theta_recursion")) {
        r.pass("theta_recursion");
        double prev = 0.0;
        for (const TraceRecord& rec : r.trace) {
          const double expected = std::max(0.0, prev + std::max(0.0, rec.constraint_values[0])) / (1.0 + a);
          if (rec.queue_vector[0] != expected || rec.theta != a * expected) r.fail("theta_recursion", rec.t);
          prev = rec.queue_vector[0];
        }
      }
      if (cfg.certificate_enabled("theta_accounting")) {
        r.pass("theta_accounting");
        if (!within(sum_g_plus, r.final_queue + sum_theta)) r.fail("theta_accounting", static_cast<int>(T));
      }
      break;
    }
    case GenOcoVariant::kPhaseRestart: {
      check_learner(cfg, cfg.learner, D, tracking.epsilon(), r, true);
      if (cfg.certificate_enabled("phase_reset")) {
        r.pass("phase_reset");
        int phase = 1;
        for (const TraceRecord& rec : r.trace) {
          if (rec.phase != phase) {
            const double g_plus = std::max(0.0, rec.constraint_values[0]);
            if (rec.phase != phase + 1 || rec.queue_vector[0] != g_plus) r.fail("phase_reset", rec.t);
            phase = rec.phase;
          }
        }
      }
      break;
    }
  }
  return r;
}

RunResult run_switch(const ExperimentContext& ctx, long T, std::uint64_t seed) {
  const ExperimentConfig& cfg = ctx.config();
  const SwitchSpec& spec = cfg.switch_spec;
  SwitchConfig sc;
  sc.N = spec.N;
  sc.mode = cfg.learner;
  sc.ftpl_scale = cfg.ftpl_scale;
  sc.policy_seed = derive_seed(seed, 2);
  sc.adversary_seed = derive_seed(seed, 1);
  sc.hidden = spec.hidden;
  sc.service_max = spec.service_max;
  if (!spec.replay_csv.empty()) sc.replay = load_switch_csv(spec.replay_csv, spec.N);
  SwitchSimulator sim(sc);
  const Vector& hidden = sim.config().hidden;
  const int n = spec.N;
  const int k = n * n;
  const AdmissibleSet set = AdmissibleSet::birkhoff(n);

  RunResult r;
  r.T = T;
  r.seed = seed;
  r.F = sim.config().service_max;
  r.trace.reserve(static_cast<std::size_t>(T));
  SurrogateTracking tracking(ctx.grid(), k);
  double max_grad = 0.0;
  if (cfg.certificate_enabled("feasibility")) r.pass("feasibility");
  if (cfg.certificate_enabled("bvn")) r.pass("bvn");

  for (int t = 1; t <= T; ++t) {
    SwitchRound sr = sim.step();
    max_grad = std::max(max_grad, sr.arrivals.s.maxCoeff());
    if (cfg.certificate_enabled("feasibility")) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (sr.arrivals.b(i, j) - sr.arrivals.s(i, j) * hidden[i * n + j] > 1e-9) r.fail("feasibility", t);
    }
    if (cfg.certificate_enabled("bvn") && is_check_round(cfg, t)) {
      const BvnDecomposition dec = bvn_decompose(sr.x, n);
      if ((bvn_reconstruct(dec) - sr.x).cwiseAbs().maxCoeff() > 1e-8 ||
          static_cast<int>(dec.components.size()) > (n - 1) * (n - 1) + 1) {
        r.fail("bvn", t);
      }
    }
    const FunctionOracle& surrogate = *sim.policy().last_surrogate();
    tracking.add(surrogate, sr.x, 2.0 * sr.trace.queue_vector.sum() * sr.arrivals.s.maxCoeff(), r);
    r.physical_max.push_back(sr.physical.maxCoeff());
    r.queue_norm.push_back(sr.trace.queue_vector.norm());
    r.trace.push_back(std::move(sr.trace));
  }
  r.switch_max_queue = r.physical_max.back();
  finish_ocs(cfg, cfg.learner, k, set.diameter(), max_grad, 0.0, true, tracking.epsilon(), r);
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string trace_file_name(const ExperimentConfig& cfg, long T, std::uint64_t seed) {
  return cfg.name + "_T" + std::to_string(T) + "_s" + std::to_string(seed) + ".csv";
}

json prop1_json(const Prop1Result& p) {
  return json{{"hypothesis_met", p.hypothesis_met},
              {"hypothesis_failure_round", p.hypothesis_failure_round},
              {"log_bound_holds", p.log_bound_holds},
              {"sqrt_bound_holds", p.sqrt_bound_holds},
              {"integral_bound_holds", p.integral_bound_holds},
              {"c1", p.c1},
              {"fitted_slack", p.fitted_slack},
              {"zeros_skipped", p.zeros_skipped}};
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kOcs:
      return "ocs";
    case PolicyKind::kGenOco:
      return "genoco";
    case PolicyKind::kSwitch:
      return "switch";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "ocs") return PolicyKind::kOcs;
  if (name == "genoco") return PolicyKind::kGenOco;
  if (name == "switch") return PolicyKind::kSwitch;
  throw ConfigError("unknown policy '" + name + "'");
}

bool ExperimentConfig::certificate_enabled(const std::string& name) const {
  const auto it = certificate_toggles.find(name);
  return it == certificate_toggles.end() || it->second;
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j,
             {"name", "policy", "learner", "variant", "cost_mode", "set", "adversary", "sign_controlled", "params",
              "horizons", "seeds", "grid", "switch", "theta_alpha", "restart_check_every", "ftpl_scale", "checks",
              "write_traces", "certificates", "expectations"},
             "config");
  ExperimentConfig c;
  c.echo = j;
  c.name = get<std::string>(j, "name", c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) throw ConfigError("bad experiment name");
  c.policy = policy_kind_from_string(get<std::string>(j, "policy", "ocs"));
  c.learner = learner_mode_from_string(get<std::string>(j, "learner", "adaptive_convex"));
  c.variant = genoco_variant_from_string(get<std::string>(j, "variant", "plain"));
  c.cost_mode = cost_mode_from_string(get<std::string>(j, "cost_mode", "convex"));
  if (j.contains("set")) c.set = parse_set(j.at("set"));
  if (j.contains("adversary")) c.adversary = parse_adversary(j.at("adversary"));
  c.sign_controlled = get<bool>(j, "sign_controlled", false);

  if (j.contains("params")) {
    const json& p = j.at("params");
    check_keys(p, {"V", "G", "D", "alpha"}, "params");
    if (p.contains("V")) c.params.V = get<double>(p, "V", 0.0);
    if (p.contains("G")) c.params.G = get<double>(p, "G", 0.0);
    if (p.contains("D")) c.params.D = get<double>(p, "D", 0.0);
    if (p.contains("alpha")) c.params.alpha = get<double>(p, "alpha", 0.0);
  }
  c.horizons = get<std::vector<long>>(j, "horizons", {});
  if (c.horizons.empty()) throw ConfigError("config needs at least one horizon");
  for (std::size_t i = 0; i < c.horizons.size(); ++i) {
    if (c.horizons[i] < 1) throw ConfigError("horizons must be positive");
    if (i > 0 && c.horizons[i] <= c.horizons[i - 1]) throw ConfigError("horizons must be strictly increasing");
  }
  c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", {1});
  if (c.seeds.empty()) throw ConfigError("config needs at least one seed");
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, {"points_per_dimension", "rng_seed"}, "grid");
    c.grid.points_per_dimension = get<int>(g, "points_per_dimension", c.grid.points_per_dimension);
    c.grid.rng_seed = get<std::uint64_t>(g, "rng_seed", c.grid.rng_seed);
  }
  if (j.contains("switch")) {
    const json& s = j.at("switch");
    check_keys(s, {"N", "service_max", "replay_csv", "hidden"}, "switch");
    c.switch_spec.N = get<int>(s, "N", 2);
    c.switch_spec.service_max = get<int>(s, "service_max", 0);
    c.switch_spec.replay_csv = get<std::string>(s, "replay_csv", "");
    if (s.contains("hidden")) c.switch_spec.hidden = to_vector(s.at("hidden"), "switch.hidden");
  }
  if (j.contains("theta_alpha")) c.theta_alpha = get<double>(j, "theta_alpha", 0.0);
  c.restart_check_every = get<int>(j, "restart_check_every", c.restart_check_every);
  c.ftpl_scale = get<double>(j, "ftpl_scale", c.ftpl_scale);
  if (j.contains("checks")) {
    const json& ch = j.at("checks");
    check_keys(ch, {"prefix", "every"}, "checks");
    c.check_prefix = get<int>(ch, "prefix", c.check_prefix);
    c.check_every = get<int>(ch, "every", c.check_every);
  }
  c.write_traces = get<bool>(j, "write_traces", c.write_traces);
  if (j.contains("certificates")) {
    for (auto it = j.at("certificates").begin(); it != j.at("certificates").end(); ++it) {
      if (!it.value().is_boolean()) throw ConfigError("certificate toggles must be booleans");
      c.certificate_toggles[it.key()] = it.value().get<bool>();
    }
  }
  if (j.contains("expectations")) {
    for (const json& e : j.at("expectations")) {
      check_keys(e, {"metric", "slope_min", "slope_max", "log_ratio_tolerance"}, "expectation");
      Expectation x;
      x.metric = get<std::string>(e, "metric", "");
      if (e.contains("slope_min")) x.slope_min = get<double>(e, "slope_min", 0.0);
      if (e.contains("slope_max")) x.slope_max = get<double>(e, "slope_max", 0.0);
      if (e.contains("log_ratio_tolerance")) x.log_ratio_tolerance = get<double>(e, "log_ratio_tolerance", 0.2);
      c.expectations.push_back(std::move(x));
    }
  }

  switch (c.policy) {
    case PolicyKind::kOcs:
      if (!c.set) throw ConfigError("ocs policy needs a set");
      if (stream_has_costs(c.adversary) || c.sign_controlled) throw ConfigError("ocs policy takes no cost stream");
      break;
    case PolicyKind::kGenOco:
      if (!c.set) throw ConfigError("genoco policy needs a set");
      if (c.adversary.k != 1) throw ConfigError("genoco policy needs k = 1");
      if (!stream_has_costs(c.adversary)) throw ConfigError("genoco policy needs a cost stream");
      break;
    case PolicyKind::kSwitch:
      if (c.switch_spec.N < 1) throw ConfigError("switch needs N >= 1");
      break;
  }
  if (c.learner == LearnerMode::kFtpl && c.policy != PolicyKind::kSwitch &&
      !(c.set && c.set->kind() == "birkhoff")) {
    throw ConfigError("ftpl learner needs the birkhoff set");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined input
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

long RunResult::total_failures() const {
  long total = 0;
  for (const auto& [name, count] : certificate_failures) total += count;
  return total;
}

void RunResult::fail(const std::string& name, int round, long count) {
  certificate_failures[name] += count;
  first_failure_round.emplace(name, round);
}

ExperimentContext::ExperimentContext(const ExperimentConfig& config)
    : config_(&config),
      grid_(Grid::build(config.policy == PolicyKind::kSwitch ? AdmissibleSet::birkhoff(config.switch_spec.N)
                                                              : *config.set,
                        config.grid)) {}

RunResult run_single(const ExperimentContext& context, long T, std::uint64_t seed) {
  if (T < 1) throw ConfigError("horizon must be positive");
  switch (context.config().policy) {
    case PolicyKind::kOcs:
      return run_ocs(context, T, seed);
    case PolicyKind::kGenOco:
      return run_genoco(context, T, seed);
    case PolicyKind::kSwitch:
      return run_switch(context, T, seed);
  }
  throw ConfigError("unknown policy");
}

FitResult fit_slope(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [T, metric] : pairs) {
    if (!(T > 0.0) || !(metric > 0.0) || !std::isfinite(metric) || !std::isfinite(T)) continue;
    xs.push_back(std::log(T));
    ys.push_back(std::log(metric));
  }
  const std::size_t n = xs.size();
  if (n < 3) throw InsufficientSamplesError("slope fit needs at least 3 positive pairs, got " + std::to_string(n));
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientSamplesError("slope fit needs at least 3 distinct horizons");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - fit.intercept - fit.slope * xs[i];
    sse += e * e;
  }
  fit.stderr_slope = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  fit.used = static_cast<int>(n);
  return fit;
}

LogRatioResult log_ratio_test(const std::vector<std::pair<double, double>>& pairs, double tolerance) {
  if (pairs.empty()) throw InsufficientSamplesError("ratio test needs at least one pair");
  LogRatioResult out;
  for (const auto& [T, metric] : pairs) {
    if (!(T > 1.0)) throw ConfigError("ratio test needs T > 1");
    out.ratios.push_back(metric / std::log(T));
  }
  out.median = median(out.ratios);
  for (double r : out.ratios) {
    const double dev = out.median != 0.0 ? std::abs(r - out.median) / std::abs(out.median)
                                         : (r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    out.max_relative_deviation = std::max(out.max_relative_deviation, dev);
  }
  out.within = out.max_relative_deviation <= tolerance;
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  ExperimentContext ctx(config);
  ExperimentReport out;
  json runs = json::array();
  json timing_runs = json::array();
  json horizons = json::array();
  std::map<std::string, long> failures_by_name;

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (long T : config.horizons) {
    std::map<std::string, std::vector<double>> per_metric;
    for (std::uint64_t seed : config.seeds) {
      const auto run_start = Clock::now();
      RunResult r = run_single(ctx, T, seed);
      const std::string csv = trace_csv(r.trace);
      json run = {{"T", T},
                  {"seed", seed},
                  {"violation", from_vector(r.violation)},
                  {"max_violation", r.max_violation},
                  {"final_queue", r.final_queue},
                  {"epsilon_grid", r.epsilon_grid},
                  {"G", r.G},
                  {"D", r.D},
                  {"V", r.V},
                  {"alpha", r.alpha},
                  {"F", r.F},
                  {"phase_count", r.phase_count},
                  {"certificates", r.certificate_failures},
                  {"first_failure_round", r.first_failure_round},
                  {"trace_digest", hex_digest(fnv1a(csv))}};
      if (r.regret) run["regret"] = *r.regret;
      if (config.policy == PolicyKind::kSwitch) run["switch_max_queue"] = r.switch_max_queue;
      if (r.prop1) run["prop1"] = prop1_json(*r.prop1);
      if (options.out_dir && config.write_traces) {
        const std::filesystem::path rel = std::filesystem::path("traces") / trace_file_name(config, T, seed);
        std::error_code ec;
        std::filesystem::create_directories(*options.out_dir / "traces", ec);
        std::ofstream f(*options.out_dir / rel, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + (*options.out_dir / rel).string() + " for writing");
        f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
        if (!f) throw Error("write failed for " + (*options.out_dir / rel).string());
        run["trace_file"] = rel.generic_string();
      }
      runs.push_back(run);
      timing_runs.push_back({{"T", T},
                             {"seed", seed},
                             {"seconds", std::chrono::duration<double>(Clock::now() - run_start).count()}});

      for (const auto& [name, count] : r.certificate_failures) failures_by_name[name] += count;
      out.certificate_failures += r.total_failures();
      per_metric["max_violation"].push_back(r.max_violation);
      per_metric["final_queue"].push_back(r.final_queue);
      if (r.regret) per_metric["regret"].push_back(*r.regret);
      if (config.policy == PolicyKind::kSwitch) per_metric["switch_max_queue"].push_back(r.switch_max_queue);
      if (options.runs) options.runs->push_back(std::move(r));
    }
    json h = {{"T", T}};
    for (const auto& [name, values] : per_metric) {
      const double n = static_cast<double>(values.size());
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      // Normal-approximation 95% half-width of the seed mean.
      const double ci95 = values.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1.0) / n) : 0.0;
      h[name] = {{"mean", mean}, {"max", *std::max_element(values.begin(), values.end())}, {"ci95", ci95}};
      series[name].emplace_back(static_cast<double>(T), mean);
    }
    horizons.push_back(h);
  }

  json fits = json::object();
  for (const auto& [name, pairs] : series) {
    json entry;
    try {
      const FitResult fit = fit_slope(pairs);
      entry["slope"] = fit.slope;
      entry["intercept"] = fit.intercept;
      entry["stderr"] = fit.stderr_slope;
      entry["pairs_used"] = fit.used;
    } catch (const InsufficientSamplesError& e) {
      entry["slope"] = nullptr;
      entry["reason"] = e.what();
    }
    if (std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.first > 1.0; })) {
      const LogRatioResult lr = log_ratio_test(pairs, 0.2);
      entry["log_ratio"] = {{"ratios", lr.ratios},
                            {"median", lr.median},
                            {"max_relative_deviation", nullable(lr.max_relative_deviation)}};
    }
    fits[name] = entry;
  }

  json expectations = json::array();
  for (const Expectation& e : config.expectations) {
    json result = {{"metric", e.metric}};
    bool pass = true;
    const auto it = series.find(e.metric);
    if (it == series.end()) {
      pass = false;
      result["reason"] = "metric not produced by this policy";
    } else {
      const auto& pairs = it->second;
      if (e.slope_min || e.slope_max) {
        try {
          const FitResult fit = fit_slope(pairs);
          result["slope"] = fit.slope;
          if (e.slope_min && fit.slope < *e.slope_min) pass = false;
          if (e.slope_max && fit.slope > *e.slope_max) pass = false;
        } catch (const InsufficientSamplesError& ex) {
          // A metric that never turns positive meets an upper slope bound trivially.
          const bool nonpositive =
              std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.second <= 0.0; });
          if (e.slope_min || !nonpositive) pass = false;
          result["reason"] = ex.what();
        }
        if (e.slope_min) result["slope_min"] = *e.slope_min;
        if (e.slope_max) result["slope_max"] = *e.slope_max;
      }
      if (e.log_ratio_tolerance) {
        const LogRatioResult lr = log_ratio_test(pairs, *e.log_ratio_tolerance);
        result["log_ratio_max_relative_deviation"] = nullable(lr.max_relative_deviation);
        result["log_ratio_tolerance"] = *e.log_ratio_tolerance;
        if (!lr.within) pass = false;
      }
    }
    result["pass"] = pass;
    if (!pass) ++out.expectation_failures;
    expectations.push_back(result);
  }

  out.report = {{"schema_version", kReportSchemaVersion},
                {"tool_version", kToolVersion},
                {"name", config.name},
                {"policy", to_string(config.policy)},
                {"config", config.echo},
                {"projection_tolerance", kBirkhoffTolerance},
                {"feasibility_tolerance", kFeasibilityTolerance},
                {"grid", {{"points", ctx.grid().size()}, {"covering_radius", ctx.grid().covering_radius()}}},
                {"calibration_note",
                 "slope and ratio bands are calibration choices for desk-scale runs, not constants from the theory"},
                {"runs", runs},
                {"horizons", horizons},
                {"fits", fits},
                {"expectations", expectations},
                {"certificate_failures", failures_by_name},
                {"total_certificate_failures", out.certificate_failures},
                {"status", out.ok() ? "pass" : "fail"}};
  out.timing = {{"total_seconds", std::chrono::duration<double>(Clock::now() - start).count()},
                {"runs", timing_runs}};
  out.report["timing_file"] = "timing.json";

  if (options.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out_dir, ec);
    if (ec) throw Error("cannot create " + options.out_dir->string() + ": " + ec.message());
    for (const auto& [file, body] : {std::pair{"report.json", &out.report}, std::pair{"timing.json", &out.timing}}) {
      const std::filesystem::path p = *options.out_dir / file;
      std::ofstream f(p, std::ios::trunc);
      if (!f) throw Error("cannot open " + p.string() + " for writing");
      f << body->dump(2) << '\n';
      if (!f) throw Error("write failed for " + p.string());
    }
  }
  return out;
}

std::string summarize_report(const json& report) {
  std::ostringstream s;
  s << "experiment " << report.value("name", "?") << " (" << report.value("policy", "?") << "), status "
    << report.value("status", "?") << "\n";
  if (report.contains("horizons")) {
    for (const json& h : report.at("horizons")) {
      s << "  T=" << h.at("T").get<long>();
      for (auto it = h.begin(); it != h.end(); ++it) {
        if (it.key() == "T") continue;
        s << "  " << it.key() << " mean=" << it.value().at("mean").get<double>();
        if (it.value().contains("ci95")) s << " +-" << it.value().at("ci95").get<double>();
      }
      s << "\n";
    }
  }
  if (report.contains("fits")) {
    for (auto it = report.at("fits").begin(); it != report.at("fits").end(); ++it) {
      s << "  slope[" << it.key() << "] = ";
      if (it.value().at("slope").is_null()) {
        s << "n/a";
      } else {
        s << it.value().at("slope").get<double>() << " +- " << it.value().at("stderr").get<double>();
      }
      s << "\n";
    }
  }
  if (report.contains("certificate_failures")) {
    for (auto it = report.at("certificate_failures").begin(); it != report.at("certificate_failures").end(); ++it) {
      s << "  certificate " << it.key() << ": " << it.value().get<long>() << " failing rounds\n";
    }
  }
  if (report.contains("expectations")) {
    for (const json& e : report.at("expectations")) {
      s << "  expectation " << e.at("metric").get<std::string>() << ": " << (e.at("pass").get<bool>() ? "pass" : "FAIL")
        << "\n";
    }
  }
  return s.str();
}

}  // namespace qoco
