#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qoco/core.hpp"
#include "qoco/geometry.hpp"

namespace qoco {

enum class Scenario { kHiddenSet, kSFeasible, kMultiTask, kStronglyConvex, kAlternatingLinear, kCustomScripted };

enum class CostKind { kNone, kAlternatingLinear, kRandomLinear, kRandomQuadratic, kSignControlled };

const char* to_string(Scenario scenario);
Scenario scenario_from_string(const std::string& name);
const char* to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

struct AffineSpec {
  Vector slope;
  double offset = 0.0;
};

struct ScriptedRound {
  std::optional<AffineSpec> cost;
  std::vector<AffineSpec> constraints;
};

struct AdversaryConfig {
  Scenario scenario = Scenario::kHiddenSet;
  int k = 1;
  // Hidden feasible point x* (hidden_set: center of the hidden ball).
  Vector hidden_point;
  // hidden_set: radius of the hidden ball. strongly_convex: radius of the
  // constraint balls, whose boundary passes through x*.
  double hidden_radius = 0.0;
  // strongly_convex: curvature of every constraint.
  double alpha = 1.0;
  // s_feasible: window length, offset amplitude, slope scale.
  int S = 1;
  double beta = 0.5;
  double slope_scale = 1.0;
  // alternating_linear: g_t(x) = x_1 - b_t with b_t = b_lo on odd t, b_hi on even t.
  double b_lo = 0.0;
  double b_hi = 1.0;

  CostKind cost = CostKind::kNone;
  double cost_scale = 1.0;
  double cost_alpha = 0.0;  // curvature of random_quadratic and sign_controlled costs
  Vector cost_direction;    // alternating_linear cost; e_1 when empty

  std::vector<ScriptedRound> script;  // custom_scripted, cycled
  std::uint64_t rng_seed = 0;
};

// Streams reveals that may depend on the current action.
class Adversary {
 public:
  Adversary(AdversaryConfig config, AdmissibleSet set);

  const AdversaryConfig& config() const { return config_; }
  // F with |g_t(x)| <= F on the admissible set, by construction.
  double magnitude_bound() const { return magnitude_bound_; }
  // Bounds on constraint and cost gradient norms over the admissible set.
  double constraint_gradient_bound() const { return constraint_gradient_bound_; }
  double cost_gradient_bound() const { return cost_gradient_bound_; }
  bool has_cost() const { return config_.cost != CostKind::kNone; }

  // t must be consecutive from 1.
  RoundReveal reveal(int t, const Vector& x_t);

 private:
  std::vector<FunctionOracle> constraints_for(int t, const Vector& x_t);
  std::optional<FunctionOracle> cost_for(int t, const Vector& x_t);
  Vector random_unit(int d);

  AdversaryConfig config_;
  AdmissibleSet set_;
  int d_;
  double diameter_;
  Rng rng_;
  int last_t_ = 0;
  double magnitude_bound_ = 0.0;
  double constraint_gradient_bound_ = 0.0;
  double cost_gradient_bound_ = 0.0;
};

// Per-round scenarios: g_{t,i}(x) <= 1e-9 for all t, i. s_feasible: every
// window of config.S consecutive rounds sums to <= 1e-9.
bool certify_feasibility(const AdversaryConfig& config, const std::vector<RoundReveal>& stream,
                         const Vector& x_candidate);

// Replaces the cost stream by f_t(x) = a <u_t, x - x_t> + (cost_alpha / 2) ||x - x_t||^2
// with u_t the unit vector from the hidden point to x_t. With a >= cost_alpha * D / 2
// the hidden point never does better than x_t on any round. Constraints are untouched.
AdversaryConfig regret_sign_controller(AdversaryConfig base);

// max |g(x)| over the reveal's constraints at n uniform samples of the set.
double sampled_magnitude(const RoundReveal& reveal, const AdmissibleSet& set, int n_samples, std::uint64_t rng_seed);

}  // namespace qoco
