#include "qoco/genoco.hpp"

#include <cmath>

namespace qoco {

const char* to_string(GenOcoVariant variant) {
  switch (variant) {
    case GenOcoVariant::kPlain:
      return "plain";
    case GenOcoVariant::kThetaDamped:
      return "theta_damped";
    case GenOcoVariant::kPhaseRestart:
      return "phase_restart";
  }
  return "unknown";
}

GenOcoVariant genoco_variant_from_string(const std::string& name) {
  if (name == "plain") return GenOcoVariant::kPlain;
  if (name == "theta_damped") return GenOcoVariant::kThetaDamped;
  if (name == "phase_restart") return GenOcoVariant::kPhaseRestart;
  throw ConfigError("unknown genoco variant '" + name + "'");
}

const char* to_string(CostMode mode) { return mode == CostMode::kConvex ? "convex" : "strongly_convex"; }

CostMode cost_mode_from_string(const std::string& name) {
  if (name == "convex") return CostMode::kConvex;
  if (name == "strongly_convex") return CostMode::kStronglyConvex;
  throw ConfigError("unknown cost mode '" + name + "'");
}

FunctionOracle clip_constraint(const FunctionOracle& g) {
  return FunctionOracle([g](const Vector& x) { return std::max(0.0, g.value(x)); },
                        [g](const Vector& x) -> Vector {
                          if (g.value(x) >= 0.0) return g.subgradient(x);
                          return Vector::Zero(x.size());
                        },
                        0.0);
}

double choose_V(const ProblemParams& params, CostMode mode) {
  params.validate();
  if (params.V) return *params.V;
  const double T = static_cast<double>(params.T);
  if (mode == CostMode::kConvex) return std::sqrt(T);
  if (!params.G || !params.alpha) throw ConfigError("strongly convex V needs G and alpha");
  if (params.T < 2) throw ConfigError("strongly convex V needs T >= 2");
  return 2.0 * *params.G * *params.G * std::log(T) / *params.alpha;
}

FunctionOracle build_genoco_surrogate(double V, double queue, const FunctionOracle& cost,
                                      const FunctionOracle& clipped_g) {
  if (!(V > 0.0)) throw ConfigError("V must be positive");
  if (!(queue >= 0.0)) throw EvaluationError("queue must be nonnegative");
  return weighted_sum({V, 2.0 * queue}, {cost, clipped_g}).with_strong_convexity(V * cost.strong_convexity());
}

GenOcoPolicy::GenOcoPolicy(AdmissibleSet set, LearnerMode mode, GenOcoOptions options, std::uint64_t rng_seed,
                           const Grid* grid)
    : options_(options),
      theta_alpha_(options.theta_alpha ? *options.theta_alpha : 1.0 / options.V),
      learner_(std::move(set), mode, rng_seed, options.ftpl_scale),
      grid_(grid) {
  if (!(options_.V > 0.0)) throw ConfigError("V must be positive");
  if (!(theta_alpha_ >= 0.0)) throw ConfigError("theta damping must be nonnegative");
  if (options_.restart_check_every < 1) throw ConfigError("restart check period must be >= 1");
  if (options_.variant == GenOcoVariant::kPhaseRestart) {
    if (!grid_) throw ConfigError("phase restart needs an offline grid");
    phase_tracker_.emplace(*grid_, FeasibilitySpec{Feasibility::kPerRound, 1}, 1);
  }
}

void GenOcoPolicy::restart() {
  queue_ = 0.0;
  learner_.reset();
  phase_tracker_->reset();
  phase_policy_cost_ = 0.0;
  phase_start_ = t_ + 1;
  ++phase_count_;
}

TraceRecord GenOcoPolicy::round(const RoundReveal& reveal) {
  if (!reveal.cost) throw ConfigError("generalized OCO rounds need a cost function");
  if (reveal.k() != 1) throw ConfigError("generalized OCO supports exactly one constraint per round");
  ++t_;
  const FunctionOracle& cost = *reveal.cost;
  const FunctionOracle clipped = clip_constraint(reveal.constraints.front());

  TraceRecord rec;
  rec.t = t_;
  rec.phase = phase_count_;
  rec.action = learner_.action();
  rec.cost_value = cost.value(rec.action);
  const double g = reveal.constraints.front().value(rec.action);
  rec.constraint_values = Vector::Constant(1, g);
  const double g_plus = std::max(0.0, g);

  if (options_.variant == GenOcoVariant::kThetaDamped) {
    queue_ = std::max(0.0, queue_ + g_plus) / (1.0 + theta_alpha_);
    rec.theta = theta_alpha_ * queue_;
  } else {
    queue_ = std::max(0.0, queue_ + g_plus);
  }
  rec.queue_vector = Vector::Constant(1, queue_);

  last_surrogate_ = build_genoco_surrogate(options_.V, queue_, cost, clipped);
  SurrogateFeedback feedback{last_surrogate_->subgradient(rec.action), last_surrogate_->strong_convexity()};
  rec.surrogate_grad_norm = feedback.gradient_at_action.norm();
  rec.surrogate_strong_convexity = feedback.strong_convexity;
  rec.step_size = learner_.step(feedback);

  if (options_.variant == GenOcoVariant::kPhaseRestart) {
    phase_policy_cost_ += rec.cost_value;
    phase_tracker_->add(&cost, reveal.constraints);
    if ((t_ - phase_start_ + 1) % options_.restart_check_every == 0) {
      if (phase_tracker_->feasible_count() == 0) {
        throw InfeasibleError("phase starting at round " + std::to_string(phase_start_) +
                              " has no feasible grid point after round " + std::to_string(t_));
      }
      last_phase_regret_ = phase_policy_cost_ - phase_tracker_->best().second;
      const double tol = 1e-9 * std::max(1.0, std::abs(phase_policy_cost_));
      if (last_phase_regret_ < -tol) restart();
    }
  }
  return rec;
}

}  // namespace qoco
