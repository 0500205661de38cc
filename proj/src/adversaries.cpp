#include "qoco/adversaries.hpp"

#include <algorithm>
#include <cmath>

namespace qoco {

const char* to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kHiddenSet:
      return "hidden_set";
    case Scenario::kSFeasible:
      return "s_feasible";
    case Scenario::kMultiTask:
      return "multi_task";
    case Scenario::kStronglyConvex:
      return "strongly_convex";
    case Scenario::kAlternatingLinear:
      return "alternating_linear";
    case Scenario::kCustomScripted:
      return "custom_scripted";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (Scenario s : {Scenario::kHiddenSet, Scenario::kSFeasible, Scenario::kMultiTask, Scenario::kStronglyConvex,
                     Scenario::kAlternatingLinear, Scenario::kCustomScripted}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

const char* to_string(CostKind kind) {
  switch (kind) {
    case CostKind::kNone:
      return "none";
    case CostKind::kAlternatingLinear:
      return "alternating_linear";
    case CostKind::kRandomLinear:
      return "random_linear";
    case CostKind::kRandomQuadratic:
      return "random_quadratic";
    case CostKind::kSignControlled:
      return "sign_controlled";
  }
  return "unknown";
}

CostKind cost_kind_from_string(const std::string& name) {
  for (CostKind c : {CostKind::kNone, CostKind::kAlternatingLinear, CostKind::kRandomLinear,
                     CostKind::kRandomQuadratic, CostKind::kSignControlled}) {
    if (name == to_string(c)) return c;
  }
  throw ConfigError("unknown cost kind '" + name + "'");
}

Adversary::Adversary(AdversaryConfig config, AdmissibleSet set)
    : config_(std::move(config)),
      set_(std::move(set)),
      d_(set_.dimension()),
      diameter_(set_.diameter()),
      rng_(config_.rng_seed) {
  if (config_.k < 1) throw ConfigError("adversary needs k >= 1");
  if (config_.hidden_point.size() == 0) config_.hidden_point = set_.project(Vector::Zero(d_));
  if (config_.hidden_point.size() != d_) throw DimensionError("hidden point has wrong dimension");
  if (!set_.contains(config_.hidden_point, 1e-9)) throw ConfigError("hidden point must lie in the admissible set");
  if (config_.hidden_radius < 0.0) throw ConfigError("hidden radius must be nonnegative");
  if (config_.S < 1) throw ConfigError("S must be >= 1");
  if (config_.cost_alpha < 0.0) throw ConfigError("cost curvature must be nonnegative");

  const double D = diameter_;
  const Vector origin_proj = set_.project(Vector::Zero(d_));
  const double radius_bound = origin_proj.norm() + D;  // sup ||x|| over the set
  switch (config_.scenario) {
    case Scenario::kHiddenSet:
      if (config_.k != 1) throw ConfigError("hidden_set scenario reveals one constraint per round");
      magnitude_bound_ = std::max(1.0, D + config_.hidden_radius);
      constraint_gradient_bound_ = 1.0;
      break;
    case Scenario::kMultiTask:
      magnitude_bound_ = D;
      constraint_gradient_bound_ = 1.0;
      break;
    case Scenario::kStronglyConvex: {
      if (!(config_.alpha > 0.0)) throw ConfigError("strongly_convex scenario needs alpha > 0");
      if (!(config_.hidden_radius > 0.0)) throw ConfigError("strongly_convex scenario needs a positive radius");
      const double r = config_.hidden_radius;
      magnitude_bound_ = 0.5 * config_.alpha * std::max((D + r) * (D + r) - r * r, r * r);
      constraint_gradient_bound_ = config_.alpha * (D + r);
      break;
    }
    case Scenario::kSFeasible:
      magnitude_bound_ = config_.slope_scale * D + config_.beta;
      constraint_gradient_bound_ = config_.slope_scale;
      break;
    case Scenario::kAlternatingLinear: {
      const double x1 = origin_proj[0];
      magnitude_bound_ = std::max(std::abs(x1 - config_.b_lo), std::abs(x1 - config_.b_hi)) + D;
      constraint_gradient_bound_ = 1.0;
      break;
    }
    case Scenario::kCustomScripted: {
      if (config_.script.empty()) throw ConfigError("custom_scripted scenario needs at least one round");
      for (const ScriptedRound& r : config_.script) {
        if (static_cast<int>(r.constraints.size()) != config_.k) throw ConfigError("scripted round has wrong k");
        for (const AffineSpec& g : r.constraints) {
          if (g.slope.size() != d_) throw DimensionError("scripted constraint has wrong dimension");
          magnitude_bound_ = std::max(magnitude_bound_, g.slope.norm() * radius_bound + std::abs(g.offset));
          constraint_gradient_bound_ = std::max(constraint_gradient_bound_, g.slope.norm());
        }
        if (r.cost) {
          if (r.cost->slope.size() != d_) throw DimensionError("scripted cost has wrong dimension");
          cost_gradient_bound_ = std::max(cost_gradient_bound_, r.cost->slope.norm());
        }
      }
      break;
    }
  }

  switch (config_.cost) {
    case CostKind::kNone:
      break;
    case CostKind::kAlternatingLinear:
      if (config_.cost_direction.size() == 0) config_.cost_direction = Vector::Unit(d_, 0);
      if (config_.cost_direction.size() != d_) throw DimensionError("cost direction has wrong dimension");
      cost_gradient_bound_ = config_.cost_scale * config_.cost_direction.norm();
      break;
    case CostKind::kRandomLinear:
      cost_gradient_bound_ = config_.cost_scale * std::sqrt(static_cast<double>(d_));
      break;
    case CostKind::kRandomQuadratic:
      if (!(config_.cost_alpha > 0.0)) throw ConfigError("random_quadratic costs need cost_alpha > 0");
      cost_gradient_bound_ = config_.cost_alpha * D;
      break;
    case CostKind::kSignControlled:
      // The hidden point may only tie or lose against x_t when a >= alpha D / 2.
      config_.cost_scale = std::max(config_.cost_scale, 0.5 * config_.cost_alpha * D);
      cost_gradient_bound_ = config_.cost_scale + config_.cost_alpha * D;
      break;
  }
}

Vector Adversary::random_unit(int d) {
  Vector v(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = rng_.normal();
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

std::vector<FunctionOracle> Adversary::constraints_for(int t, const Vector& x_t) {
  const Vector& star = config_.hidden_point;
  std::vector<FunctionOracle> out;
  out.reserve(static_cast<std::size_t>(config_.k));
  switch (config_.scenario) {
    case Scenario::kHiddenSet: {
      const Vector offset = x_t - star;
      const double dist = offset.norm();
      if (dist <= config_.hidden_radius) {
        out.push_back(FunctionOracle::constant(-1.0, d_));
      } else {
        // Supporting hyperplane at the nearest point of the hidden ball.
        const Vector u = offset / dist;
        const Vector p = star + config_.hidden_radius * u;
        out.push_back(FunctionOracle::affine(u, -u.dot(p)));
      }
      break;
    }
    case Scenario::kMultiTask:
      for (int i = 0; i < config_.k; ++i) {
        Vector a = random_unit(d_);
        if (a.dot(x_t - star) < 0.0) a = -a;
        out.push_back(FunctionOracle::affine(a, -a.dot(star)));
      }
      break;
    case Scenario::kStronglyConvex: {
      const Vector offset = x_t - star;
      const double dist = offset.norm();
      const Vector u = dist > 0.0 ? Vector(offset / dist) : Vector(Vector::Unit(d_, 0));
      for (int i = 0; i < config_.k; ++i) {
        // Ball of radius r_i through x*, centered on the far side from x_t.
        const double r = config_.hidden_radius / (i + 1);
        const Vector p = star - r * u;
        out.push_back(FunctionOracle::quadratic(config_.alpha, p, -0.5 * config_.alpha * r * r));
      }
      break;
    }
    case Scenario::kSFeasible: {
      const int S = config_.S;
      const int half = S / 2;
      for (int i = 0; i < config_.k; ++i) {
        Vector a = config_.slope_scale * random_unit(d_);
        if (a.dot(x_t - star) < 0.0) a = -a;
        // Zero-sum offset pattern of period S, shifted per constraint.
        const int pos = (t - 1 + i) % S;
        double b = 0.0;
        if (pos < half) b = config_.beta;
        else if (pos >= S - half) b = -config_.beta;
        out.push_back(FunctionOracle::affine(a, b - a.dot(star)));
      }
      break;
    }
    case Scenario::kAlternatingLinear: {
      const double b = (t % 2 == 1) ? config_.b_lo : config_.b_hi;
      for (int i = 0; i < config_.k; ++i) out.push_back(FunctionOracle::affine(Vector::Unit(d_, 0), -b));
      break;
    }
    case Scenario::kCustomScripted: {
      const ScriptedRound& r = config_.script[static_cast<std::size_t>(t - 1) % config_.script.size()];
      for (const AffineSpec& g : r.constraints) out.push_back(FunctionOracle::affine(g.slope, g.offset));
      break;
    }
  }
  return out;
}

std::optional<FunctionOracle> Adversary::cost_for(int t, const Vector& x_t) {
  if (config_.scenario == Scenario::kCustomScripted && config_.cost == CostKind::kNone) {
    const ScriptedRound& r = config_.script[static_cast<std::size_t>(t - 1) % config_.script.size()];
    if (r.cost) return FunctionOracle::affine(r.cost->slope, r.cost->offset);
    return std::nullopt;
  }
  switch (config_.cost) {
    case CostKind::kNone:
      return std::nullopt;
    case CostKind::kAlternatingLinear: {
      const double sign = (t % 2 == 1) ? 1.0 : -1.0;
      return FunctionOracle::affine(sign * config_.cost_scale * config_.cost_direction, 0.0);
    }
    case CostKind::kRandomLinear: {
      Vector c(d_);
      for (int i = 0; i < d_; ++i) c[i] = rng_.uniform(-config_.cost_scale, config_.cost_scale);
      return FunctionOracle::affine(c, 0.0);
    }
    case CostKind::kRandomQuadratic:
      return FunctionOracle::quadratic(config_.cost_alpha, set_.sample(rng_));
    case CostKind::kSignControlled: {
      const Vector offset = x_t - config_.hidden_point;
      const double dist = offset.norm();
      const Vector u = dist > 0.0 ? Vector(offset / dist) : Vector(Vector::Unit(d_, 0));
      const double a = config_.cost_scale;
      // a <u, x - x_t> + (alpha/2) ||x - x_t||^2 written as a QuadraticForm.
      const double mu = config_.cost_alpha;
      QuadraticForm form{mu, a * u - mu * x_t, -a * u.dot(x_t) + 0.5 * mu * x_t.squaredNorm()};
      return FunctionOracle::from_form(std::move(form));
    }
  }
  return std::nullopt;
}

RoundReveal Adversary::reveal(int t, const Vector& x_t) {
  if (t != last_t_ + 1) throw ConfigError("adversary rounds must be consecutive from 1");
  if (x_t.size() != d_) throw DimensionError("action has wrong dimension");
  last_t_ = t;
  RoundReveal out;
  out.constraints = constraints_for(t, x_t);
  out.cost = cost_for(t, x_t);
  return out;
}

bool certify_feasibility(const AdversaryConfig& config, const std::vector<RoundReveal>& stream,
                         const Vector& x_candidate) {
  constexpr double tol = 1e-9;
  if (config.scenario == Scenario::kSFeasible) {
    const std::size_t S = static_cast<std::size_t>(config.S);
    if (stream.size() < S) return true;
    const std::size_t k = stream.front().constraints.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> values;
      values.reserve(stream.size());
      for (const RoundReveal& r : stream) values.push_back(r.constraints.at(i).value(x_candidate));
      double window = 0.0;
      for (std::size_t t = 0; t < values.size(); ++t) {
        window += values[t];
        if (t >= S) window -= values[t - S];
        if (t + 1 >= S && window > tol) return false;
      }
    }
    return true;
  }
  for (const RoundReveal& r : stream)
    for (const FunctionOracle& g : r.constraints)
      if (g.value(x_candidate) > tol) return false;
  return true;
}

AdversaryConfig regret_sign_controller(AdversaryConfig base) {
  if (base.cost == CostKind::kNone && base.scenario != Scenario::kCustomScripted) {
    throw ConfigError("regret_sign_controller needs a base stream with costs");
  }
  base.cost = CostKind::kSignControlled;
  return base;
}

double sampled_magnitude(const RoundReveal& reveal, const AdmissibleSet& set, int n_samples, std::uint64_t rng_seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  Rng rng(rng_seed);
  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Vector x = set.sample(rng);
    for (const FunctionOracle& g : reveal.constraints) worst = std::max(worst, std::abs(g.value(x)));
  }
  return worst;
}

}  // namespace qoco
