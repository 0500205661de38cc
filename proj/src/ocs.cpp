#include "qoco/ocs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qoco {

QueueState QueueState::zeros(int k) {
  if (k < 1) throw ConfigError("queue state needs k >= 1");
  return QueueState{Vector::Zero(k), Vector::Zero(k)};
}

void queue_update(QueueState& state, const Vector& violations) {
  if (violations.size() != state.queues.size()) throw DimensionError("violation vector has wrong length");
  require_finite(violations, "constraint violations");
  state.queues = (state.queues + violations).cwiseMax(0.0);
  state.running_max = state.running_max.cwiseMax(state.queues);
}

FunctionOracle build_ocs_surrogate(const QueueState& state, const std::vector<FunctionOracle>& constraints) {
  if (static_cast<int>(constraints.size()) != state.k()) throw DimensionError("surrogate: k mismatch");
  if (constraints.empty()) throw DimensionError("surrogate needs at least one constraint");
  double alpha = constraints.front().strong_convexity();
  std::vector<double> weights(constraints.size());
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    weights[i] = 2.0 * state.queues[static_cast<Eigen::Index>(i)];
    alpha = std::min(alpha, constraints[i].strong_convexity());
  }
  return weighted_sum(weights, constraints).with_strong_convexity(2.0 * alpha * state.queues.sum());
}

double max_subinterval_sum(const std::vector<double>& increments) {
  double best = 0.0;
  double ending_here = 0.0;
  for (double v : increments) {
    ending_here = std::max(0.0, ending_here + v);
    best = std::max(best, ending_here);
  }
  return best;
}

Vector max_violation(const PolicyTrace& trace) {
  if (trace.empty()) throw ConfigError("max_violation needs a nonempty trace");
  const auto k = trace.front().constraint_values.size();
  Vector from_queues = Vector::Zero(k);
  std::vector<std::vector<double>> columns(static_cast<std::size_t>(k));
  for (const TraceRecord& rec : trace) {
    if (rec.constraint_values.size() != k || rec.queue_vector.size() != k) {
      throw DimensionError("trace record has inconsistent k");
    }
    from_queues = from_queues.cwiseMax(rec.queue_vector);
    for (Eigen::Index i = 0; i < k; ++i) columns[static_cast<std::size_t>(i)].push_back(rec.constraint_values[i]);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const double scanned = max_subinterval_sum(columns[static_cast<std::size_t>(i)]);
    const double tol = 1e-9 * std::max(1.0, scanned);
    if (std::abs(scanned - from_queues[i]) > tol) {
      throw ConsistencyError("Lindley identity broken for constraint " + std::to_string(i + 1) + ": scan " +
                             std::to_string(scanned) + " vs queue max " + std::to_string(from_queues[i]));
    }
  }
  return from_queues;
}

OcsPolicy::OcsPolicy(AdmissibleSet set, int k, LearnerMode mode, std::uint64_t rng_seed, double ftpl_scale)
    : k_(k), learner_(std::move(set), mode, rng_seed, ftpl_scale), queues_(QueueState::zeros(k)) {}

TraceRecord OcsPolicy::round(const RoundReveal& reveal) {
  if (reveal.cost) throw ConfigError("OCS rounds carry no cost function");
  if (reveal.k() != k_) throw ConfigError("reveal has " + std::to_string(reveal.k()) + " constraints, expected " +
                                          std::to_string(k_));
  ++t_;
  TraceRecord rec;
  rec.t = t_;
  rec.action = learner_.action();
  rec.constraint_values.resize(k_);
  for (int i = 0; i < k_; ++i) {
    rec.constraint_values[i] = reveal.constraints[static_cast<std::size_t>(i)].value(rec.action);
  }

  queue_update(queues_, rec.constraint_values);
  rec.queue_vector = queues_.queues;

  last_surrogate_ = build_ocs_surrogate(queues_, reveal.constraints);
  SurrogateFeedback feedback{last_surrogate_->subgradient(rec.action), last_surrogate_->strong_convexity()};
  rec.surrogate_grad_norm = feedback.gradient_at_action.norm();
  rec.surrogate_strong_convexity = feedback.strong_convexity;
  rec.step_size = learner_.step(feedback);
  return rec;
}

}  // namespace qoco
