#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qoco/base_learners.hpp"
#include "qoco/core.hpp"
#include "qoco/geometry.hpp"

namespace qoco {

struct QueueState {
  Vector queues;
  Vector running_max;

  static QueueState zeros(int k);
  int k() const { return static_cast<int>(queues.size()); }
};

// Q_i <- max(0, Q_i + v_i), running max updated.
void queue_update(QueueState& state, const Vector& violations);

// 2 * sum_i Q_i g_i. Strong convexity is 2 * alpha * sum_i Q_i when every
// constraint declares strong convexity >= alpha > 0.
FunctionOracle build_ocs_surrogate(const QueueState& state, const std::vector<FunctionOracle>& constraints);

// max(0, best subarray sum), via Kadane's scan.
double max_subinterval_sum(const std::vector<double>& increments);

// Per-constraint maximum cumulative violation over subintervals. Computed from
// the recorded constraint values and from the recorded queue maxima; the two
// must agree within 1e-9, otherwise ConsistencyError.
Vector max_violation(const PolicyTrace& trace);

class OcsPolicy {
 public:
  OcsPolicy(AdmissibleSet set, int k, LearnerMode mode, std::uint64_t rng_seed, double ftpl_scale = 1.0);

  // Action x_t for the upcoming round.
  const Vector& action() const { return learner_.action(); }
  const QueueState& queue_state() const { return queues_; }
  const BaseLearner& learner() const { return learner_; }
  int rounds() const { return t_; }
  // Surrogate built in the most recent round.
  const std::optional<FunctionOracle>& last_surrogate() const { return last_surrogate_; }

  // Consumes the round-t reveal (which must carry no cost) and moves to x_{t+1}.
  TraceRecord round(const RoundReveal& reveal);

 private:
  int k_;
  BaseLearner learner_;
  QueueState queues_;
  int t_ = 0;
  std::optional<FunctionOracle> last_surrogate_;
};

}  // namespace qoco
