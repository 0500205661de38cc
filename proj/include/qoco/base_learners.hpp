#pragma once

#include <cstdint>
#include <vector>

#include "qoco/core.hpp"
#include "qoco/geometry.hpp"

namespace qoco {

// --- matching -------------------------------------------------------------

// Maximum-weight perfect assignment (Hungarian algorithm). Returns perm with
// row i matched to column perm[i]. Among optimal assignments the
// lexicographically smallest perm is returned.
std::vector<int> max_weight_assignment(const Matrix& weights);

// Total weight sum_i weights(i, perm[i]).
double assignment_weight(const Matrix& weights, const std::vector<int>& perm);

// Flattened row-major permutation matrix.
Vector permutation_matrix(const std::vector<int>& perm);

// The permutation matrix maximizing <weights, P>, flattened row-major.
Vector matching_oracle(const Matrix& weights);

// --- learners -------------------------------------------------------------

enum class LearnerMode { kAdaptiveConvex, kAdaptiveStronglyConvex, kFtpl };

const char* to_string(LearnerMode mode);
LearnerMode learner_mode_from_string(const std::string& name);

struct SurrogateFeedback {
  Vector gradient_at_action;
  double strong_convexity = 0.0;
};

// Projected online gradient descent with the adaptive step sizes
//   convex:           eta_t = sqrt(2) D / (2 sqrt(sum_{tau<t} G_tau^2))
//   strongly convex:  eta_t = 1 / sum_{s<=t} H_s
// or follow-the-perturbed-leader over the Birkhoff polytope.
// A zero denominator skips the update.
class BaseLearner {
 public:
  BaseLearner(AdmissibleSet set, LearnerMode mode, std::uint64_t rng_seed, double ftpl_scale = 1.0);

  const Vector& action() const { return action_; }
  LearnerMode mode() const { return mode_; }
  const AdmissibleSet& set() const { return set_; }
  double accumulated_sq_grad_norms() const { return sq_grad_sum_; }
  double accumulated_strong_convexity() const { return strong_convexity_sum_; }
  int steps() const { return steps_; }

  // Consumes round-t feedback and moves to x_{t+1}. Returns the step size used
  // (0 for skipped updates and for FTPL).
  double step(const SurrogateFeedback& feedback);

  // Back to x_1 = project(0) with empty accumulators.
  void reset();

 private:
  AdmissibleSet set_;
  LearnerMode mode_;
  double diameter_;
  double ftpl_scale_;
  std::uint64_t seed_;
  Rng rng_;
  Vector action_;
  double sq_grad_sum_ = 0.0;
  double strong_convexity_sum_ = 0.0;
  Vector ftpl_cumulative_;
  int steps_ = 0;
};

BaseLearner learner_init(const AdmissibleSet& set, LearnerMode mode, std::uint64_t rng_seed);

}  // namespace qoco
