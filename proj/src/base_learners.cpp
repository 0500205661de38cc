#include "qoco/base_learners.hpp"

#include <cmath>
#include <string>

namespace qoco {

const char* to_string(LearnerMode mode) {
  switch (mode) {
    case LearnerMode::kAdaptiveConvex:
      return "adaptive_convex";
    case LearnerMode::kAdaptiveStronglyConvex:
      return "adaptive_strongly_convex";
    case LearnerMode::kFtpl:
      return "ftpl";
  }
  return "unknown";
}

LearnerMode learner_mode_from_string(const std::string& name) {
  if (name == "adaptive_convex") return LearnerMode::kAdaptiveConvex;
  if (name == "adaptive_strongly_convex") return LearnerMode::kAdaptiveStronglyConvex;
  if (name == "ftpl") return LearnerMode::kFtpl;
  throw ConfigError("unknown learner mode '" + name + "'");
}

BaseLearner::BaseLearner(AdmissibleSet set, LearnerMode mode, std::uint64_t rng_seed, double ftpl_scale)
    : set_(std::move(set)),
      mode_(mode),
      diameter_(set_.diameter()),
      ftpl_scale_(ftpl_scale),
      seed_(rng_seed),
      rng_(rng_seed) {
  if (mode_ == LearnerMode::kFtpl && !std::holds_alternative<BirkhoffSet>(set_.shape())) {
    throw ConfigError("ftpl learner requires a birkhoff admissible set");
  }
  if (!(ftpl_scale_ > 0.0)) throw ConfigError("ftpl perturbation scale must be positive");
  reset();
}

void BaseLearner::reset() {
  action_ = set_.project(Vector::Zero(set_.dimension()));
  sq_grad_sum_ = 0.0;
  strong_convexity_sum_ = 0.0;
  ftpl_cumulative_ = Vector::Zero(set_.dimension());
  steps_ = 0;
  rng_ = Rng(seed_);
}

double BaseLearner::step(const SurrogateFeedback& feedback) {
  const Vector& grad = feedback.gradient_at_action;
  if (grad.size() != action_.size()) throw DimensionError("surrogate gradient has wrong dimension");
  require_finite(grad, "surrogate gradient");
  if (!(feedback.strong_convexity >= 0.0)) throw EvaluationError("negative surrogate strong convexity");
  ++steps_;

  double eta = 0.0;
  switch (mode_) {
    case LearnerMode::kAdaptiveConvex: {
      if (sq_grad_sum_ > 0.0) {
        eta = std::sqrt(2.0) * diameter_ / (2.0 * std::sqrt(sq_grad_sum_));
        action_ = set_.project(action_ - eta * grad);
      }
      sq_grad_sum_ += grad.squaredNorm();
      break;
    }
    case LearnerMode::kAdaptiveStronglyConvex: {
      strong_convexity_sum_ += feedback.strong_convexity;
      sq_grad_sum_ += grad.squaredNorm();
      if (strong_convexity_sum_ > 0.0) {
        eta = 1.0 / strong_convexity_sum_;
        action_ = set_.project(action_ - eta * grad);
      }
      break;
    }
    case LearnerMode::kFtpl: {
      // Leader on the cumulative loss including this round, with fresh noise.
      ftpl_cumulative_ += grad;
      sq_grad_sum_ += grad.squaredNorm();
      const int n = std::get<BirkhoffSet>(set_.shape()).n;
      const double scale = ftpl_scale_ * std::sqrt(static_cast<double>(steps_ + 1));
      Vector perturbed = ftpl_cumulative_;
      for (Eigen::Index i = 0; i < perturbed.size(); ++i) perturbed[i] += rng_.uniform(0.0, scale);
      Matrix weights(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) weights(i, j) = -perturbed[i * n + j];
      action_ = matching_oracle(weights);
      break;
    }
  }
  return eta;
}

BaseLearner learner_init(const AdmissibleSet& set, LearnerMode mode, std::uint64_t rng_seed) {
  return BaseLearner(set, mode, rng_seed);
}

}  // namespace qoco
