#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "qoco/base_learners.hpp"
#include "qoco/core.hpp"
#include "qoco/geometry.hpp"
#include "qoco/offline_oracle.hpp"

namespace qoco {

enum class GenOcoVariant { kPlain, kThetaDamped, kPhaseRestart };
enum class CostMode { kConvex, kStronglyConvex };

const char* to_string(GenOcoVariant variant);
GenOcoVariant genoco_variant_from_string(const std::string& name);
const char* to_string(CostMode mode);
CostMode cost_mode_from_string(const std::string& name);

// x -> max(0, g(x)). The subgradient is grad g where g >= 0 and 0 elsewhere.
FunctionOracle clip_constraint(const FunctionOracle& g);

// params.V if set; otherwise sqrt(T) for convex costs and 2 G^2 ln(T) / alpha
// for strongly convex costs (which then needs G and alpha).
double choose_V(const ProblemParams& params, CostMode mode);

// V f + 2 Q g_clipped, declared (V * mu_f)-strongly convex.
FunctionOracle build_genoco_surrogate(double V, double queue, const FunctionOracle& cost,
                                      const FunctionOracle& clipped_g);

struct GenOcoOptions {
  double V = 1.0;
  GenOcoVariant variant = GenOcoVariant::kPlain;
  // Damping for the theta variant; defaults to 1 / V when unset.
  std::optional<double> theta_alpha;
  // Phase-restart check period in rounds.
  int restart_check_every = 1;
  double ftpl_scale = 1.0;
};

class GenOcoPolicy {
 public:
  // The phase-restart variant needs a grid for the per-phase offline optimum.
  GenOcoPolicy(AdmissibleSet set, LearnerMode mode, GenOcoOptions options, std::uint64_t rng_seed,
               const Grid* grid = nullptr);

  const Vector& action() const { return learner_.action(); }
  double queue() const { return queue_; }
  double V() const { return options_.V; }
  double theta_alpha() const { return theta_alpha_; }
  int phase_count() const { return phase_count_; }
  int phase_start() const { return phase_start_; }
  int rounds() const { return t_; }
  GenOcoVariant variant() const { return options_.variant; }
  const BaseLearner& learner() const { return learner_; }
  const std::optional<FunctionOracle>& last_surrogate() const { return last_surrogate_; }
  // Worst-case regret of the current phase at the last check.
  double last_phase_regret() const { return last_phase_regret_; }

  // Consumes the round-t reveal (one cost, exactly one constraint).
  TraceRecord round(const RoundReveal& reveal);

 private:
  void restart();

  GenOcoOptions options_;
  double theta_alpha_;
  BaseLearner learner_;
  const Grid* grid_;
  std::optional<GridTracker> phase_tracker_;
  double queue_ = 0.0;
  int t_ = 0;
  int phase_count_ = 1;
  int phase_start_ = 1;
  double phase_policy_cost_ = 0.0;
  double last_phase_regret_ = 0.0;
  std::optional<FunctionOracle> last_surrogate_;
};

}  // namespace qoco
