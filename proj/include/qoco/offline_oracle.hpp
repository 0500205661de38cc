#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qoco/base_learners.hpp"
#include "qoco/core.hpp"
#include "qoco/geometry.hpp"

namespace qoco {

// Feasibility filter applied to grid points before taking the argmin.
enum class Feasibility { kIgnore, kPerRound, kSWindow };

struct FeasibilitySpec {
  Feasibility mode = Feasibility::kIgnore;
  int S = 1;  // window length for kSWindow
};

// Tolerance on g(x) <= 0 when filtering grid points.
inline constexpr double kFeasibilityTolerance = 1e-9;

struct GridSpec {
  // Box, ball: tensor grid with this many points per axis. Simplex: lattice
  // with spacing 1 / (points_per_dimension - 1). Birkhoff: number of
  // projected random samples added to the permutation vertices.
  int points_per_dimension = 201;
  std::uint64_t rng_seed = 0;
};

class Grid {
 public:
  static Grid build(const AdmissibleSet& set, const GridSpec& spec);

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Matrix& points() const { return points_; }
  Vector point(int i) const { return points_.row(i).transpose(); }

  // Every point of the set lies within this distance of some grid point. For
  // Lipschitz constant L the grid optimum is within L * covering_radius of the
  // true optimum.
  double covering_radius() const { return covering_radius_; }

  // Values of the oracle at every grid point (batched for QuadraticForm oracles).
  Vector evaluate(const FunctionOracle& oracle) const;

 private:
  Matrix points_;
  Vector sq_norms_;
  double covering_radius_ = 0.0;
};

// Streams rounds and maintains, for every grid point, the cumulative cost and
// whether the point is still feasible under the filter.
class GridTracker {
 public:
  GridTracker(const Grid& grid, FeasibilitySpec feasibility, int k = 1);

  // cost may be null (cumulative cost then stays 0). lipschitz is the
  // round's Lipschitz bound used for epsilon().
  void add(const FunctionOracle* cost, const std::vector<FunctionOracle>& constraints, double lipschitz = 0.0);
  // Same as add() for precomputed grid values.
  void add_values(const Vector* cost_values, const std::vector<Vector>& constraint_values, double lipschitz = 0.0);

  int rounds() const { return rounds_; }
  int feasible_count() const;
  // Round at which the last feasible grid point was eliminated (0 if none).
  int first_empty_round() const { return first_empty_round_; }

  // Lexicographically first argmin of the cumulative cost over feasible
  // points. Throws InfeasibleError if none is left.
  std::pair<int, double> best() const;
  double cumulative_at(int index) const { return cumulative_[index]; }
  const Vector& cumulative() const { return cumulative_; }
  bool feasible_at(int index) const { return feasible_[static_cast<std::size_t>(index)] != 0; }

  // covering_radius * sum of per-round Lipschitz bounds.
  double epsilon() const { return grid_->covering_radius() * lipschitz_sum_; }

  void reset();

 private:
  const Grid* grid_;
  FeasibilitySpec feasibility_;
  int k_;
  int rounds_ = 0;
  int first_empty_round_ = 0;
  double lipschitz_sum_ = 0.0;
  Vector cumulative_;
  std::vector<char> feasible_;
  // Sliding-window state for kSWindow: ring of per-round values and sums.
  std::vector<Matrix> window_ring_;
  Matrix window_sum_;
};

struct OfflineOptimum {
  int index = -1;
  Vector point;
  double value = 0.0;
  double epsilon = 0.0;
};

// Argmin over the filtered grid of sum_t f_t. costs may be empty for pure
// feasibility queries (value 0). constraints[t] lists the round-t constraints.
OfflineOptimum offline_optimum(const std::vector<FunctionOracle>& costs,
                               const std::vector<std::vector<FunctionOracle>>& constraints, const Grid& grid,
                               FeasibilitySpec feasibility, const std::vector<double>& lipschitz = {});

struct RegretSeries {
  std::vector<double> regret;   // Regret_t against the grid optimum at horizon t
  std::vector<double> epsilon;  // epsilon_grid at horizon t
  std::vector<int> argmin;      // grid index of the comparator at horizon t
};

// Regret of the recorded actions against the filtered grid optimum, for every
// prefix of the trace.
RegretSeries measured_regret(const PolicyTrace& trace, const std::vector<FunctionOracle>& costs,
                             const std::vector<std::vector<FunctionOracle>>& constraints, const Grid& grid,
                             FeasibilitySpec feasibility, const std::vector<double>& lipschitz = {});

// --- Proposition 1 --------------------------------------------------------

enum class Prop1Mode { kEqualityGreedy, kRecorded };

struct Prop1Result {
  bool hypothesis_met = true;
  int hypothesis_failure_round = 0;
  bool log_bound_holds = false;    // Q(t) <= c [ln t + 2 ln max(ln t, 1) + 1 - ln(Q(1)/c)], t >= 3
  bool sqrt_bound_holds = false;   // Q(t) <= c sqrt(t)
  bool integral_bound_holds = false;  // Q(t) <= c (1 + ln(sum_s Q(s) / Q(1)))
  double c1 = 0.0;                 // 1 - ln(Q(1)/c)
  double fitted_slack = 0.0;       // max_t Q(t)/c - (ln t + 2 ln max(ln t, 1) + c1), t >= 3
  double worst_log_margin = 0.0;
  double worst_sqrt_margin = 0.0;
  long zeros_skipped = 0;
  std::vector<double> sequence;
};

// Largest-root solution of Q^2(t) = c sum_{tau<=t} Q^2(tau) / sum_{s<=tau} Q(s),
// each round solved by bisection to 1e-12.
std::vector<double> proposition1_extremal(double c, double q1, long T);

// Checks the hypothesis and the bounds on a given sequence. Leading zeros are
// skipped and the remainder re-indexed from 1.
Prop1Result verify_proposition1_sequence(double c, const std::vector<double>& sequence);

// Equality-greedy mode builds the extremal sequence from Q(1) = q1 up to T.
// Recorded mode checks the given sequence.
Prop1Result verify_proposition1(double c, Prop1Mode mode, double q1 = 1.0, long T = 100000,
                                const std::vector<double>& recorded = {});

// --- recursion certificates ---------------------------------------------

enum class Certificate { kQIneq, kQStrCvx, kMainEq, kGronwallIneq, kGenRegDecomp };

const char* to_string(Certificate which);

// Recorded quantities a certificate reads. The comparator series hold values
// at a feasible comparator x* for each prefix t (index t-1).
struct CertificateInputs {
  const PolicyTrace* trace = nullptr;
  double G = 0.0;
  double D = 0.0;
  double V = 0.0;
  double alpha = 0.0;
  double F = 0.0;
  int S = 1;
  std::vector<double> regret_at_comparator;            // Regret_t(x*)
  std::vector<double> surrogate_regret_at_comparator;  // Regret'_t(x*)
};

// Rounds (1-based) where the certificate fails. Throws ConfigError if a field
// the certificate needs is missing.
std::vector<int> verify_recursion_certificates(const CertificateInputs& inputs, Certificate which);

// Closed-form learner regret bounds for each prefix t:
//   adaptive_convex:           sqrt(2) D sqrt(sum_{tau<=t} G_tau^2)
//   adaptive_strongly_convex:  1/2 sum_{tau<=t} G_tau^2 / H_{1:tau}
// G_tau and H_tau are the recorded surrogate gradient norms and strong
// convexities. Rounds with H_{1:tau} = 0 and G_tau = 0 contribute nothing.
std::vector<double> learner_regret_bound(const PolicyTrace& trace, LearnerMode mode, double D);

// Harmonic number 1 + 1/2 + ... + 1/t.
double harmonic_number(long t);

}  // namespace qoco
