#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qoco/base_learners.hpp"
#include "qoco/core.hpp"
#include "qoco/ocs.hpp"

namespace qoco {

// Entry threshold separating numerical zeros from support.
inline constexpr double kBvnSupportThreshold = 1e-10;

struct BvnComponent {
  double weight = 0.0;
  std::vector<int> permutation;  // row i -> column permutation[i]
};

struct BvnDecomposition {
  int n = 0;
  std::vector<BvnComponent> components;
  double residual_norm = 0.0;  // max entry left after the last subtraction
};

class BvnError : public Error {
 public:
  BvnError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// x is a flattened row-major N x N doubly stochastic matrix (row/column sums
// within 1e-6 of 1, entries >= -1e-8).
BvnDecomposition bvn_decompose(const Vector& x, int n);

// Weighted sum of the components, flattened row-major.
Vector bvn_reconstruct(const BvnDecomposition& dec);

// Component i with probability weight_i, as a flattened permutation matrix.
Vector sample_matching(const BvnDecomposition& dec, Rng& rng);

// Matching maximizing sum_ij Q_ij s_ij z_ij.
Vector maxweight_baseline(const Matrix& queues, const Matrix& services);

struct SwitchArrivals {
  Matrix b;  // arrivals
  Matrix s;  // service rates
};

// Per-round arrivals read from CSV rows t,i,j,b,s (1-based t, 0-based i, j;
// header line optional). Missing entries are 0.
std::vector<SwitchArrivals> load_switch_csv(const std::string& path, int n);

struct SwitchConfig {
  int N = 2;
  LearnerMode mode = LearnerMode::kAdaptiveConvex;
  double ftpl_scale = 1.0;
  std::uint64_t policy_seed = 0;     // learner and matching sampling
  std::uint64_t adversary_seed = 0;  // arrivals and services
  // Hidden doubly stochastic x*; uniform 1/N when empty.
  Vector hidden;
  // Services drawn uniformly from {1, ..., service_max}; N when 0.
  int service_max = 0;
  // When nonempty, arrivals are replayed from here instead of generated.
  std::vector<SwitchArrivals> replay;
};

struct SwitchRound {
  int t = 0;
  Vector x;  // fractional action
  Vector z;  // sampled matching
  SwitchArrivals arrivals;
  Vector physical;    // physical queues after the round, flattened
  TraceRecord trace;  // OCS record driven by x
};

// N x N input-queued switch run by the OCS policy over the Birkhoff polytope.
// Arrivals are 1-feasible for the hidden x*: b_ij = floor(s_ij x*_ij).
class SwitchSimulator {
 public:
  explicit SwitchSimulator(SwitchConfig config);

  SwitchRound step();

  int rounds() const { return t_; }
  const Vector& physical_queues() const { return physical_; }
  double max_physical_queue() const { return physical_.maxCoeff(); }
  const OcsPolicy& policy() const { return policy_; }
  const SwitchConfig& config() const { return config_; }

 private:
  SwitchArrivals arrivals(int t);

  SwitchConfig config_;
  OcsPolicy policy_;
  Rng sampler_;
  Rng adversary_rng_;
  Vector physical_;
  int t_ = 0;
};

}  // namespace qoco
