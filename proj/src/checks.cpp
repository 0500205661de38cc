#include "qoco/checks.hpp"

#include <algorithm>
#include <cmath>

namespace qoco {

bool verify_convexity_sample(const FunctionOracle& oracle, const AdmissibleSet& domain, int n_pairs,
                             std::uint64_t rng_seed, double tol) {
  if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
  Rng rng(rng_seed);
  const double mu = oracle.strong_convexity();
  for (int i = 0; i < n_pairs; ++i) {
    const Vector x = domain.sample(rng);
    const Vector y = domain.sample(rng);
    const double fx = oracle.value(x);
    const double fy = oracle.value(y);
    const Vector gx = oracle.subgradient(x);
    const double lower = fx + gx.dot(y - x) + 0.5 * mu * (y - x).squaredNorm();
    // Relative slack for large magnitudes; absolute tol otherwise.
    const double slack = tol * std::max(1.0, std::max(std::abs(fy), std::abs(lower)));
    if (fy < lower - slack) return false;
  }
  return true;
}

double lipschitz_estimate(const FunctionOracle& oracle, const AdmissibleSet& domain, int n_pairs,
                          std::uint64_t rng_seed) {
  if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
  Rng rng(rng_seed);
  double best = 0.0;
  int used = 0;
  for (int i = 0; i < n_pairs; ++i) {
    const Vector x = domain.sample(rng);
    const Vector y = domain.sample(rng);
    const double distance = (x - y).norm();
    if (distance == 0.0) continue;
    ++used;
    best = std::max(best, std::abs(oracle.value(x) - oracle.value(y)) / distance);
  }
  if (used == 0) throw InsufficientSamplesError("all sampled pairs were coincident");
  return best;
}

}  // namespace qoco
