#pragma once

#include <cstdint>

#include "qoco/core.hpp"
#include "qoco/geometry.hpp"

namespace qoco {

// Samples n_pairs (x, y) from the set and checks the first-order convexity
// inequality with the oracle's declared strong convexity, within tol.
bool verify_convexity_sample(const FunctionOracle& oracle, const AdmissibleSet& domain, int n_pairs,
                             std::uint64_t rng_seed, double tol = kTolerance);

// max |f(x) - f(y)| / ||x - y|| over sampled pairs. Coincident pairs are skipped.
double lipschitz_estimate(const FunctionOracle& oracle, const AdmissibleSet& domain, int n_pairs,
                          std::uint64_t rng_seed);

}  // namespace qoco
