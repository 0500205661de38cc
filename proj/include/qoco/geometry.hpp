#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "qoco/core.hpp"

namespace qoco {

// Tolerance on row/column residuals for Birkhoff projections.
inline constexpr double kBirkhoffTolerance = 1e-8;
inline constexpr int kBirkhoffMaxSweeps = 10000;

struct BoxSet {
  Vector lo;
  Vector hi;
};

struct BallSet {
  Vector center;
  double radius = 1.0;
};

// Probability simplex {x >= 0, sum x = 1}.
struct SimplexSet {
  int dim = 1;
};

// N x N doubly stochastic matrices, flattened row-major into R^{N*N}.
struct BirkhoffSet {
  int n = 1;
};

class BirkhoffConvergenceError : public Error {
 public:
  BirkhoffConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class AdmissibleSet {
 public:
  using Shape = std::variant<BoxSet, BallSet, SimplexSet, BirkhoffSet>;

  static AdmissibleSet box(Vector lo, Vector hi);
  static AdmissibleSet cube(int dim, double lo, double hi);
  static AdmissibleSet ball(Vector center, double radius);
  static AdmissibleSet simplex(int dim);
  static AdmissibleSet birkhoff(int n);

  int dimension() const;
  double diameter() const;
  std::string kind() const;
  const Shape& shape() const { return shape_; }

  Vector project(const Vector& x) const;
  Vector sample(Rng& rng) const;
  bool contains(const Vector& x, double tol = kTolerance) const;

 private:
  explicit AdmissibleSet(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

Vector project(const AdmissibleSet& set, const Vector& x);
Vector sample_uniform(const AdmissibleSet& set, std::uint64_t rng_seed);
double diameter(const AdmissibleSet& set);

// Euclidean projection onto the probability simplex (sort-based).
Vector project_simplex(const Vector& x);

struct DykstraResult {
  Vector x;
  int sweeps = 0;
  double residual = 0.0;
};

// Dykstra's alternating projections onto {row sums = 1}, {column sums = 1},
// {entries >= 0}. Throws BirkhoffConvergenceError after max_sweeps.
DykstraResult project_birkhoff(const Vector& x, int n, double tol = kBirkhoffTolerance,
                               int max_sweeps = kBirkhoffMaxSweeps);

// Largest absolute deviation of a row or column sum from 1, or of a negative entry from 0.
double birkhoff_residual(const Vector& x, int n);

}  // namespace qoco
