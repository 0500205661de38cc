#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qoco {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Absolute tolerance used for comparisons unless an operation states otherwise.
inline constexpr double kTolerance = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

bool all_finite(const Vector& x);
void require_finite(const Vector& x, const char* what);

// Seeded generator with platform-independent uniform and normal draws, so
// that traces are reproducible bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// (curvature / 2) ||x||^2 + <linear, x> + constant. Affine and isotropic
// quadratic oracles carry this form so that grid evaluations can be batched
// and nonnegative combinations stay closed-form.
struct QuadraticForm {
  double curvature = 0.0;
  Vector linear;
  double constant = 0.0;

  double value(const Vector& x) const { return 0.5 * curvature * x.squaredNorm() + linear.dot(x) + constant; }
  Vector gradient(const Vector& x) const { return curvature * x + linear; }
};

// First-order access to a convex function. Immutable once built; copies share
// the underlying callables.
class FunctionOracle {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;

  FunctionOracle(ValueFn value, GradientFn gradient, double strong_convexity = 0.0);

  static FunctionOracle affine(Vector slope, double offset);
  // (curvature / 2) * ||x - center||^2 + offset; strongly convex with parameter curvature.
  static FunctionOracle quadratic(double curvature, Vector center, double offset = 0.0);
  static FunctionOracle constant(double value, int dim);
  // Requires curvature >= 0; strong convexity equals the curvature.
  static FunctionOracle from_form(QuadraticForm form);

  double value(const Vector& x) const;
  Vector subgradient(const Vector& x) const;
  double strong_convexity() const { return strong_convexity_; }
  // Copy declaring a different (typically weaker) strong convexity parameter.
  FunctionOracle with_strong_convexity(double mu) const;

  // Present for oracles built from a QuadraticForm.
  const std::optional<QuadraticForm>& quadratic_form() const { return form_; }

 private:
  ValueFn value_;
  GradientFn gradient_;
  double strong_convexity_ = 0.0;
  std::optional<QuadraticForm> form_;
};

// sum_i weights[i] * oracles[i] with nonnegative weights; closed form when
// every term carries a QuadraticForm. Strong convexity is sum_i w_i mu_i.
// Requires at least one oracle.
FunctionOracle weighted_sum(const std::vector<double>& weights, const std::vector<FunctionOracle>& oracles);

// What the adversary reveals after seeing the action of round t.
struct RoundReveal {
  std::optional<FunctionOracle> cost;
  std::vector<FunctionOracle> constraints;

  int k() const { return static_cast<int>(constraints.size()); }
};

struct TraceRecord {
  int t = 0;  // 1-based
  Vector action;
  double cost_value = 0.0;
  Vector constraint_values;
  Vector queue_vector;
  double step_size = 0.0;
  double surrogate_grad_norm = 0.0;
  // Not part of the CSV schema; used by certificates.
  double surrogate_strong_convexity = 0.0;
  double theta = 0.0;
  int phase = 1;
};

using PolicyTrace = std::vector<TraceRecord>;

struct ProblemParams {
  int d = 1;
  int k = 1;
  long T = 1;
  std::optional<double> G;
  std::optional<double> D;
  std::optional<double> alpha;
  std::optional<double> V;
  std::optional<int> S;

  void validate() const;
};

}  // namespace qoco
