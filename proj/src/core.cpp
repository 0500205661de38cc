#include "qoco/core.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace qoco {

bool all_finite(const Vector& x) { return x.allFinite(); }

void require_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) throw EvaluationError(std::string("non-finite ") + what);
}

double Rng::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

FunctionOracle::FunctionOracle(ValueFn value, GradientFn gradient, double strong_convexity)
    : value_(std::move(value)), gradient_(std::move(gradient)), strong_convexity_(strong_convexity) {
  if (!(strong_convexity_ >= 0.0) || !std::isfinite(strong_convexity_)) {
    throw ConfigError("strong convexity must be a finite nonnegative number");
  }
}

FunctionOracle FunctionOracle::from_form(QuadraticForm form) {
  if (!(form.curvature >= 0.0)) throw ConfigError("quadratic form curvature must be nonnegative");
  require_finite(form.linear, "quadratic form coefficients");
  auto shared = std::make_shared<const QuadraticForm>(form);
  FunctionOracle oracle([shared](const Vector& x) { return shared->value(x); },
                        [shared](const Vector& x) { return shared->gradient(x); }, form.curvature);
  oracle.form_ = std::move(form);
  return oracle;
}

FunctionOracle FunctionOracle::affine(Vector slope, double offset) {
  return from_form(QuadraticForm{0.0, std::move(slope), offset});
}

FunctionOracle FunctionOracle::quadratic(double curvature, Vector center, double offset) {
  const double constant = 0.5 * curvature * center.squaredNorm() + offset;
  return from_form(QuadraticForm{curvature, -curvature * center, constant});
}

FunctionOracle FunctionOracle::constant(double value, int dim) {
  return affine(Vector::Zero(dim), value);
}

FunctionOracle FunctionOracle::with_strong_convexity(double mu) const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("strong convexity must be a finite nonnegative number");
  FunctionOracle copy = *this;
  copy.strong_convexity_ = mu;
  return copy;
}

double FunctionOracle::value(const Vector& x) const {
  const double v = value_(x);
  if (!std::isfinite(v)) throw EvaluationError("oracle returned a non-finite value");
  return v;
}

Vector FunctionOracle::subgradient(const Vector& x) const {
  Vector g = gradient_(x);
  if (g.size() != x.size()) throw DimensionError("subgradient dimension mismatch");
  require_finite(g, "subgradient");
  return g;
}

FunctionOracle weighted_sum(const std::vector<double>& weights, const std::vector<FunctionOracle>& oracles) {
  if (weights.size() != oracles.size()) throw DimensionError("weighted_sum: weight and oracle counts differ");
  if (oracles.empty()) throw DimensionError("weighted_sum: no terms");
  bool closed = true;
  double mu = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw EvaluationError("weighted_sum: bad weight");
    closed = closed && oracles[i].quadratic_form().has_value();
    mu += weights[i] * oracles[i].strong_convexity();
  }
  if (closed) {
    const auto dim = oracles.front().quadratic_form()->linear.size();
    QuadraticForm form{0.0, Vector::Zero(dim), 0.0};
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] == 0.0) continue;
      const QuadraticForm& term = *oracles[i].quadratic_form();
      if (term.linear.size() != dim) throw DimensionError("weighted_sum: oracle dimension mismatch");
      form.curvature += weights[i] * term.curvature;
      form.linear += weights[i] * term.linear;
      form.constant += weights[i] * term.constant;
    }
    return FunctionOracle::from_form(std::move(form)).with_strong_convexity(mu);
  }
  auto terms = std::make_shared<const std::vector<FunctionOracle>>(oracles);
  auto w = std::make_shared<const std::vector<double>>(weights);
  return FunctionOracle(
      [terms, w](const Vector& x) {
        double total = 0.0;
        for (std::size_t i = 0; i < w->size(); ++i)
          if ((*w)[i] != 0.0) total += (*w)[i] * (*terms)[i].value(x);
        return total;
      },
      [terms, w](const Vector& x) {
        Vector g = Vector::Zero(x.size());
        for (std::size_t i = 0; i < w->size(); ++i)
          if ((*w)[i] != 0.0) g += (*w)[i] * (*terms)[i].subgradient(x);
        return g;
      },
      mu);
}

void ProblemParams::validate() const {
  if (d < 1) throw ConfigError("dimension d must be >= 1");
  if (k < 1) throw ConfigError("constraint count k must be >= 1");
  if (T < 1) throw ConfigError("horizon T must be >= 1");
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(G, "G");
  positive(D, "D");
  positive(alpha, "alpha");
  positive(V, "V");
  if (S && *S < 1) throw ConfigError("S must be >= 1");
}

}  // namespace qoco
