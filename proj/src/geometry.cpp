#include "qoco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qoco {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dimension(const AdmissibleSet& set, const Vector& x) {
  if (x.size() != set.dimension()) {
    throw DimensionError("vector of dimension " + std::to_string(x.size()) + " does not match " +
                         set.kind() + " of dimension " + std::to_string(set.dimension()));
  }
}

}  // namespace

AdmissibleSet AdmissibleSet::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw ConfigError("box bounds must have equal nonzero size");
  if ((hi.array() < lo.array()).any()) throw ConfigError("box requires lo <= hi");
  require_finite(lo, "box lower bound");
  require_finite(hi, "box upper bound");
  return AdmissibleSet(BoxSet{std::move(lo), std::move(hi)});
}

AdmissibleSet AdmissibleSet::cube(int dim, double lo, double hi) {
  return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

AdmissibleSet AdmissibleSet::ball(Vector center, double radius) {
  if (center.size() == 0) throw ConfigError("ball center must be nonempty");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("ball radius must be positive");
  require_finite(center, "ball center");
  return AdmissibleSet(BallSet{std::move(center), radius});
}

AdmissibleSet AdmissibleSet::simplex(int dim) {
  if (dim < 1) throw ConfigError("simplex dimension must be >= 1");
  return AdmissibleSet(SimplexSet{dim});
}

AdmissibleSet AdmissibleSet::birkhoff(int n) {
  if (n < 1) throw ConfigError("birkhoff size must be >= 1");
  return AdmissibleSet(BirkhoffSet{n});
}

int AdmissibleSet::dimension() const {
  return std::visit(Overloaded{
                        [](const BoxSet& b) { return static_cast<int>(b.lo.size()); },
                        [](const BallSet& b) { return static_cast<int>(b.center.size()); },
                        [](const SimplexSet& s) { return s.dim; },
                        [](const BirkhoffSet& b) { return b.n * b.n; },
                    },
                    shape_);
}

double AdmissibleSet::diameter() const {
  return std::visit(Overloaded{
                        [](const BoxSet& b) { return (b.hi - b.lo).norm(); },
                        [](const BallSet& b) { return 2.0 * b.radius; },
                        [](const SimplexSet& s) { return s.dim == 1 ? 0.0 : std::sqrt(2.0); },
                        [](const BirkhoffSet& b) { return b.n == 1 ? 0.0 : std::sqrt(2.0 * b.n); },
                    },
                    shape_);
}

std::string AdmissibleSet::kind() const {
  return std::visit(Overloaded{
                        [](const BoxSet&) { return std::string("box"); },
                        [](const BallSet&) { return std::string("ball"); },
                        [](const SimplexSet&) { return std::string("simplex"); },
                        [](const BirkhoffSet&) { return std::string("birkhoff"); },
                    },
                    shape_);
}

Vector AdmissibleSet::project(const Vector& x) const {
  check_dimension(*this, x);
  require_finite(x, "projection input");
  return std::visit(Overloaded{
                        [&](const BoxSet& b) -> Vector { return x.cwiseMax(b.lo).cwiseMin(b.hi); },
                        [&](const BallSet& b) -> Vector {
                          const Vector offset = x - b.center;
                          const double norm = offset.norm();
                          if (norm <= b.radius) return x;
                          return b.center + offset * (b.radius / norm);
                        },
                        [&](const SimplexSet&) -> Vector { return project_simplex(x); },
                        [&](const BirkhoffSet& b) -> Vector { return project_birkhoff(x, b.n).x; },
                    },
                    shape_);
}

Vector AdmissibleSet::sample(Rng& rng) const {
  return std::visit(Overloaded{
                        [&](const BoxSet& b) -> Vector {
                          Vector x(b.lo.size());
                          for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(b.lo[i], b.hi[i]);
                          return x;
                        },
                        [&](const BallSet& b) -> Vector {
                          // Gaussian direction, radius ~ U^{1/d}.
                          const auto d = b.center.size();
                          Vector direction(d);
                          double norm = 0.0;
                          do {
                            for (Eigen::Index i = 0; i < d; ++i) direction[i] = rng.normal();
                            norm = direction.norm();
                          } while (norm == 0.0);
                          const double r = b.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
                          return b.center + direction * (r / norm);
                        },
                        [&](const SimplexSet& s) -> Vector {
                          // Normalized exponential spacings are uniform on the simplex.
                          Vector e(s.dim);
                          for (int i = 0; i < s.dim; ++i) e[i] = -std::log(1.0 - rng.uniform());
                          return e / e.sum();
                        },
                        [&](const BirkhoffSet& b) -> Vector {
                          Vector raw(b.n * b.n);
                          for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.uniform();
                          return project_birkhoff(raw, b.n).x;
                        },
                    },
                    shape_);
}

bool AdmissibleSet::contains(const Vector& x, double tol) const {
  if (x.size() != dimension() || !x.allFinite()) return false;
  return std::visit(Overloaded{
                        [&](const BoxSet& b) {
                          return ((x - b.lo).array() >= -tol).all() && ((b.hi - x).array() >= -tol).all();
                        },
                        [&](const BallSet& b) { return (x - b.center).norm() <= b.radius + tol; },
                        [&](const SimplexSet&) {
                          return (x.array() >= -tol).all() && std::abs(x.sum() - 1.0) <= tol;
                        },
                        [&](const BirkhoffSet& b) { return birkhoff_residual(x, b.n) <= tol; },
                    },
                    shape_);
}

Vector project(const AdmissibleSet& set, const Vector& x) { return set.project(x); }

Vector sample_uniform(const AdmissibleSet& set, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return set.sample(rng);
}

double diameter(const AdmissibleSet& set) { return set.diameter(); }

Vector project_simplex(const Vector& x) {
  const auto n = x.size();
  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }
  return (x.array() - threshold).max(0.0).matrix();
}

double birkhoff_residual(const Vector& x, int n) {
  Eigen::Map<const RowMajor> m(x.data(), n, n);
  const double rows = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (m.colwise().sum().array() - 1.0).abs().maxCoeff();
  const double negative = std::max(0.0, -m.minCoeff());
  return std::max({rows, cols, negative});
}

DykstraResult project_birkhoff(const Vector& x, int n, double tol, int max_sweeps) {
  if (x.size() != static_cast<Eigen::Index>(n) * n) throw DimensionError("birkhoff input has wrong size");
  require_finite(x, "birkhoff projection input");

  RowMajor current = Eigen::Map<const RowMajor>(x.data(), n, n);
  RowMajor corr_rows = RowMajor::Zero(n, n);
  RowMajor corr_cols = RowMajor::Zero(n, n);
  RowMajor corr_nonneg = RowMajor::Zero(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);

  DykstraResult result;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    const RowMajor previous = current;

    RowMajor shifted = current + corr_rows;
    RowMajor next = shifted;
    next.colwise() -= ((shifted.rowwise().sum().array() - 1.0) * inv_n).matrix();
    corr_rows = shifted - next;
    current = next;

    shifted = current + corr_cols;
    next = shifted;
    next.rowwise() -= ((shifted.colwise().sum().array() - 1.0) * inv_n).matrix();
    corr_cols = shifted - next;
    current = next;

    shifted = current + corr_nonneg;
    next = shifted.cwiseMax(0.0);
    corr_nonneg = shifted - next;
    current = next;

    const double rows = (current.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double cols = (current.colwise().sum().array() - 1.0).abs().maxCoeff();
    result.residual = std::max(rows, cols);
    const double change = (current - previous).cwiseAbs().maxCoeff();
    if (result.residual <= tol && change <= tol) {
      result.sweeps = sweep;
      result.x = Eigen::Map<const Vector>(current.data(), static_cast<Eigen::Index>(n) * n);
      return result;
    }
  }
  throw BirkhoffConvergenceError(
      "Dykstra projection onto the Birkhoff polytope did not converge; residual " +
          std::to_string(result.residual),
      result.residual);
}

}  // namespace qoco
