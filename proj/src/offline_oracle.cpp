#include "qoco/offline_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qoco {
namespace {

bool within(double lhs, double rhs) {
  return lhs <= rhs + 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

// Tensor grid with the first coordinate varying slowest.
Matrix tensor_grid(const Vector& lo, const Vector& hi, int per_axis) {
  const auto d = lo.size();
  long count = 1;
  for (Eigen::Index i = 0; i < d; ++i) count *= per_axis;
  Matrix pts(count, d);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (long row = 0; row < count; ++row) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const int j = idx[static_cast<std::size_t>(i)];
      pts(row, i) = per_axis == 1 ? 0.5 * (lo[i] + hi[i])
                                  : lo[i] + (hi[i] - lo[i]) * static_cast<double>(j) / (per_axis - 1);
    }
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < per_axis) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return pts;
}

double tensor_covering_radius(const Vector& lo, const Vector& hi, int per_axis) {
  const Vector span = hi - lo;
  if (per_axis == 1) return 0.5 * span.norm();
  return 0.5 * span.norm() / (per_axis - 1);
}

void simplex_lattice(int dim, int remaining, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == dim - 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int v = 0; v <= remaining; ++v) {
    prefix.push_back(v);
    simplex_lattice(dim, remaining - v, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

Grid Grid::build(const AdmissibleSet& set, const GridSpec& spec) {
  if (spec.points_per_dimension < 1) throw ConfigError("grid needs points_per_dimension >= 1");
  Grid grid;
  const int per_axis = spec.points_per_dimension;
  if (const auto* box = std::get_if<BoxSet>(&set.shape())) {
    grid.points_ = tensor_grid(box->lo, box->hi, per_axis);
    grid.covering_radius_ = tensor_covering_radius(box->lo, box->hi, per_axis);
  } else if (const auto* ball = std::get_if<BallSet>(&set.shape())) {
    // Bounding-box grid pulled into the ball; projection is nonexpansive, so
    // the covering radius of the box grid carries over.
    const Vector lo = ball->center.array() - ball->radius;
    const Vector hi = ball->center.array() + ball->radius;
    grid.points_ = tensor_grid(lo, hi, per_axis);
    for (Eigen::Index r = 0; r < grid.points_.rows(); ++r) {
      grid.points_.row(r) = set.project(grid.points_.row(r).transpose()).transpose();
    }
    grid.covering_radius_ = tensor_covering_radius(lo, hi, per_axis);
  } else if (const auto* simplex = std::get_if<SimplexSet>(&set.shape())) {
    const int m = std::max(1, per_axis - 1);
    std::vector<std::vector<int>> lattice;
    std::vector<int> prefix;
    simplex_lattice(simplex->dim, m, prefix, lattice);
    grid.points_.resize(static_cast<Eigen::Index>(lattice.size()), simplex->dim);
    for (std::size_t r = 0; r < lattice.size(); ++r)
      for (int i = 0; i < simplex->dim; ++i)
        grid.points_(static_cast<Eigen::Index>(r), i) = static_cast<double>(lattice[r][static_cast<std::size_t>(i)]) / m;
    grid.covering_radius_ = std::sqrt(static_cast<double>(simplex->dim)) / m;
  } else {
    const int n = std::get<BirkhoffSet>(set.shape()).n;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<Vector> pts;
    do {
      pts.push_back(permutation_matrix(perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    Rng rng(spec.rng_seed);
    for (int s = 0; s < per_axis; ++s) pts.push_back(set.sample(rng));
    grid.points_.resize(static_cast<Eigen::Index>(pts.size()), n * n);
    for (std::size_t r = 0; r < pts.size(); ++r) grid.points_.row(static_cast<Eigen::Index>(r)) = pts[r].transpose();
    // No spacing guarantee off the vertices; the diameter is the honest bound.
    // Linear objectives are still minimized exactly at a vertex.
    grid.covering_radius_ = set.diameter();
  }
  grid.sq_norms_ = grid.points_.rowwise().squaredNorm();
  return grid;
}

Vector Grid::evaluate(const FunctionOracle& oracle) const {
  if (const auto& form = oracle.quadratic_form()) {
    if (form->linear.size() != points_.cols()) throw DimensionError("grid evaluation: oracle dimension mismatch");
    Vector values = points_ * form->linear;
    values.array() += form->constant;
    if (form->curvature != 0.0) values += 0.5 * form->curvature * sq_norms_;
    return values;
  }
  Vector values(points_.rows());
  Vector x(points_.cols());
  for (Eigen::Index r = 0; r < points_.rows(); ++r) {
    x = points_.row(r).transpose();
    values[r] = oracle.value(x);
  }
  return values;
}

GridTracker::GridTracker(const Grid& grid, FeasibilitySpec feasibility, int k)
    : grid_(&grid), feasibility_(feasibility), k_(k) {
  if (feasibility_.mode == Feasibility::kSWindow && feasibility_.S < 1) throw ConfigError("window S must be >= 1");
  if (k_ < 1) throw ConfigError("tracker needs k >= 1");
  reset();
}

void GridTracker::reset() {
  rounds_ = 0;
  first_empty_round_ = 0;
  lipschitz_sum_ = 0.0;
  cumulative_ = Vector::Zero(grid_->size());
  feasible_.assign(static_cast<std::size_t>(grid_->size()), 1);
  window_ring_.clear();
  if (feasibility_.mode == Feasibility::kSWindow) {
    window_ring_.assign(static_cast<std::size_t>(feasibility_.S), Matrix::Zero(grid_->size(), k_));
    window_sum_ = Matrix::Zero(grid_->size(), k_);
  }
}

void GridTracker::add(const FunctionOracle* cost, const std::vector<FunctionOracle>& constraints, double lipschitz) {
  std::optional<Vector> cost_values;
  if (cost) cost_values = grid_->evaluate(*cost);
  std::vector<Vector> values;
  if (feasibility_.mode != Feasibility::kIgnore) {
    values.reserve(constraints.size());
    for (const FunctionOracle& g : constraints) values.push_back(grid_->evaluate(g));
  }
  add_values(cost_values ? &*cost_values : nullptr, values, lipschitz);
}

void GridTracker::add_values(const Vector* cost_values, const std::vector<Vector>& constraint_values,
                             double lipschitz) {
  ++rounds_;
  lipschitz_sum_ += lipschitz;
  if (cost_values) cumulative_ += *cost_values;
  const int n = grid_->size();
  switch (feasibility_.mode) {
    case Feasibility::kIgnore:
      break;
    case Feasibility::kPerRound:
      for (const Vector& g : constraint_values)
        for (int p = 0; p < n; ++p)
          if (g[p] > kFeasibilityTolerance) feasible_[static_cast<std::size_t>(p)] = 0;
      break;
    case Feasibility::kSWindow: {
      if (static_cast<int>(constraint_values.size()) != k_) throw DimensionError("tracker: constraint count mismatch");
      const int S = feasibility_.S;
      Matrix& slot = window_ring_[static_cast<std::size_t>((rounds_ - 1) % S)];
      for (int i = 0; i < k_; ++i) slot.col(i) = constraint_values[static_cast<std::size_t>(i)];
      window_sum_ += slot;
      if (rounds_ >= S) {
        for (int p = 0; p < n; ++p)
          if ((window_sum_.row(p).array() > kFeasibilityTolerance).any()) feasible_[static_cast<std::size_t>(p)] = 0;
        window_sum_ -= window_ring_[static_cast<std::size_t>(rounds_ % S)];
      }
      break;
    }
  }
  if (first_empty_round_ == 0 && feasible_count() == 0) first_empty_round_ = rounds_;
}

int GridTracker::feasible_count() const {
  return static_cast<int>(std::count(feasible_.begin(), feasible_.end(), 1));
}

std::pair<int, double> GridTracker::best() const {
  int arg = -1;
  double value = std::numeric_limits<double>::infinity();
  for (int p = 0; p < grid_->size(); ++p) {
    if (feasible_[static_cast<std::size_t>(p)] && cumulative_[p] < value) {
      value = cumulative_[p];
      arg = p;
    }
  }
  if (arg < 0) {
    throw InfeasibleError("no grid point is feasible; the last one was eliminated in round " +
                          std::to_string(first_empty_round_));
  }
  return {arg, value};
}

OfflineOptimum offline_optimum(const std::vector<FunctionOracle>& costs,
                               const std::vector<std::vector<FunctionOracle>>& constraints, const Grid& grid,
                               FeasibilitySpec feasibility, const std::vector<double>& lipschitz) {
  const std::size_t rounds = std::max(costs.size(), constraints.size());
  if (rounds == 0) throw ConfigError("offline_optimum needs at least one round");
  if (!costs.empty() && !constraints.empty() && costs.size() != constraints.size()) {
    throw DimensionError("offline_optimum: cost and constraint streams differ in length");
  }
  const int k = constraints.empty() ? 1 : std::max<int>(1, static_cast<int>(constraints.front().size()));
  GridTracker tracker(grid, feasibility, k);
  const std::vector<FunctionOracle> none;
  for (std::size_t t = 0; t < rounds; ++t) {
    tracker.add(costs.empty() ? nullptr : &costs[t], constraints.empty() ? none : constraints[t],
                t < lipschitz.size() ? lipschitz[t] : 0.0);
  }
  const auto [index, value] = tracker.best();
  return OfflineOptimum{index, grid.point(index), value, tracker.epsilon()};
}

RegretSeries measured_regret(const PolicyTrace& trace, const std::vector<FunctionOracle>& costs,
                             const std::vector<std::vector<FunctionOracle>>& constraints, const Grid& grid,
                             FeasibilitySpec feasibility, const std::vector<double>& lipschitz) {
  if (costs.size() != trace.size()) throw DimensionError("measured_regret: one cost per trace round required");
  if (!constraints.empty() && constraints.size() != trace.size()) {
    throw DimensionError("measured_regret: constraint stream length differs from trace");
  }
  const int k = constraints.empty() ? 1 : std::max<int>(1, static_cast<int>(constraints.front().size()));
  GridTracker tracker(grid, feasibility, k);
  const std::vector<FunctionOracle> none;
  RegretSeries series;
  double policy_total = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    policy_total += costs[t].value(trace[t].action);
    tracker.add(&costs[t], constraints.empty() ? none : constraints[t], t < lipschitz.size() ? lipschitz[t] : 0.0);
    const auto [index, value] = tracker.best();
    series.regret.push_back(policy_total - value);
    series.epsilon.push_back(tracker.epsilon());
    series.argmin.push_back(index);
  }
  return series;
}

// --- Proposition 1 --------------------------------------------------------

std::vector<double> proposition1_extremal(double c, double q1, long T) {
  if (!(c > 0.0)) throw ConfigError("proposition 1 needs c > 0");
  if (!(q1 > 0.0)) throw ConfigError("proposition 1 needs Q(1) > 0");
  if (T < 1) throw ConfigError("proposition 1 needs T >= 1");
  std::vector<double> q;
  q.reserve(static_cast<std::size_t>(T));
  q.push_back(q1);
  double partial = q1;                // sum_{s<t} Q(s)
  double weighted = q1 * q1 / q1;     // sum_{tau<t} Q^2(tau) / S_tau
  for (long t = 2; t <= T; ++t) {
    const double A = weighted;
    const double S = partial;
    auto h = [&](double x) { return x * x - c * (A + x * x / (S + x)); };
    double lo = 0.0;
    double hi = std::max(1.0, std::sqrt(c * A) + c);
    while (h(hi) <= 0.0) hi *= 2.0;
    // h < 0 below the root and increasing beyond it, so bisection on [0, hi]
    // converges to the largest root.
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (h(mid) > 0.0 ? hi : lo) = mid;
    }
    const double next = hi;
    q.push_back(next);
    partial += next;
    weighted += next * next / partial;
  }
  return q;
}

Prop1Result verify_proposition1_sequence(double c, const std::vector<double>& sequence) {
  if (!(c > 0.0)) throw ConfigError("proposition 1 needs c > 0");
  Prop1Result result;
  std::size_t first = 0;
  while (first < sequence.size() && sequence[first] == 0.0) ++first;
  result.zeros_skipped = static_cast<long>(first);
  result.sequence.assign(sequence.begin() + static_cast<std::ptrdiff_t>(first), sequence.end());
  const std::vector<double>& q = result.sequence;
  if (q.empty()) {
    result.log_bound_holds = result.sqrt_bound_holds = result.integral_bound_holds = true;
    return result;
  }
  for (double v : q) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw EvaluationError("proposition 1: sequence must be finite and nonnegative");
  }

  const double q1 = q.front();
  result.c1 = 1.0 - std::log(q1 / c);
  result.fitted_slack = -std::numeric_limits<double>::infinity();
  result.worst_log_margin = -std::numeric_limits<double>::infinity();
  result.worst_sqrt_margin = -std::numeric_limits<double>::infinity();
  result.log_bound_holds = result.sqrt_bound_holds = result.integral_bound_holds = true;

  double partial = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    partial += q[i];
    weighted += q[i] * q[i] / partial;
    if (result.hypothesis_met && !within(q[i] * q[i], c * weighted)) {
      result.hypothesis_met = false;
      result.hypothesis_failure_round = static_cast<int>(i + 1 + first);
    }
    const double sqrt_margin = q[i] - c * std::sqrt(t);
    result.worst_sqrt_margin = std::max(result.worst_sqrt_margin, sqrt_margin);
    if (!within(q[i], c * std::sqrt(t))) result.sqrt_bound_holds = false;
    if (!within(q[i], c * (1.0 + std::log(partial / q1)))) result.integral_bound_holds = false;
    if (i + 1 >= 3) {
      const double lt = std::log(t);
      const double shape = lt + 2.0 * std::log(std::max(lt, 1.0)) + result.c1;
      const double margin = q[i] - c * shape;
      result.worst_log_margin = std::max(result.worst_log_margin, margin);
      result.fitted_slack = std::max(result.fitted_slack, q[i] / c - shape);
      if (!within(q[i], c * shape)) result.log_bound_holds = false;
    }
  }
  return result;
}

Prop1Result verify_proposition1(double c, Prop1Mode mode, double q1, long T, const std::vector<double>& recorded) {
  if (mode == Prop1Mode::kEqualityGreedy) return verify_proposition1_sequence(c, proposition1_extremal(c, q1, T));
  return verify_proposition1_sequence(c, recorded);
}

// --- recursion certificates ---------------------------------------------

const char* to_string(Certificate which) {
  switch (which) {
    case Certificate::kQIneq:
      return "q_ineq";
    case Certificate::kQStrCvx:
      return "q_str_cvx";
    case Certificate::kMainEq:
      return "main_eq";
    case Certificate::kGronwallIneq:
      return "gronwall_ineq";
    case Certificate::kGenRegDecomp:
      return "gen_reg_decomp";
  }
  return "unknown";
}

double harmonic_number(long t) {
  double h = 0.0;
  for (long i = 1; i <= t; ++i) h += 1.0 / static_cast<double>(i);
  return h;
}

std::vector<int> verify_recursion_certificates(const CertificateInputs& in, Certificate which) {
  if (!in.trace) throw ConfigError("certificate needs a trace");
  const PolicyTrace& trace = *in.trace;
  const std::size_t n = trace.size();
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string(to_string(which)) + " certificate needs " + what);
  };
  const bool uses_regret = which == Certificate::kMainEq || which == Certificate::kGronwallIneq;
  const bool uses_surrogate =
      which == Certificate::kMainEq || which == Certificate::kGenRegDecomp;
  if (uses_regret) need(in.regret_at_comparator.size() == n, "Regret_t(x*) for every round");
  if (uses_surrogate) need(in.surrogate_regret_at_comparator.size() == n, "Regret'_t(x*) for every round");
  need(in.G > 0.0, "G > 0");
  if (which != Certificate::kQStrCvx && which != Certificate::kGenRegDecomp) need(in.D > 0.0, "D > 0");
  if (which == Certificate::kQStrCvx || which == Certificate::kGronwallIneq) need(in.alpha > 0.0, "alpha > 0");
  if (uses_regret) need(in.V > 0.0, "V > 0");
  if (which == Certificate::kGenRegDecomp) need(in.F > 0.0 && in.S >= 1, "F > 0 and S >= 1");

  std::vector<int> failures;
  double sum_sq = 0.0;        // sum_tau sum_i Q_i^2(tau)
  double sum_q = 0.0;         // sum_s sum_i Q_i(s)
  double ratio_sum = 0.0;     // q_str_cvx summands
  double harmonic_sum = 0.0;  // sum_tau Q^2(tau) / tau
  double harmonic = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const TraceRecord& rec = trace[idx];
    const double t = static_cast<double>(idx + 1);
    const int k = static_cast<int>(rec.queue_vector.size());
    const double q_sq = rec.queue_vector.squaredNorm();
    const double q_sum = rec.queue_vector.sum();
    sum_sq += q_sq;
    sum_q += q_sum;
    harmonic += 1.0 / t;
    harmonic_sum += q_sq / t;
    bool ok = true;
    switch (which) {
      case Certificate::kQIneq: {
        const double c = in.G * in.D * std::sqrt(2.0 * k);
        ok = within(q_sq, c * std::sqrt(sum_sq));
        break;
      }
      case Certificate::kQStrCvx: {
        if (sum_q > 0.0) ratio_sum += q_sq / sum_q;
        const double c = k * in.G * in.G / (4.0 * in.alpha);
        ok = within(q_sq, c * ratio_sum);
        break;
      }
      case Certificate::kMainEq: {
        const double lhs = q_sq + in.V * in.regret_at_comparator[idx];
        const double mid = in.surrogate_regret_at_comparator[idx];
        const double rhs = 2.0 * in.G * in.D * std::sqrt(sum_sq) + 2.0 * in.G * in.D * in.V * std::sqrt(t);
        ok = within(lhs, mid) && within(lhs, rhs);
        break;
      }
      case Certificate::kGronwallIneq: {
        const double lhs = q_sq + in.V * in.regret_at_comparator[idx];
        const double g2a = in.G * in.G / in.alpha;
        const double rhs = in.V * g2a * harmonic + g2a / in.V * harmonic_sum;
        ok = within(lhs, rhs);
        break;
      }
      case Certificate::kGenRegDecomp: {
        const double F = in.F;
        const double S = in.S;
        const double rhs = in.surrogate_regret_at_comparator[idx] + 2.0 * k * F * F * S * t + 2.0 * F * S * q_sum +
                           4.0 * F * F * S * S * k;
        ok = within(q_sq, rhs);
        break;
      }
    }
    if (!ok) failures.push_back(static_cast<int>(idx + 1));
  }
  return failures;
}

std::vector<double> learner_regret_bound(const PolicyTrace& trace, LearnerMode mode, double D) {
  std::vector<double> bound;
  bound.reserve(trace.size());
  double sq_sum = 0.0;
  double h_sum = 0.0;
  double ratio_sum = 0.0;
  for (const TraceRecord& rec : trace) {
    const double g2 = rec.surrogate_grad_norm * rec.surrogate_grad_norm;
    sq_sum += g2;
    h_sum += rec.surrogate_strong_convexity;
    if (mode == LearnerMode::kAdaptiveStronglyConvex) {
      if (h_sum > 0.0) {
        ratio_sum += 0.5 * g2 / h_sum;
      } else if (g2 > 0.0) {
        ratio_sum = std::numeric_limits<double>::infinity();
      }
      bound.push_back(ratio_sum);
    } else {
      bound.push_back(std::sqrt(2.0) * D * std::sqrt(sq_sum));
    }
  }
  return bound;
}

}  // namespace qoco
