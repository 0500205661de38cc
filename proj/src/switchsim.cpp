#include "qoco/switchsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qoco {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sinkhorn balancing to remove the projection's residual before subtraction.
RowMajor balance(const Vector& x, int n) {
  RowMajor m = Eigen::Map<const RowMajor>(x.data(), n, n).cwiseMax(0.0);
  for (int iter = 0; iter < 1000; ++iter) {
    m.array().colwise() /= m.rowwise().sum().array();
    m.array().rowwise() /= m.colwise().sum().array();
    const double err = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
    if (err <= 1e-15) break;
  }
  return m;
}

}  // namespace

BvnDecomposition bvn_decompose(const Vector& x, int n) {
  if (n < 1 || x.size() != static_cast<Eigen::Index>(n) * n) throw DimensionError("bvn: input is not N x N");
  require_finite(x, "bvn input");
  Eigen::Map<const RowMajor> in(x.data(), n, n);
  const double row_err = (in.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (in.colwise().sum().array() - 1.0).abs().maxCoeff();
  if (row_err > 1e-6 || col_err > 1e-6 || in.minCoeff() < -1e-8) {
    throw BvnError("bvn: input is not doubly stochastic", std::max(row_err, col_err));
  }

  RowMajor residual = balance(x, n);
  BvnDecomposition dec;
  dec.n = n;
  const int max_components = n * n + 1;
  while (residual.maxCoeff() > 1e-9) {
    if (static_cast<int>(dec.components.size()) >= max_components) {
      throw BvnError("bvn: too many components", residual.maxCoeff());
    }
    Matrix mask(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) mask(i, j) = residual(i, j) > kBvnSupportThreshold ? 1.0 : 0.0;
    const std::vector<int> perm = max_weight_assignment(mask);
    double weight = residual(0, perm[0]);
    for (int i = 0; i < n; ++i) {
      if (mask(i, perm[static_cast<std::size_t>(i)]) == 0.0) {
        throw BvnError("bvn: no perfect matching on the support", residual.maxCoeff());
      }
      weight = std::min(weight, residual(i, perm[static_cast<std::size_t>(i)]));
    }
    for (int i = 0; i < n; ++i) {
      double& entry = residual(i, perm[static_cast<std::size_t>(i)]);
      entry -= weight;
      if (entry <= kBvnSupportThreshold) entry = 0.0;
    }
    dec.components.push_back(BvnComponent{weight, perm});
  }
  dec.residual_norm = residual.maxCoeff();
  double total = 0.0;
  for (const BvnComponent& c : dec.components) total += c.weight;
  for (BvnComponent& c : dec.components) c.weight /= total;
  return dec;
}

Vector bvn_reconstruct(const BvnDecomposition& dec) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dec.n) * dec.n);
  for (const BvnComponent& c : dec.components) out += c.weight * permutation_matrix(c.permutation);
  return out;
}

Vector sample_matching(const BvnDecomposition& dec, Rng& rng) {
  if (dec.components.empty()) throw ConfigError("cannot sample from an empty decomposition");
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (const BvnComponent& c : dec.components) {
    cumulative += c.weight;
    if (u < cumulative) return permutation_matrix(c.permutation);
  }
  return permutation_matrix(dec.components.back().permutation);
}

Vector maxweight_baseline(const Matrix& queues, const Matrix& services) {
  if (queues.rows() != services.rows() || queues.cols() != services.cols()) {
    throw DimensionError("maxweight: queue and service shapes differ");
  }
  return matching_oracle(queues.cwiseProduct(services));
}

std::vector<SwitchArrivals> load_switch_csv(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open switch trace '" + path + "'");
  std::vector<SwitchArrivals> rounds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.find_first_not_of("0123456789,.- \t\r") != std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long t = 0;
    int i = 0, j = 0;
    double b = 0.0, s = 0.0;
    if (!(fields >> t >> i >> j >> b >> s)) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected t,i,j,b,s");
    }
    if (t < 1 || i < 0 || j < 0 || i >= n || j >= n) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": index out of range");
    }
    if (b < 0.0 || s < 0.0 || b != std::floor(b) || s != std::floor(s)) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": b and s must be nonnegative integers");
    }
    while (static_cast<long>(rounds.size()) < t) rounds.push_back({Matrix::Zero(n, n), Matrix::Zero(n, n)});
    rounds[static_cast<std::size_t>(t - 1)].b(i, j) = b;
    rounds[static_cast<std::size_t>(t - 1)].s(i, j) = s;
  }
  return rounds;
}

SwitchSimulator::SwitchSimulator(SwitchConfig config)
    : config_(std::move(config)),
      policy_(AdmissibleSet::birkhoff(config_.N), config_.N * config_.N, config_.mode, config_.policy_seed,
              config_.ftpl_scale),
      sampler_(config_.policy_seed ^ 0x9e3779b97f4a7c15ULL),
      adversary_rng_(config_.adversary_seed),
      physical_(Vector::Zero(static_cast<Eigen::Index>(config_.N) * config_.N)) {
  const int n = config_.N;
  if (config_.hidden.size() == 0) config_.hidden = Vector::Constant(static_cast<Eigen::Index>(n) * n, 1.0 / n);
  if (config_.hidden.size() != static_cast<Eigen::Index>(n) * n) throw DimensionError("hidden matrix is not N x N");
  if (birkhoff_residual(config_.hidden, n) > 1e-9) throw ConfigError("hidden matrix must be doubly stochastic");
  if (config_.service_max == 0) config_.service_max = n;
  if (config_.service_max < 1) throw ConfigError("service_max must be >= 1");
}

SwitchArrivals SwitchSimulator::arrivals(int t) {
  const int n = config_.N;
  if (!config_.replay.empty()) {
    if (t > static_cast<int>(config_.replay.size())) return {Matrix::Zero(n, n), Matrix::Zero(n, n)};
    return config_.replay[static_cast<std::size_t>(t - 1)];
  }
  SwitchArrivals a{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = 1.0 + static_cast<double>(adversary_rng_.index(static_cast<std::size_t>(config_.service_max)));
      a.s(i, j) = s;
      // Small slack keeps floor() from dropping a unit on exact products.
      a.b(i, j) = std::floor(s * config_.hidden[i * n + j] + 1e-12);
    }
  }
  return a;
}

SwitchRound SwitchSimulator::step() {
  const int n = config_.N;
  ++t_;
  SwitchRound out;
  out.t = t_;
  out.x = policy_.action();
  out.arrivals = arrivals(t_);

  RoundReveal reveal;
  reveal.constraints.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vector slope = Vector::Zero(static_cast<Eigen::Index>(n) * n);
      slope[i * n + j] = -out.arrivals.s(i, j);
      reveal.constraints.push_back(FunctionOracle::affine(std::move(slope), out.arrivals.b(i, j)));
    }
  }

  out.z = sample_matching(bvn_decompose(out.x, n), sampler_);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int idx = i * n + j;
      physical_[idx] = std::max(0.0, physical_[idx] + out.arrivals.b(i, j) - out.arrivals.s(i, j) * out.z[idx]);
    }
  }
  out.physical = physical_;
  out.trace = policy_.round(reveal);
  return out;
}

}  // namespace qoco
