#include "qoco/switchsim.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "qoco/geometry.hpp"

namespace qoco {
namespace {

double brute_force_weighted_matching(const Matrix& w) {
  const int n = static_cast<int>(w.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w(i, perm[static_cast<std::size_t>(i)]);
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(BvnTest, IdentityIsOneComponent) {
  const Vector id{{1, 0, 0, 0, 1, 0, 0, 0, 1}};
  const BvnDecomposition dec = bvn_decompose(id, 3);
  ASSERT_EQ(dec.components.size(), 1u);
  EXPECT_DOUBLE_EQ(dec.components[0].weight, 1.0);
  EXPECT_EQ(dec.components[0].permutation, (std::vector<int>{0, 1, 2}));
}

TEST(BvnTest, UniformTwoByTwoSplitsEvenly) {
  const BvnDecomposition dec = bvn_decompose(Vector::Constant(4, 0.5), 2);
  ASSERT_EQ(dec.components.size(), 2u);
  EXPECT_DOUBLE_EQ(dec.components[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(dec.components[1].weight, 0.5);
  EXPECT_NEAR((bvn_reconstruct(dec) - Vector::Constant(4, 0.5)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

// Random convex combination of n^2 random permutation matrices.
Vector random_doubly_stochastic(int n, Rng& rng) {
  Vector x = Vector::Zero(n * n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int c = 0; c < n * n; ++c) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.index(i + 1)]);
    const double w = rng.uniform(0.0, 1.0);
    total += w;
    for (int i = 0; i < n; ++i) x[i * n + perm[static_cast<std::size_t>(i)]] += w;
  }
  return x / total;
}

TEST(BvnTest, RandomMatricesReconstruct) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = random_doubly_stochastic(4, rng);
    const BvnDecomposition dec = bvn_decompose(x, 4);
    EXPECT_LE(dec.components.size(), 10u);
    EXPECT_LE((bvn_reconstruct(dec) - x).cwiseAbs().maxCoeff(), 1e-8);
    double w = 0.0;
    for (const BvnComponent& c : dec.components) {
      EXPECT_GT(c.weight, 0.0);
      w += c.weight;
    }
    EXPECT_NEAR(w, 1.0, 1e-9);
  }
}

TEST(BvnTest, RejectsNonDoublyStochastic) {
  EXPECT_THROW(bvn_decompose(Vector{{1.0, 1.0, 0.0, 0.0}}, 2), Error);
  EXPECT_THROW(bvn_decompose(Vector{{1.5, -0.5, -0.5, 1.5}}, 2), Error);
  EXPECT_THROW(bvn_decompose(Vector::Constant(3, 1.0), 2), DimensionError);
}

TEST(SampleMatchingTest, SingleComponentIsDeterministic) {
  const Vector id{{1, 0, 0, 1}};
  const BvnDecomposition dec = bvn_decompose(id, 2);
  Rng rng(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_matching(dec, rng), id);
}

TEST(SampleMatchingTest, FrequenciesMatchWeights) {
  const BvnDecomposition dec = bvn_decompose(Vector::Constant(4, 0.5), 2);
  Rng rng(43);
  int diag = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) diag += sample_matching(dec, rng)[0] == 1.0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(diag) / n, 0.5, 0.02);
}

TEST(SampleMatchingTest, MeanMatchesFractionalAction) {
  Rng rng(44);
  const Vector x = AdmissibleSet::birkhoff(3).sample(rng);
  const BvnDecomposition dec = bvn_decompose(x, 3);
  Vector mean = Vector::Zero(9);
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += sample_matching(dec, rng);
  mean /= n;
  EXPECT_LE((mean - x).cwiseAbs().maxCoeff(), 0.02);
}

TEST(MaxweightTest, ZeroQueuesGiveIdentity) {
  EXPECT_EQ(maxweight_baseline(Matrix::Zero(3, 3), Matrix::Ones(3, 3)), (Vector{{1, 0, 0, 0, 1, 0, 0, 0, 1}}));
}

TEST(MaxweightTest, DominantEntryIsServed) {
  Matrix q = Matrix::Zero(3, 3);
  q(0, 2) = 10.0;
  const Vector z = maxweight_baseline(q, Matrix::Ones(3, 3));
  EXPECT_EQ(z[0 * 3 + 2], 1.0);
}

TEST(MaxweightTest, AgreesWithBruteForce) {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix q(3, 3), s(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        q(i, j) = static_cast<double>(rng.index(6));
        s(i, j) = 1.0 + static_cast<double>(rng.index(3));
      }
    const Vector z = maxweight_baseline(q, s);
    const Matrix w = q.cwiseProduct(s);
    double got = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) got += w(i, j) * z[i * 3 + j];
    EXPECT_DOUBLE_EQ(got, brute_force_weighted_matching(w));
  }
}

TEST(SwitchSimulatorTest, ZeroArrivalsKeepQueuesEmpty) {
  SwitchConfig cfg;
  cfg.N = 3;
  // x* uniform 1/3 with services in {1, 2} floors every arrival to 0.
  cfg.service_max = 2;
  SwitchSimulator sim(cfg);
  for (int t = 0; t < 50; ++t) {
    const SwitchRound r = sim.step();
    EXPECT_EQ(r.arrivals.b.sum(), 0.0);
    EXPECT_EQ(r.physical.sum(), 0.0);
  }
}

TEST(SwitchSimulatorTest, SingleInputSingleOutput) {
  SwitchConfig cfg;
  cfg.N = 1;
  SwitchSimulator sim(cfg);
  for (int t = 0; t < 10; ++t) {
    const SwitchRound r = sim.step();
    EXPECT_EQ(r.z, Vector::Ones(1));
    EXPECT_EQ(r.physical[0], 0.0);
  }
}

TEST(SwitchSimulatorTest, ArrivalsAreOneFeasibleAndQueuesNonnegative) {
  SwitchConfig cfg;
  cfg.N = 3;
  cfg.adversary_seed = 7;
  cfg.policy_seed = 8;
  SwitchSimulator sim(cfg);
  const Vector xs = Vector::Constant(9, 1.0 / 3.0);
  for (int t = 0; t < 200; ++t) {
    const SwitchRound r = sim.step();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_LE(r.arrivals.b(i, j), r.arrivals.s(i, j) * xs[i * 3 + j] + 1e-12);
    EXPECT_GE(r.physical.minCoeff(), 0.0);
    EXPECT_LE(birkhoff_residual(r.x, 3), 1e-6);
  }
}

TEST(SwitchCsvTest, LoadsRowsAndFillsMissing) {
  const std::string path = ::testing::TempDir() + "switch_rows.csv";
  {
    std::ofstream out(path);
    out << "t,i,j,b,s\n1,0,1,2,3\n2,1,0,1,1\n";
  }
  const std::vector<SwitchArrivals> rows = load_switch_csv(path, 2);
  std::remove(path.c_str());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].b(0, 1), 2.0);
  EXPECT_EQ(rows[0].s(0, 1), 3.0);
  EXPECT_EQ(rows[0].b(1, 0), 0.0);
  EXPECT_EQ(rows[1].b(1, 0), 1.0);
}

TEST(SwitchCsvTest, MissingFileThrows) {
  EXPECT_THROW(load_switch_csv("/nonexistent/switch.csv", 2), Error);
}

}  // namespace
}  // namespace qoco
