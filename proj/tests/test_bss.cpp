#include <gtest/gtest.h>

#include <random>

#include "s2h/bss.hpp"
#include "s2h/metrics.hpp"
#include "s2h/simulate.hpp"
#include "support.hpp"

using namespace s2h;

namespace {

HyperCube as_cube(const Matrix& y, int width, int height) {
  HyperCube c(static_cast<int>(y.rows()), width, height);
  c.data = y;
  return c;
}

// Exhaustive oracle: best feasible equality-constrained LS over every support.
Vector fcls_brute(const Matrix& e, const Vector& y) {
  const int n = static_cast<int>(e.cols());
  double best = std::numeric_limits<double>::infinity();
  Vector best_a;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j) {
      if (mask & (1 << j)) idx.push_back(j);
    }
    const int k = static_cast<int>(idx.size());
    Matrix es(e.rows(), k);
    for (int j = 0; j < k; ++j) es.col(j) = e.col(idx[static_cast<std::size_t>(j)]);
    // KKT: [2 Es^T Es, 1; 1^T, 0] [a; nu] = [2 Es^T y; 1]
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = 2.0 * es.transpose() * es;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Vector rhs(k + 1);
    rhs.head(k) = 2.0 * es.transpose() * y;
    rhs(k) = 1.0;
    const Vector sol = kkt.fullPivLu().solve(rhs);
    if ((sol.head(k).array() < -1e-12).any()) continue;
    Vector a = Vector::Zero(n);
    for (int j = 0; j < k; ++j) a(idx[static_cast<std::size_t>(j)]) = std::max(0.0, sol(j));
    const double f = (e * a - y).squaredNorm();
    if (f < best) {
      best = f;
      best_a = a;
    }
  }
  return best_a;
}

}  // namespace

TEST(Mdl, RankTwoMixtureWithNoise) {
  const int m = 16, l = 4096;
  const Matrix e = test::random_matrix(m, 2, 1, 0.1, 0.9);
  Matrix a = test::random_matrix(2, l, 2, 0.0, 1.0);
  for (int p = 0; p < l; ++p) a.col(p) /= a.col(p).sum();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1e-3);
  Matrix y = e * a;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += nd(rng);
  // oracle: the correlation spectrum has a clear gap after the second eigenvalue
  const Eigen::SelfAdjointEigenSolver<Matrix> es(y * y.transpose() / l);
  const Vector ev = es.eigenvalues().reverse();
  ASSERT_GT(ev(1) / ev(2), 100.0);
  ASSERT_LT(ev(2) / ev(m - 1), 3.0);
  const HyperCube c = as_cube(y, 64, 64);
  EXPECT_EQ(estimate_order_mdl(c, 10), 2);
  EXPECT_EQ(mdl_curve(c, 10), mdl_curve(c, 10));
  const auto curve = mdl_curve(c, 10);
  EXPECT_EQ(std::min_element(curve.begin(), curve.end()) - curve.begin(), 2);
}

TEST(Mdl, WhiteNoiseIsAtMostOne) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 0.1);
  Matrix y(16, 4096);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = nd(rng);
  EXPECT_LE(estimate_order_mdl(as_cube(y, 64, 64), 10), 1);
}

TEST(Vca, SegmentEndpointsForAnySeed) {
  const Vector e1 = test::random_matrix(8, 1, 5, 0.1, 0.9);
  const Vector e2 = test::random_matrix(8, 1, 6, 0.1, 0.9);
  Matrix y(8, 20);
  for (int p = 0; p < 20; ++p) {
    const double t = (p * 7 % 20) / 19.0;  // a permutation of 0 .. 1
    y.col(p) = t * e1 + (1 - t) * e2;
  }
  int i0 = -1, i1 = -1;
  for (int p = 0; p < 20; ++p) {
    if (p * 7 % 20 == 0) i0 = p;
    if (p * 7 % 20 == 19) i1 = p;
  }
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const VcaResult r = vca(as_cube(y, 5, 4), 2, seed);
    std::vector<Eigen::Index> got = r.indices;
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<Eigen::Index>{std::min(i0, i1), std::max(i0, i1)})) << "seed " << seed;
  }
}

TEST(Vca, RecoversSimulatedEndmembers) {
  SceneSpec s;
  s.n_sources = 3;
  s.width = s.height = 24;
  const Scene sc = synth_scene(s);
  const VcaResult r = vca(sc.cube, 3, 7);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(r.endmembers.col(j), sc.cube.data.col(r.indices[static_cast<std::size_t>(j)]));
  }
  const auto perm = match_endmembers(r.endmembers, sc.mixing.endmembers);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE(spectral_angle_deg(r.endmembers.col(perm[static_cast<std::size_t>(j)]), sc.mixing.endmembers.col(j)),
              1.0);
  }
}

TEST(Fcls, TwoSourceMixture) {
  const Matrix e = test::random_matrix(6, 2, 8, 0.1, 0.9);
  const Vector y = 0.3 * e.col(0) + 0.7 * e.col(1);
  const Vector a = fcls_pixel(e.transpose() * e, e.transpose() * y);
  EXPECT_NEAR(a(0), 0.3, 1e-12);
  EXPECT_NEAR(a(1), 0.7, 1e-12);
}

TEST(Fcls, VertexCase) {
  const Matrix e = test::random_matrix(6, 4, 9, 0.1, 0.9);
  const Vector a = fcls_pixel(e.transpose() * e, e.transpose() * e.col(0));
  EXPECT_NEAR(a(0), 1.0, 1e-12);
  EXPECT_LE(a.tail(3).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fcls, MatchesExhaustiveOracleOutsideTheCone) {
  const Matrix e = test::random_matrix(8, 4, 10, 0.1, 0.9);
  const Matrix gram = e.transpose() * e;
  for (int t = 0; t < 200; ++t) {
    const Vector y = test::random_matrix(8, 1, 1000 + t, -0.5, 1.5);
    const Vector a = fcls_pixel(gram, e.transpose() * y);
    EXPECT_GE(a.minCoeff(), 0.0);
    EXPECT_NEAR(a.sum(), 1.0, 1e-9);
    const double f = (e * a - y).squaredNorm();
    for (int j = 0; j < 4; ++j) EXPECT_LE(f, (e.col(j) - y).squaredNorm() + 1e-12);
    const Vector ref = fcls_brute(e, y);
    EXPECT_LE((a - ref).cwiseAbs().maxCoeff(), 1e-8) << "trial " << t;
  }
}

TEST(Fcls, RankDeficientEndmembersRejected) {
  Matrix e = test::random_matrix(6, 3, 11);
  e.col(2) = e.col(0);
  const HyperCube y = test::random_cube(6, 2, 2, 12);
  try {
    fcls(y, e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::RankDeficient);
  }
}

TEST(Unmix, FiveSourceScene) {
  SceneSpec s;
  s.n_sources = 5;
  s.width = s.height = 36;
  s.seed = 3;
  const Scene sc = synth_scene(s);
  const UnmixResult r = unmix(sc.cube, 0, 1);
  EXPECT_EQ(r.n_sources, 5);
  const double resid = (r.endmembers * r.abundances - sc.cube.data).norm() / sc.cube.data.norm();
  EXPECT_LE(resid, 1e-6);
  EXPECT_GE(r.abundances.minCoeff(), 0.0);
  EXPECT_LE(r.abundances.maxCoeff(), 1.0 + 1e-12);
  for (Eigen::Index p = 0; p < r.abundances.cols(); ++p) EXPECT_NEAR(r.abundances.col(p).sum(), 1.0, 1e-9);
}

TEST(Match, FindsThePermutation) {
  const Matrix ref = test::random_matrix(10, 4, 13, 0.0, 1.0);
  const std::vector<int> perm{2, 0, 3, 1};
  Matrix est(10, 4);
  for (int j = 0; j < 4; ++j) est.col(perm[static_cast<std::size_t>(j)]) = 1.5 * ref.col(j);
  EXPECT_EQ(match_endmembers(est, ref), perm);
}
