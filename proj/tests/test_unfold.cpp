#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "s2h/simulate.hpp"
#include "s2h/unfold.hpp"
#include "support.hpp"

using namespace s2h;

namespace {

// Direct solve of (2 D^T D + rho I) Y = 2 D^T Y_S + rho (V + U).
Matrix dense_y_step(const Matrix& d, double rho, const Matrix& ys, const Matrix& vpu) {
  const Matrix a = 2.0 * d.transpose() * d + rho * Matrix::Identity(d.cols(), d.cols());
  const Matrix x = 2.0 * d.transpose() * ys + rho * vpu;
  return a.partialPivLu().solve(x);
}

UnfoldConfig math_cfg(int stages, double tv_weight) {
  UnfoldConfig c = UnfoldConfig::for_strategy(Strategy::Mathematical);
  c.stages = stages;
  c.tv_weight = tv_weight;
  c.tol = 0.0;
  return c;
}

// Noiseless consistent problem on the desk sensor.
struct Consistent {
  MultiResCube y_s;
  HyperCube truth;
  SrtMatrix srt;
};

Consistent consistent_problem(int side, std::uint64_t seed) {
  SceneSpec spec;
  spec.width = spec.height = side;
  spec.seed = seed;
  const auto sensor = desk_sensor_bands();
  const auto wl = hyperspectral_wavelengths(spec.bands_h);
  Consistent c;
  c.srt = make_srt(sensor, wl);
  const Scene sc = synth_scene(spec);
  c.truth = sc.cube;
  HyperCube ms = apply_srt(c.srt, sc.cube, centers(sensor));
  std::vector<ResClass> all_hr(6, ResClass::HR);
  c.y_s = MultiResCube{ms, all_hr};
  return c;
}

}  // namespace

TEST(UnfoldConfig, StrategyDefaultsAndKeys) {
  const UnfoldConfig m = UnfoldConfig::for_strategy(Strategy::Mathematical);
  EXPECT_EQ(m.prox, ProxKind::SpectralTv);
  EXPECT_EQ(m.phi_mode, PhiMode::Exact);
  EXPECT_FALSE(m.learn_rho);
  const UnfoldConfig h = UnfoldConfig::for_strategy(Strategy::Hybrid);
  EXPECT_EQ(h.prox, ProxKind::SpectralTv);
  EXPECT_EQ(h.phi_mode, PhiMode::Learned);
  KvConfig kv;
  h.to_config(kv);
  const UnfoldConfig back = UnfoldConfig::from_config(kv);
  KvConfig kv2;
  back.to_config(kv2);
  EXPECT_EQ(kv.to_string(), kv2.to_string());
  KvConfig bad;
  bad.set("strategy", "magic");
  EXPECT_THROW(UnfoldConfig::from_config(bad), Error);
}

TEST(YStep, HandExample) {
  Matrix d(1, 2);
  d << 1, 1;
  Matrix ys(1, 1);
  ys << 3;
  const Matrix vpu = Matrix::Ones(2, 1);
  const Matrix y = y_step_closed_form(d, 2.0, ys, vpu);
  EXPECT_NEAR(y(0, 0), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(y(1, 0), 4.0 / 3.0, 1e-15);
}

TEST(YStep, ZeroDReturnsVPlusU) {
  const Matrix vpu = test::random_matrix(5, 3, 1);
  const Matrix y = y_step_closed_form(Matrix::Zero(2, 5), 0.7, test::random_matrix(2, 3, 2), vpu);
  EXPECT_LE((y - vpu).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(YStep, ClosedFormMatchesDenseSolve) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lr(std::log(1e-2), std::log(1e2));
  for (int t = 0; t < 50; ++t) {
    const Matrix d = test::random_matrix(6, 32, 10 + t, 0.0, 1.0);
    const double rho = std::exp(lr(rng));
    const Matrix ys = test::random_matrix(6, 7, 100 + t);
    const Matrix vpu = test::random_matrix(32, 7, 200 + t);
    const Matrix ref = dense_y_step(d, rho, ys, vpu);
    EXPECT_LE((y_step_closed_form(d, rho, ys, vpu) - ref).norm() / ref.norm(), 1e-10);
  }
}

TEST(YStep, LearnedWithExactPhiEqualsClosedForm) {
  const Matrix d = test::random_matrix(4, 12, 4, 0.0, 1.0);
  const double rho = 0.8;
  const Matrix ys = test::random_matrix(4, 5, 5);
  const Matrix vpu = test::random_matrix(12, 5, 6);
  const Matrix a = y_step_closed_form(d, rho, ys, vpu);
  const Matrix b = y_step_learned(d, rho, exact_phi(d, rho), ys, vpu);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix x = 2.0 * d.transpose() * ys + rho * vpu;
  const Matrix c = y_step_learned(d, rho, Matrix::Zero(4, 4), ys, vpu);
  EXPECT_LE((c - x / rho).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(YStep, ExactPhiIsTheInverse) {
  const Matrix d = test::random_matrix(3, 8, 7);
  const double rho = 0.3;
  const Matrix a = Matrix::Identity(3, 3) + (2.0 / rho) * d * d.transpose();
  EXPECT_LE((exact_phi(d, rho) * a - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UnfoldParams, LearnedPhiIsSymmetrised) {
  UnfoldConfig c = UnfoldConfig::for_strategy(Strategy::Learnable);
  UnfoldParams p = init_unfold_params(c, 3, 8, nullptr, 1);
  p.phi_raw[0] = test::random_matrix(3, 3, 8);
  const Matrix phi = p.phi_for(0, PhiMode::Learned);
  EXPECT_EQ(phi, (0.5 * (p.phi_raw[0] + p.phi_raw[0].transpose())).eval());
  EXPECT_LE((phi - phi.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(UnfoldParams, SeededInitIsReproducible) {
  UnfoldConfig c = UnfoldConfig::for_strategy(Strategy::Learnable);
  c.share_d = false;
  const UnfoldParams a = init_unfold_params(c, 6, 32, nullptr, 42);
  const UnfoldParams b = init_unfold_params(c, 6, 32, nullptr, 42);
  ASSERT_EQ(a.d.size(), static_cast<std::size_t>(c.stages - 1));
  for (std::size_t i = 0; i < a.d.size(); ++i) EXPECT_EQ(a.d[i], b.d[i]);
  EXPECT_EQ(a.denoisers[1].blocks[0][0].weight, b.denoisers[1].blocks[0][0].weight);
  EXPECT_NE(a.d[0], init_unfold_params(c, 6, 32, nullptr, 43).d[0]);
}

TEST(DualUpdate, Cases) {
  const Matrix u = test::random_matrix(3, 4, 9);
  const Matrix v = test::random_matrix(3, 4, 10);
  EXPECT_LE((dual_update(u, v, v) - u).cwiseAbs().maxCoeff(), 1e-15);
  const Matrix c = test::random_matrix(3, 4, 11);
  EXPECT_LE((dual_update(Matrix::Zero(3, 4), v + c, v) + c).cwiseAbs().maxCoeff(), 1e-15);
  const Matrix y = test::random_matrix(3, 4, 12);
  const Matrix got = dual_update(u, y, v);
  for (Eigen::Index i = 0; i < u.size(); ++i) EXPECT_DOUBLE_EQ(got(i), u(i) + v(i) - y(i));
}

TEST(VStep, ZeroDenoiserAndZeroWeightAreIdentity) {
  const Matrix z = test::random_matrix(5, 12, 13);
  UnfoldConfig learn = UnfoldConfig::for_strategy(Strategy::Learnable);
  const DenoiserParams zero = DenoiserParams::zeros(5);
  EXPECT_EQ(v_step(learn, 1.0, z, 4, 3, &zero), z);
  UnfoldConfig math = math_cfg(3, 0.0);
  EXPECT_EQ(v_step(math, 0.5, z, 4, 3, nullptr), z);
}

TEST(VStep, SinglePixelIsTheScaledTvProx) {
  const Matrix z = test::random_matrix(9, 1, 14);
  const UnfoldConfig math = math_cfg(3, 0.4);
  const double rho = 0.5;
  const Matrix v = v_step(math, rho, z, 1, 1, nullptr);
  const Vector ref = prox_tv1d_taut_string(Vector(z.col(0)), TvWeight(0.4 / rho / 8.0));
  EXPECT_LE((v.col(0) - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InitState, ZeroDualAndUpsampledStart) {
  const Consistent c = consistent_problem(6, 1);
  const UnfoldConfig cfg = math_cfg(4, 0.05);
  const auto wl = hyperspectral_wavelengths(32);
  const UnfoldState s = init_state(c.y_s, c.srt, cfg, wl);
  EXPECT_TRUE(s.u.data.isZero(0.0));
  EXPECT_TRUE(s.y_h == spectral_upsample_init(c.y_s, wl));
}

TEST(RunUnfolding, InertSingleStageReturnsUpsample) {
  const Consistent c = consistent_problem(6, 2);
  UnfoldConfig cfg = math_cfg(1, 0.0);
  UnfoldParams p = init_unfold_params(cfg, 6, 32, &c.srt, 0);
  p.d[0].setZero();
  const auto wl = hyperspectral_wavelengths(32);
  const HyperCube out = run_unfolding(c.y_s, cfg, p, wl);
  EXPECT_LE((out.data - spectral_upsample_init(c.y_s, wl).data).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RunUnfolding, ResidualDecreasesInMathematicalMode) {
  const Consistent c = consistent_problem(12, 3);
  const UnfoldConfig cfg = math_cfg(20, 0.05);
  const UnfoldParams p = init_unfold_params(cfg, 6, 32, &c.srt, 0);
  UnfoldTrace trace;
  const HyperCube out = run_unfolding(c.y_s, cfg, p, hyperspectral_wavelengths(32), &trace);
  ASSERT_GE(trace.residual.size(), 10u);
  EXPECT_LT(trace.residual.back(), 0.01 * trace.residual.front());
  // monotone until the residual reaches the level where the TV step jitters
  for (std::size_t k = 1; k < trace.residual.size() && trace.residual[k - 1] > 1e-5; ++k) {
    EXPECT_LE(trace.residual[k], trace.residual[k - 1]) << "stage " << k;
  }
  const Matrix fit = c.srt.d * out.data - c.y_s.cube.data;
  EXPECT_LE(fit.norm() / c.y_s.cube.data.norm(), 1e-2);
}

TEST(RunUnfolding, EarlyStopAtTolerance) {
  const Consistent c = consistent_problem(6, 4);
  UnfoldConfig cfg = math_cfg(50, 0.05);
  cfg.tol = 1e-4;
  const UnfoldParams p = init_unfold_params(cfg, 6, 32, &c.srt, 0);
  UnfoldTrace trace;
  run_unfolding(c.y_s, cfg, p, hyperspectral_wavelengths(32), &trace);
  EXPECT_LT(trace.stages_run, 50);
  EXPECT_LE(trace.residual.back(), 1e-4);
}

TEST(RunUnfolding, PixelPermutationEquivariant) {
  const Consistent c = consistent_problem(6, 5);
  const UnfoldConfig cfg = math_cfg(6, 0.05);
  const UnfoldParams p = init_unfold_params(cfg, 6, 32, &c.srt, 0);
  const auto wl = hyperspectral_wavelengths(32);
  std::vector<int> perm(36);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(6));
  MultiResCube shuffled = c.y_s;
  for (int i = 0; i < 36; ++i) shuffled.cube.data.col(i) = c.y_s.cube.data.col(perm[static_cast<std::size_t>(i)]);
  const HyperCube a = run_unfolding(c.y_s, cfg, p, wl);
  const HyperCube b = run_unfolding(shuffled, cfg, p, wl);
  for (int i = 0; i < 36; ++i) {
    EXPECT_LE((b.data.col(i) - a.data.col(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(UnfoldBackward, HybridMatchesFiniteDifferences) {
  // TV prox + learned Y-step with per-stage D: covers D, rho and Phi paths.
  UnfoldConfig cfg = UnfoldConfig::for_strategy(Strategy::Hybrid);
  cfg.stages = 3;
  cfg.share_d = false;
  cfg.tv_weight = 0.02;
  const int w = 3, h = 2, mm = 2, m = 5;
  UnfoldParams p = init_unfold_params(cfg, mm, m, nullptr, 7);
  for (auto& phi : p.phi_raw) phi += 0.05 * test::random_matrix(mm, mm, 8);
  const Matrix ys = test::random_matrix(mm, w * h, 9, 0.0, 1.0);
  const Matrix y0 = test::random_matrix(m, w * h, 10, 0.0, 1.0);
  const Matrix g = test::random_matrix(m, w * h, 11);
  UnfoldTape tape;
  unfold_forward(ys, y0, w, h, cfg, p, &tape);
  UnfoldParams grad = p;
  grad.visit([](const std::string&, Matrix& t) { t.setZero(); }, "");
  unfold_backward(ys, w, h, cfg, p, tape, g, grad);

  std::vector<std::pair<std::string, Matrix*>> named;
  std::vector<const Matrix*> analytic;
  p.visit([&](const std::string& n, Matrix& t) { named.emplace_back(n, &t); }, "unfold");
  grad.visit([&](const std::string&, const Matrix& t) { analytic.push_back(&t); }, "unfold");
  const double eps = 1e-6;
  for (std::size_t i = 0; i < named.size(); ++i) {
    Matrix& t = *named[i].second;
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      const double keep = t(j);
      t(j) = keep + eps;
      const double fp = g.cwiseProduct(unfold_forward(ys, y0, w, h, cfg, p)).sum();
      t(j) = keep - eps;
      const double fm = g.cwiseProduct(unfold_forward(ys, y0, w, h, cfg, p)).sum();
      t(j) = keep;
      const double num = (fp - fm) / (2 * eps);
      const double ana = (*analytic[i])(j);
      EXPECT_LE(std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}), 1e-5)
          << named[i].first << "[" << j << "] numeric " << num << " analytic " << ana;
    }
  }
}
