#include "s2h/bss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "s2h/metrics.hpp"
#include "s2h/parallel.hpp"

namespace s2h {

namespace {

// Eigenpairs of a symmetric matrix in descending eigenvalue order.
void sorted_eigen(const Matrix& r, Vector& values, Matrix& vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  require(es.info() == Eigen::Success, ErrorCode::RankDeficient, "eigendecomposition failed");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

}  // namespace

std::vector<double> mdl_curve(const HyperCube& y, int n_max) {
  const int m = y.bands();
  const double l = y.pixels();
  require(n_max >= 1 && n_max <= m - 1 && l > m, ErrorCode::InvalidArgument,
          "MDL needs L > M > n_max >= 1");
  require(y.data.allFinite(), ErrorCode::RankDeficient, "correlation of non-finite data");
  const Matrix r = y.data * y.data.transpose() / l;
  Vector ev;
  Matrix vecs;
  sorted_eigen(r, ev, vecs);
  require(ev(0) > 0.0, ErrorCode::RankDeficient, "correlation matrix is zero");
  // Eigenvalues at round-off level would make the log-ratio meaningless.
  const double floor = ev(0) * 1e-12;
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor);

  std::vector<double> curve;
  for (int k = 0; k <= n_max; ++k) {
    const int rest = m - k;
    double log_geo = 0.0;
    double arith = 0.0;
    for (int i = k; i < m; ++i) {
      log_geo += std::log(ev(i));
      arith += ev(i);
    }
    log_geo /= rest;
    arith /= rest;
    const double fit = -l * rest * (log_geo - std::log(arith));
    const double penalty = 0.5 * k * (2.0 * m - k) * std::log(l);
    curve.push_back(fit + penalty);
  }
  return curve;
}

int estimate_order_mdl(const HyperCube& y, int n_max) {
  const auto curve = mdl_curve(y, n_max);
  return static_cast<int>(std::min_element(curve.begin(), curve.end()) - curve.begin());
}

VcaResult vca(const HyperCube& y, int p, std::uint64_t seed) {
  const Eigen::Index m = y.bands();
  const Eigen::Index n = y.pixels();
  require(p >= 1 && p <= std::min(m, n), ErrorCode::InvalidArgument, "VCA needs 1 <= N <= min(M, L)");
  const Matrix& r = y.data;
  const Vector mean = r.rowwise().mean();
  const Matrix ro = r.colwise() - mean;
  require(ro.cwiseAbs().maxCoeff() > 0.0, ErrorCode::DegenerateData, "all pixels are identical");

  Vector ev;
  Matrix ud;
  sorted_eigen(ro * ro.transpose() / static_cast<double>(n), ev, ud);
  const Matrix x_p = ud.leftCols(p).transpose() * ro;

  // Signal-to-noise estimate on the p-dimensional subspace.
  const double p_y = r.squaredNorm() / static_cast<double>(n);
  const double p_x = x_p.squaredNorm() / static_cast<double>(n) + mean.squaredNorm();
  const double noise = p_y - p_x;
  const double snr = noise > 0.0
                         ? 10.0 * std::log10(std::max(p_x - static_cast<double>(p) / m * p_y, 1e-300) / noise)
                         : std::numeric_limits<double>::infinity();
  const double snr_th = 15.0 + 10.0 * std::log10(static_cast<double>(p));

  Matrix proj;  // p x n, the points whose extreme projections are sought
  if (snr < snr_th) {
    const Eigen::Index d = p - 1;
    Matrix x = x_p.topRows(d);
    const double c = std::sqrt(x.colwise().squaredNorm().maxCoeff());
    proj.resize(p, n);
    proj.topRows(d) = x;
    proj.row(d).setConstant(c);
  } else {
    Vector ev2;
    Matrix ud2;
    sorted_eigen(r * r.transpose() / static_cast<double>(n), ev2, ud2);
    const Matrix xp = ud2.leftCols(p).transpose() * r;
    const Vector u = xp.rowwise().mean();
    const Eigen::RowVectorXd scale = u.transpose() * xp;
    proj = xp.array().rowwise() / scale.array();
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix a = Matrix::Zero(p, p);
  a(p - 1, 0) = 1.0;
  VcaResult res;
  for (int i = 0; i < p; ++i) {
    Vector w(p);
    for (int j = 0; j < p; ++j) w(j) = nd(rng);
    const Matrix a_used = a.leftCols(std::max(i, 1));
    Vector f = w - a_used * a_used.completeOrthogonalDecomposition().solve(w);
    const double fn = f.norm();
    require(fn > 0.0, ErrorCode::DegenerateData, "no direction orthogonal to the found endmembers");
    f /= fn;
    const Eigen::RowVectorXd v = f.transpose() * proj;
    Eigen::Index best = 0;
    double best_val = -1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double av = std::abs(v(k));
      if (av > best_val) {
        best_val = av;
        best = k;
      }
    }
    res.indices.push_back(best);
    a.col(i) = proj.col(best);
  }
  res.endmembers.resize(m, p);
  for (int i = 0; i < p; ++i) res.endmembers.col(i) = r.col(res.indices[static_cast<std::size_t>(i)]);
  return res;
}

Vector fcls_pixel(const Matrix& g, const Vector& h, double tol) {
  const Eigen::Index n = g.rows();
  // Best vertex as the feasible starting point.
  Eigen::Index start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double obj = 0.5 * g(j, j) - h(j);
    if (obj < best) {
      best = obj;
      start = j;
    }
  }
  Vector a = Vector::Zero(n);
  a(start) = 1.0;
  std::vector<bool> active(static_cast<std::size_t>(n), false);  // true = free (in the passive set)
  active[static_cast<std::size_t>(start)] = true;
  const double scale = std::max(1.0, g.diagonal().maxCoeff());

  for (int iter = 0; iter < 10 * static_cast<int>(n) + 20; ++iter) {
    std::vector<Eigen::Index> pset;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (active[static_cast<std::size_t>(j)]) pset.push_back(j);
    }
    const auto k = static_cast<Eigen::Index>(pset.size());
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    Vector rhs(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) kkt(i, j) = g(pset[static_cast<std::size_t>(i)], pset[static_cast<std::size_t>(j)]);
      kkt(i, k) = 1.0;
      kkt(k, i) = 1.0;
      rhs(i) = h(pset[static_cast<std::size_t>(i)]);
    }
    rhs(k) = 1.0;
    const Vector sol = kkt.fullPivLu().solve(rhs);
    Vector s = Vector::Zero(n);
    for (Eigen::Index i = 0; i < k; ++i) s(pset[static_cast<std::size_t>(i)]) = sol(i);

    bool feasible = true;
    for (Eigen::Index j : pset) feasible = feasible && s(j) > 0.0;
    if (feasible) {
      a = s;
      // Multipliers of the inactive bounds: mu = grad + nu with
      // nu = -mean(grad over the free set).
      const Vector grad = g * a - h;
      double nu = 0.0;
      for (Eigen::Index j : pset) nu -= grad(j);
      nu /= static_cast<double>(k);
      Eigen::Index enter = -1;
      double worst = -tol * scale;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (active[static_cast<std::size_t>(j)]) continue;
        const double mu = grad(j) + nu;
        if (mu < worst) {
          worst = mu;
          enter = j;
        }
      }
      if (enter < 0) return a;
      active[static_cast<std::size_t>(enter)] = true;
      continue;
    }
    // Step from a towards s until the first free coordinate hits zero.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index j : pset) {
      if (s(j) > 0.0) continue;
      const double t = a(j) / (a(j) - s(j));
      if (blocking < 0 || t < alpha) {
        alpha = t;
        blocking = j;
      }
    }
    a += alpha * (s - a);
    a(blocking) = 0.0;
    for (Eigen::Index j : pset) {
      if (a(j) <= 0.0) {
        a(j) = 0.0;
        active[static_cast<std::size_t>(j)] = false;
      }
    }
    a /= a.sum();
  }
  fail(ErrorCode::NonConvergence, "FCLS active set did not settle");
}

Matrix fcls(const HyperCube& y, const Matrix& e, double tol) {
  require(e.rows() == y.bands() && e.cols() >= 1, ErrorCode::ShapeMismatch, "endmember matrix does not match");
  Eigen::ColPivHouseholderQR<Matrix> qr(e);
  qr.setThreshold(1e-10);
  require(qr.rank() == e.cols(), ErrorCode::RankDeficient, "endmembers are not full column rank");
  const Matrix g = e.transpose() * e;
  const Matrix h = e.transpose() * y.data;
  Matrix out(e.cols(), y.pixels());
  parallel_for(y.pixels(), [&](std::int64_t b, std::int64_t end) {
    for (std::int64_t p = b; p < end; ++p) out.col(p) = fcls_pixel(g, h.col(p), tol);
  });
  return out;
}

UnmixResult unmix(const HyperCube& y, int n_sources, std::uint64_t seed, int n_max) {
  check_cube(y);
  UnmixResult r;
  r.n_sources = n_sources > 0 ? n_sources : estimate_order_mdl(y, std::min(n_max, y.bands() - 1));
  require(r.n_sources >= 1, ErrorCode::DegenerateData, "no sources detected");
  VcaResult v = vca(y, r.n_sources, seed);
  r.endmembers = std::move(v.endmembers);
  r.pixel_indices = std::move(v.indices);
  Eigen::ColPivHouseholderQR<Matrix> qr(r.endmembers);
  qr.setThreshold(1e-10);
  if (qr.rank() == r.endmembers.cols()) {
    r.abundances = fcls(y, r.endmembers);
    return r;
  }
  // A source extracted twice: the simplex solve is not unique, so a tiny
  // ridge picks the minimum-norm split between the copies.
  Matrix g = r.endmembers.transpose() * r.endmembers;
  g.diagonal().array() += 1e-10 * g.trace() / static_cast<double>(g.rows());
  const Matrix h = r.endmembers.transpose() * y.data;
  r.abundances.resize(r.endmembers.cols(), y.pixels());
  parallel_for(y.pixels(), [&](std::int64_t b, std::int64_t end) {
    for (std::int64_t p = b; p < end; ++p) r.abundances.col(p) = fcls_pixel(g, h.col(p));
  });
  return r;
}

std::vector<int> match_endmembers(const Matrix& est, const Matrix& ref) {
  require(est.rows() == ref.rows() && est.cols() >= ref.cols(), ErrorCode::ShapeMismatch,
          "endmember sets do not match");
  require(est.cols() <= 9, ErrorCode::InvalidArgument, "exhaustive matching supports at most 9 endmembers");
  const auto n_est = static_cast<int>(est.cols());
  const auto n_ref = static_cast<int>(ref.cols());
  Matrix cost(n_est, n_ref);
  for (int i = 0; i < n_est; ++i) {
    for (int j = 0; j < n_ref; ++j) cost(i, j) = spectral_angle_deg(est.col(i), ref.col(j));
  }
  std::vector<int> perm(static_cast<std::size_t>(n_est));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm;
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int j = 0; j < n_ref; ++j) c += cost(perm[static_cast<std::size_t>(j)], j);
    if (c < best) {
      best = c;
      best_perm.assign(perm.begin(), perm.begin() + n_ref);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best_perm;
}

}  // namespace s2h
