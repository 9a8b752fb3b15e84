#include "s2h/unfold.hpp"

#include <algorithm>
#include <random>

#include "s2h/simulate.hpp"

namespace s2h {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Mathematical: return "mathematical";
    case Strategy::Hybrid: return "hybrid";
    case Strategy::Learnable: return "learnable";
  }
  return "?";
}

std::string_view to_string(ProxKind p) noexcept {
  return p == ProxKind::SpectralTv ? "spectral_tv" : "denoiser";
}

std::string_view to_string(PhiMode p) noexcept { return p == PhiMode::Exact ? "exact" : "learned"; }

Strategy parse_strategy(std::string_view s) {
  if (s == "mathematical") return Strategy::Mathematical;
  if (s == "hybrid") return Strategy::Hybrid;
  if (s == "learnable") return Strategy::Learnable;
  fail(ErrorCode::ConfigError, "unknown strategy '" + std::string(s) + "'");
}

ProxKind parse_prox_kind(std::string_view s) {
  if (s == "spectral_tv") return ProxKind::SpectralTv;
  if (s == "denoiser") return ProxKind::Denoiser;
  fail(ErrorCode::ConfigError, "unknown prox '" + std::string(s) + "'");
}

PhiMode parse_phi_mode(std::string_view s) {
  if (s == "exact") return PhiMode::Exact;
  if (s == "learned") return PhiMode::Learned;
  fail(ErrorCode::ConfigError, "unknown phi_mode '" + std::string(s) + "'");
}

namespace {

TvSolver parse_tv_solver(std::string_view s) {
  if (s == "taut_string") return TvSolver::TautString;
  if (s == "split_bregman") return TvSolver::SplitBregman;
  fail(ErrorCode::ConfigError, "unknown tv_solver '" + std::string(s) + "'");
}

std::string_view to_string(TvSolver s) { return s == TvSolver::TautString ? "taut_string" : "split_bregman"; }

}  // namespace

UnfoldConfig UnfoldConfig::for_strategy(Strategy s) {
  UnfoldConfig c;
  c.strategy = s;
  switch (s) {
    case Strategy::Mathematical:
      c.stages = 20;
      c.rho = 0.1;
      c.tv_weight = 0.05;
      c.learn_rho = false;
      c.prox = ProxKind::SpectralTv;
      c.phi_mode = PhiMode::Exact;
      c.tol = 1e-6;
      break;
    case Strategy::Hybrid:
      c.prox = ProxKind::SpectralTv;
      break;
    case Strategy::Learnable:
      break;
  }
  return c;
}

const std::vector<std::string>& UnfoldConfig::config_keys() {
  static const std::vector<std::string> keys = {"strategy",  "stages",    "rho",       "learn_rho",
                                                "share_d",   "prox",      "phi_mode",  "tv_weight",
                                                "tv_solver", "tol",       "denoiser_blocks", "denoiser_convs"};
  return keys;
}

void UnfoldConfig::to_config(KvConfig& cfg) const {
  cfg.set("strategy", std::string(to_string(strategy)));
  cfg.set("stages", std::to_string(stages));
  cfg.set("rho", format_double(rho));
  cfg.set("learn_rho", learn_rho ? "true" : "false");
  cfg.set("share_d", share_d ? "true" : "false");
  cfg.set("prox", std::string(to_string(prox)));
  cfg.set("phi_mode", std::string(to_string(phi_mode)));
  cfg.set("tv_weight", format_double(tv_weight));
  cfg.set("tv_solver", std::string(to_string(tv_solver)));
  cfg.set("tol", format_double(tol));
  cfg.set("denoiser_blocks", std::to_string(denoiser_blocks));
  cfg.set("denoiser_convs", std::to_string(denoiser_convs));
}

UnfoldConfig UnfoldConfig::from_config(const KvConfig& cfg) {
  UnfoldConfig c = for_strategy(cfg.has("strategy") ? parse_strategy(cfg.get("strategy")) : Strategy::Learnable);
  if (cfg.has("stages")) c.stages = static_cast<int>(cfg.get_int("stages"));
  if (cfg.has("rho")) c.rho = cfg.get_double("rho");
  if (cfg.has("learn_rho")) c.learn_rho = cfg.get_bool("learn_rho");
  if (cfg.has("share_d")) c.share_d = cfg.get_bool("share_d");
  if (cfg.has("prox")) c.prox = parse_prox_kind(cfg.get("prox"));
  if (cfg.has("phi_mode")) c.phi_mode = parse_phi_mode(cfg.get("phi_mode"));
  if (cfg.has("tv_weight")) c.tv_weight = cfg.get_double("tv_weight");
  if (cfg.has("tv_solver")) c.tv_solver = parse_tv_solver(cfg.get("tv_solver"));
  if (cfg.has("tol")) c.tol = cfg.get_double("tol");
  if (cfg.has("denoiser_blocks")) c.denoiser_blocks = static_cast<int>(cfg.get_int("denoiser_blocks"));
  if (cfg.has("denoiser_convs")) c.denoiser_convs = static_cast<int>(cfg.get_int("denoiser_convs"));
  validate_unfold_config(c);
  return c;
}

void validate_unfold_config(const UnfoldConfig& c) {
  require(c.stages >= 1, ErrorCode::ConfigError, "stages must be >= 1");
  require(c.rho > 0.0 && std::isfinite(c.rho), ErrorCode::ConfigError, "rho must be positive");
  require(c.tv_weight >= 0.0 && std::isfinite(c.tv_weight), ErrorCode::ConfigError, "tv_weight must be >= 0");
  require(c.tol >= 0.0, ErrorCode::ConfigError, "tol must be >= 0");
  require(c.denoiser_blocks >= 1 && c.denoiser_convs >= 1, ErrorCode::ConfigError,
          "denoiser needs at least one block and one conv");
}

// ---------------------------------------------------------------------------

const Matrix& UnfoldParams::d_for(int stage) const {
  return d[d.size() == 1 ? 0 : static_cast<std::size_t>(stage)];
}

Matrix UnfoldParams::phi_for(int stage, PhiMode mode) const {
  if (mode == PhiMode::Exact) return exact_phi(d_for(stage), rho());
  const Matrix& p = phi_raw[phi_raw.size() == 1 ? 0 : static_cast<std::size_t>(stage)];
  return 0.5 * (p + p.transpose());
}

void UnfoldParams::visit(const TensorVisitor& fn, const std::string& prefix) {
  for (std::size_t i = 0; i < d.size(); ++i) fn(prefix + ".d" + std::to_string(i), d[i]);
  fn(prefix + ".log_rho", log_rho);
  for (std::size_t i = 0; i < phi_raw.size(); ++i) fn(prefix + ".phi" + std::to_string(i), phi_raw[i]);
  for (std::size_t i = 0; i < denoisers.size(); ++i) denoisers[i].visit(fn, prefix + ".denoiser" + std::to_string(i));
}

void UnfoldParams::visit(const ConstTensorVisitor& fn, const std::string& prefix) const {
  for (std::size_t i = 0; i < d.size(); ++i) fn(prefix + ".d" + std::to_string(i), d[i]);
  fn(prefix + ".log_rho", log_rho);
  for (std::size_t i = 0; i < phi_raw.size(); ++i) fn(prefix + ".phi" + std::to_string(i), phi_raw[i]);
  for (std::size_t i = 0; i < denoisers.size(); ++i) denoisers[i].visit(fn, prefix + ".denoiser" + std::to_string(i));
}

UnfoldParams init_unfold_params(const UnfoldConfig& cfg, int bands_m, int bands_h, const SrtMatrix* srt,
                                std::uint64_t seed) {
  validate_unfold_config(cfg);
  require(bands_m >= 1 && bands_h >= 2, ErrorCode::DimensionMismatch, "bad band counts");
  std::mt19937_64 rng(seed);
  UnfoldParams p;
  const int n_d = cfg.share_d ? 1 : std::max(1, cfg.stages - 1);
  Matrix d0;
  if (srt) {
    require(srt->ms_bands() == bands_m && srt->hs_bands() == bands_h, ErrorCode::DimensionMismatch,
            "SRT is " + std::to_string(srt->ms_bands()) + "x" + std::to_string(srt->hs_bands()) + ", expected " +
                std::to_string(bands_m) + "x" + std::to_string(bands_h));
    d0 = srt->d;
  }
  std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (bands_m + bands_h)));
  for (int i = 0; i < n_d; ++i) {
    if (srt) {
      p.d.push_back(d0);
    } else {
      Matrix d(bands_m, bands_h);
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, c) = nd(rng);
      }
      p.d.push_back(std::move(d));
    }
  }
  p.log_rho = Matrix::Constant(1, 1, std::log(cfg.rho));
  if (cfg.phi_mode == PhiMode::Learned) {
    for (const auto& d : p.d) p.phi_raw.push_back(exact_phi(d, cfg.rho));
  }
  if (cfg.prox == ProxKind::Denoiser) {
    for (int k = 0; k < cfg.stages; ++k) {
      p.denoisers.push_back(DenoiserParams::random(bands_h, rng, cfg.denoiser_blocks, cfg.denoiser_convs));
    }
  }
  return p;
}

Matrix exact_phi(const Matrix& d, double rho) {
  require(rho > 0.0 && std::isfinite(rho), ErrorCode::SingularSystem, "rho must be positive");
  const Eigen::Index mm = d.rows();
  const Matrix a = Matrix::Identity(mm, mm) + (2.0 / rho) * d * d.transpose();
  Eigen::LLT<Matrix> llt(a);
  require(llt.info() == Eigen::Success, ErrorCode::SingularSystem, "Woodbury system is not positive definite");
  return llt.solve(Matrix::Identity(mm, mm));
}

// ---------------------------------------------------------------------------

namespace {

Matrix woodbury(const Matrix& d, double rho, const Matrix& phi, const Matrix& x) {
  const Matrix dx = d * x;
  Matrix y = x;
  y.noalias() -= (2.0 / rho) * (d.transpose() * (phi * dx));
  return y / rho;
}

void check_y_step_shapes(const Matrix& d, const Matrix& y_s_flat, const Matrix& v_plus_u) {
  require(y_s_flat.rows() == d.rows() && v_plus_u.rows() == d.cols() && y_s_flat.cols() == v_plus_u.cols(),
          ErrorCode::ShapeMismatch, "Y-step operand shapes do not agree with D");
}

}  // namespace

Matrix v_step(const UnfoldConfig& cfg, double rho, const Matrix& z, int width, int height,
              const DenoiserParams* denoiser, DenoiserTape* tape) {
  if (cfg.prox == ProxKind::SpectralTv) return prox_spectral_tv(z, cfg.tv_weight / rho, cfg.tv_solver);
  require(denoiser != nullptr, ErrorCode::InvalidArgument, "denoiser prox requires denoiser parameters");
  return denoiser_forward(z, width, height, *denoiser, tape);
}

Matrix y_step_closed_form(const Matrix& d, double rho, const Matrix& y_s_flat, const Matrix& v_plus_u) {
  check_y_step_shapes(d, y_s_flat, v_plus_u);
  const Matrix x = 2.0 * d.transpose() * y_s_flat + rho * v_plus_u;
  return woodbury(d, rho, exact_phi(d, rho), x);
}

Matrix y_step_learned(const Matrix& d, double rho, const Matrix& phi, const Matrix& y_s_flat,
                      const Matrix& v_plus_u) {
  check_y_step_shapes(d, y_s_flat, v_plus_u);
  require(phi.rows() == d.rows() && phi.cols() == d.rows(), ErrorCode::ShapeMismatch, "Phi must be M_m x M_m");
  const Matrix x = 2.0 * d.transpose() * y_s_flat + rho * v_plus_u;
  return woodbury(d, rho, phi, x);
}

Matrix dual_update(const Matrix& u, const Matrix& y_new, const Matrix& v_new) {
  require(u.rows() == y_new.rows() && u.cols() == y_new.cols() && u.rows() == v_new.rows() &&
              u.cols() == v_new.cols(),
          ErrorCode::ShapeMismatch, "dual update operands differ in shape");
  return u - y_new + v_new;
}

UnfoldState init_state(const MultiResCube& y_s, const SrtMatrix& d, const UnfoldConfig& cfg,
                       const std::vector<double>& wavelengths_h) {
  require(d.ms_bands() == y_s.cube.bands() && d.hs_bands() == static_cast<int>(wavelengths_h.size()),
          ErrorCode::DimensionMismatch, "SRT does not match the input and output band counts");
  UnfoldState s;
  s.y_h = spectral_upsample_init(y_s, wavelengths_h);
  s.u = with_data(s.y_h, Matrix::Zero(s.y_h.bands(), s.y_h.pixels()));
  s.d = d;
  s.rho = cfg.rho;
  s.phi_mode = cfg.phi_mode;
  s.phi = exact_phi(d.d, cfg.rho);
  return s;
}

Matrix unfold_forward(const Matrix& y_s_flat, const Matrix& y0, int width, int height, const UnfoldConfig& cfg,
                      const UnfoldParams& params, UnfoldTape* tape, UnfoldTrace* trace) {
  validate_unfold_config(cfg);
  require(y0.cols() == y_s_flat.cols() && y0.cols() == static_cast<Eigen::Index>(width) * height,
          ErrorCode::DimensionMismatch, "pixel counts differ between Y_S and the initial estimate");
  require(!params.d.empty() && params.d[0].rows() == y_s_flat.rows() && params.d[0].cols() == y0.rows(),
          ErrorCode::DimensionMismatch, "D does not match the band counts");
  if (cfg.prox == ProxKind::Denoiser) {
    require(static_cast<int>(params.denoisers.size()) == cfg.stages, ErrorCode::ShapeMismatch,
            "one denoiser per stage required");
  }
  const double rho = params.rho();
  const int n_d = static_cast<int>(params.d.size());
  std::vector<Matrix> data_term(static_cast<std::size_t>(n_d));
  std::vector<Matrix> phi(static_cast<std::size_t>(n_d));
  for (int i = 0; i < n_d; ++i) {
    data_term[static_cast<std::size_t>(i)] = 2.0 * params.d[static_cast<std::size_t>(i)].transpose() * y_s_flat;
    phi[static_cast<std::size_t>(i)] = params.phi_for(i, cfg.phi_mode);
  }
  const bool early_stop = cfg.tol > 0.0 && tape == nullptr;

  if (tape) tape->stages.assign(static_cast<std::size_t>(cfg.stages), {});
  if (trace) *trace = {};
  Matrix y = y0;
  Matrix u = Matrix::Zero(y0.rows(), y0.cols());
  Matrix v;
  for (int k = 0; k < cfg.stages; ++k) {
    UnfoldTape::Stage* st = tape ? &tape->stages[static_cast<std::size_t>(k)] : nullptr;
    const DenoiserParams* den =
        cfg.prox == ProxKind::Denoiser ? &params.denoisers[static_cast<std::size_t>(k)] : nullptr;
    v = v_step(cfg, rho, y - u, width, height, den, st ? &st->denoiser : nullptr);
    if (trace) trace->stages_run = k + 1;
    if (st) st->v = v;
    if (k + 1 == cfg.stages) break;

    const std::size_t di = n_d == 1 ? 0 : static_cast<std::size_t>(k);
    Matrix x = data_term[di] + rho * (v + u);
    y = woodbury(params.d[di], rho, phi[di], x);
    if (st) {
      st->u_prev = u;
      st->x = std::move(x);
    }
    u += v - y;
    const double residual = (y - v).norm() / std::max(v.norm(), 1e-300);
    if (trace) trace->residual.push_back(residual);
    if (early_stop && residual <= cfg.tol) break;
  }
  return v;
}

void unfold_backward(const Matrix& y_s_flat, int width, int height, const UnfoldConfig& cfg,
                     const UnfoldParams& params, const UnfoldTape& tape, const Matrix& g_out, UnfoldParams& grad) {
  const int n_stages = static_cast<int>(tape.stages.size());
  require(n_stages == cfg.stages, ErrorCode::ShapeMismatch, "tape does not match the configuration");
  const double rho = params.rho();
  const double s = 1.0 / rho;
  const int n_d = static_cast<int>(params.d.size());
  std::vector<Matrix> phi(static_cast<std::size_t>(n_d));
  std::vector<Matrix> g_phi(static_cast<std::size_t>(n_d));
  for (int i = 0; i < n_d; ++i) {
    phi[static_cast<std::size_t>(i)] = params.phi_for(i, cfg.phi_mode);
    g_phi[static_cast<std::size_t>(i)] = Matrix::Zero(phi[static_cast<std::size_t>(i)].rows(),
                                                      phi[static_cast<std::size_t>(i)].cols());
  }
  double g_rho = 0.0;
  double g_s = 0.0;

  // g_y / g_u: gradients w.r.t. Y^k and U^k, the outputs of the stage being
  // processed (unused for the last stage, which only emits V).
  Matrix g_y, g_u;
  for (int k = n_stages - 1; k >= 0; --k) {
    const auto& st = tape.stages[static_cast<std::size_t>(k)];
    Matrix g_v, g_u_prev;
    if (k + 1 == n_stages) {
      g_v = g_out;
      g_u_prev = Matrix::Zero(g_out.rows(), g_out.cols());
    } else {
      // U^k = U^{k-1} - Y^k + V^k
      g_v = g_u;
      g_u_prev = g_u;
      g_y -= g_u;
      // Y^k = s X - 2 s^2 B X with B = D^T Phi D
      const std::size_t di = n_d == 1 ? 0 : static_cast<std::size_t>(k);
      const Matrix& d = params.d[di];
      const Matrix b = d.transpose() * phi[di] * d;
      const Matrix& x = st.x;
      const Matrix bx = b * x;
      g_s += (g_y.cwiseProduct(x)).sum() - 4.0 * s * (g_y.cwiseProduct(bx)).sum();
      const Matrix g_b = -2.0 * s * s * g_y * x.transpose();
      Matrix g_x = s * g_y - 2.0 * s * s * (b * g_y);
      grad.d[di] += phi[di] * d * (g_b + g_b.transpose());
      g_phi[di] += d * g_b * d.transpose();
      // X^k = 2 D^T Y_S + rho (V^k + U^{k-1})
      grad.d[di] += 2.0 * y_s_flat * g_x.transpose();
      g_rho += (g_x.cwiseProduct(st.v + st.u_prev)).sum();
      g_v += rho * g_x;
      g_u_prev += rho * g_x;
    }
    // V^k = prox(Z^k), Z^k = Y^{k-1} - U^{k-1}
    Matrix g_z;
    if (cfg.prox == ProxKind::SpectralTv) {
      const double w = cfg.tv_weight / rho;
      const double g_w = prox_spectral_tv_backward(st.v, w, g_v, g_z);
      g_rho += g_w * (-cfg.tv_weight / (rho * rho));
    } else {
      g_z = denoiser_backward(params.denoisers[static_cast<std::size_t>(k)], st.denoiser, g_v, width, height,
                              grad.denoisers[static_cast<std::size_t>(k)]);
    }
    g_y = g_z;
    g_u = g_u_prev - g_z;
  }

  for (int i = 0; i < n_d; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (cfg.phi_mode == PhiMode::Learned) {
      grad.phi_raw[ui] += 0.5 * (g_phi[ui] + g_phi[ui].transpose());
    } else {
      // Phi = A^-1, A = I + 2 s D D^T
      const Matrix& d = params.d[ui];
      const Matrix g_a = -phi[ui] * g_phi[ui] * phi[ui];
      grad.d[ui] += 2.0 * s * (g_a + g_a.transpose()) * d;
      g_s += 2.0 * (g_a.cwiseProduct(d * d.transpose())).sum();
    }
  }
  g_rho += g_s * (-1.0 / (rho * rho));
  grad.log_rho(0, 0) += g_rho * rho;
}

HyperCube run_unfolding(const MultiResCube& y_s, const UnfoldConfig& cfg, const UnfoldParams& params,
                        const std::vector<double>& wavelengths_h, UnfoldTrace* trace) {
  check_multires(y_s);
  require(static_cast<int>(wavelengths_h.size()) == params.d[0].cols(), ErrorCode::DimensionMismatch,
          "output wavelength count does not match D");
  const HyperCube y0 = spectral_upsample_init(y_s, wavelengths_h);
  Matrix out = unfold_forward(y_s.cube.data, y0.data, y0.width, y0.height, cfg, params, nullptr, trace);
  return with_data(y0, std::move(out));
}

}  // namespace s2h
