#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "s2h/cube.hpp"
#include "s2h/kv_config.hpp"
#include "s2h/nn.hpp"
#include "s2h/prox.hpp"

namespace s2h {

// Which parts of the ADMM iteration are learned.
//   mathematical: spectral-TV prox, exact Woodbury Y-step, fixed D and rho
//   hybrid:       spectral-TV prox, learned Y-step (D, rho, Phi)
//   learnable:    denoiser prox, learned Y-step
enum class Strategy { Mathematical, Hybrid, Learnable };
enum class ProxKind { SpectralTv, Denoiser };
// Exact: Phi = (I + (2/rho) D D^T)^-1 recomputed from (D, rho).
// Learned: Phi = (P + P^T) / 2 for a free parameter P.
enum class PhiMode { Exact, Learned };

std::string_view to_string(Strategy s) noexcept;
std::string_view to_string(ProxKind p) noexcept;
std::string_view to_string(PhiMode p) noexcept;
Strategy parse_strategy(std::string_view s);
ProxKind parse_prox_kind(std::string_view s);
PhiMode parse_phi_mode(std::string_view s);

struct UnfoldConfig {
  int stages = 4;
  Strategy strategy = Strategy::Learnable;
  double rho = 1.0;  // initial penalty
  bool learn_rho = true;
  bool share_d = true;
  ProxKind prox = ProxKind::Denoiser;
  PhiMode phi_mode = PhiMode::Learned;
  // REG = tv_weight * tv_spec, so the V-step weight is tv_weight / rho.
  double tv_weight = 0.05;
  TvSolver tv_solver = TvSolver::TautString;
  // Stop once ||Y - V||_F / ||V||_F falls to this value (0 disables).
  double tol = 0.0;
  int denoiser_blocks = 2;
  int denoiser_convs = 2;

  // Defaults of each strategy: mathematical runs 20 stages with a 1e-6
  // residual stop, the learned strategies 4 stages.
  static UnfoldConfig for_strategy(Strategy s);

  // Keys: strategy, stages, rho, learn_rho, share_d, prox, phi_mode,
  // tv_weight, tv_solver, tol, denoiser_blocks, denoiser_convs. Missing keys
  // keep the strategy defaults.
  void to_config(KvConfig& cfg) const;
  static UnfoldConfig from_config(const KvConfig& cfg);
  static const std::vector<std::string>& config_keys();
};

void validate_unfold_config(const UnfoldConfig& cfg);

// Learnable (or fixed) parameters of the unfolding.
struct UnfoldParams {
  std::vector<Matrix> d;         // one shared D, or one per Y-step
  Matrix log_rho;                // 1x1, rho = exp(log_rho)
  std::vector<Matrix> phi_raw;   // learned mode only, parallel to d
  std::vector<DenoiserParams> denoisers;  // denoiser prox only, one per stage

  double rho() const { return std::exp(log_rho(0, 0)); }
  // D and Phi used by the Y-step of stage k (0-based).
  const Matrix& d_for(int stage) const;
  Matrix phi_for(int stage, PhiMode mode) const;

  void visit(const TensorVisitor& fn, const std::string& prefix);
  void visit(const ConstTensorVisitor& fn, const std::string& prefix) const;
};

// `srt` may be null, in which case D is drawn from a zero-mean normal with
// Xavier variance 2 / (M_m + M). Learned Phi starts at its exact value.
UnfoldParams init_unfold_params(const UnfoldConfig& cfg, int bands_m, int bands_h, const SrtMatrix* srt,
                                std::uint64_t seed);

// (I + (2/rho) D D^T)^-1
Matrix exact_phi(const Matrix& d, double rho);

// ---------------------------------------------------------------------------
// Single-step kernels on bands x pixels matrices.

// V = prox_{(1/rho) REG}(z)
Matrix v_step(const UnfoldConfig& cfg, double rho, const Matrix& z, int width, int height,
              const DenoiserParams* denoiser, DenoiserTape* tape = nullptr);

// X = 2 D^T Y_S + rho (V + U); Y = (1/rho)(X - (2/rho) D^T Phi D X)
Matrix y_step_closed_form(const Matrix& d, double rho, const Matrix& y_s_flat, const Matrix& v_plus_u);
Matrix y_step_learned(const Matrix& d, double rho, const Matrix& phi, const Matrix& y_s_flat,
                      const Matrix& v_plus_u);

// U - Y + V
Matrix dual_update(const Matrix& u, const Matrix& y_new, const Matrix& v_new);

// ---------------------------------------------------------------------------
// Whole solver

struct UnfoldState {
  HyperCube y_h;
  HyperCube v;
  HyperCube u;
  SrtMatrix d;
  double rho = 1.0;
  PhiMode phi_mode = PhiMode::Exact;
  Matrix phi;
};

// U = 0, Y_H = spectral upsample of the input, V empty.
UnfoldState init_state(const MultiResCube& y_s, const SrtMatrix& d, const UnfoldConfig& cfg,
                       const std::vector<double>& wavelengths_h);

struct UnfoldTrace {
  std::vector<double> residual;  // ||Y^k - V^k||_F / ||V^k||_F per completed Y-step
  int stages_run = 0;
};

struct UnfoldTape {
  struct Stage {
    Matrix u_prev;
    Matrix v;
    Matrix x;  // empty for the final stage
    DenoiserTape denoiser;
  };
  std::vector<Stage> stages;
};

// Runs the stages from Y_H^0 = y0, U^0 = 0 and returns V of the last stage.
Matrix unfold_forward(const Matrix& y_s_flat, const Matrix& y0, int width, int height, const UnfoldConfig& cfg,
                      const UnfoldParams& params, UnfoldTape* tape = nullptr, UnfoldTrace* trace = nullptr);

// Accumulates parameter gradients of <g_out, output> into `grad`.
void unfold_backward(const Matrix& y_s_flat, int width, int height, const UnfoldConfig& cfg,
                     const UnfoldParams& params, const UnfoldTape& tape, const Matrix& g_out, UnfoldParams& grad);

HyperCube run_unfolding(const MultiResCube& y_s, const UnfoldConfig& cfg, const UnfoldParams& params,
                        const std::vector<double>& wavelengths_h, UnfoldTrace* trace = nullptr);

}  // namespace s2h
