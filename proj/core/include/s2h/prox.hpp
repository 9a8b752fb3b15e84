#pragma once

#include <random>
#include <vector>

#include "s2h/cube.hpp"
#include "s2h/nn.hpp"

namespace s2h {

// Weight of a proximal step: prox_w(z) = argmin_v w * f(v) + 1/2 ||v - z||^2.
struct TvWeight {
  double w = 0.0;

  explicit TvWeight(double value) : w(value) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::InvalidArgument, "TV weight must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Total-variation functionals. Both are normalised by the number of
// difference terms, so they are scale-free with respect to cube size.

// (1 / (L (M-1))) sum_l sum_m |Y(m+1, l) - Y(m, l)|
double tv_spec(const HyperCube& y);
double tv_spec(const Matrix& y);
// Subgradient of tv_spec with sign(0) = 0.
Matrix tv_spec_grad(const Matrix& y);

// Mean absolute horizontal and vertical forward difference over all bands.
double tv_spat(const HyperCube& y);
double tv_spat(const Matrix& y, int width, int height);
Matrix tv_spat_grad(const Matrix& y, int width, int height);

// ---------------------------------------------------------------------------
// 1-D TV proximal operators: argmin_v w * sum |v[i+1] - v[i]| + 1/2 ||v - z||^2

// Exact direct solver (taut string, computed with Condat's linear-time
// scheme). Runs of the output share one bit-identical value.
Vector prox_tv1d_taut_string(const Vector& z, TvWeight w);
void prox_tv1d_taut_string(const double* z, double* out, int n, double w);

struct SplitBregmanOptions {
  int iters = 5000;
  double mu = 1.0;
  double tol = 1e-10;  // early stop on the max-norm change between iterates
};

struct SplitBregmanResult {
  Vector v;
  int iterations = 0;
  bool converged = false;  // false means NonConvergence at the iteration cap
};

// Iterative split-Bregman solver; the taut-string solver is its oracle.
SplitBregmanResult prox_tv1d_split_bregman(const Vector& z, TvWeight w, const SplitBregmanOptions& opt = {});

enum class TvSolver { TautString, SplitBregman };

// Prox of w * tv_spec: the 1-D prox of every pixel spectrum with per-column
// weight w / (L (M - 1)).
HyperCube prox_spectral_tv(const HyperCube& z, TvWeight w, TvSolver solver = TvSolver::TautString);
Matrix prox_spectral_tv(const Matrix& z, double w, TvSolver solver = TvSolver::TautString);

// Vector-Jacobian product of the spectral TV prox, given its output `v`.
// Inside every run of equal values the output is the run mean of z shifted by
// a term proportional to w, so the input gradient is the run-averaged output
// gradient. Returns d<g_v, v>/dw for the weight passed to prox_spectral_tv.
double prox_spectral_tv_backward(const Matrix& v, double w, const Matrix& g_v, Matrix& g_z);

// ---------------------------------------------------------------------------
// Residual-in-residual denoiser used as a learnable proximal map.
//
// blocks[b] holds `convs_per_block` 3x3 convolutions of width M. With h0 = z,
// h_{b+1} = h_b + G_b(h_b) where G_b is conv -> ReLU -> ... -> conv, and the
// output is z + sum_b G_b(h_b) = h_B.
struct DenoiserParams {
  std::vector<std::vector<Conv2d>> blocks;

  static DenoiserParams zeros(int bands, int n_blocks = 2, int convs_per_block = 2);
  // He-normal first layers; the last conv of each block is scaled by
  // `last_gain` so the block starts close to the identity.
  static DenoiserParams random(int bands, std::mt19937_64& rng, int n_blocks = 2, int convs_per_block = 2,
                               double last_gain = 0.1);

  int bands() const;
  void visit(const TensorVisitor& fn, const std::string& prefix);
  void visit(const ConstTensorVisitor& fn, const std::string& prefix) const;
};

struct DenoiserTape {
  // per block: inputs to each conv, in order; pre-activations of all but the
  // last conv
  std::vector<std::vector<Matrix>> conv_inputs;
  std::vector<std::vector<Matrix>> pre_acts;
};

HyperCube denoiser_rir_forward(const HyperCube& z, const DenoiserParams& p);
Matrix denoiser_forward(const Matrix& z, int width, int height, const DenoiserParams& p,
                        DenoiserTape* tape = nullptr);
// Accumulates parameter gradients into `grad`; returns the input gradient.
Matrix denoiser_backward(const DenoiserParams& p, const DenoiserTape& tape, const Matrix& g_out, int width,
                         int height, DenoiserParams& grad);

}  // namespace s2h
