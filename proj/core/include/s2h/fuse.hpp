#pragma once

#include <random>
#include <vector>

#include "s2h/cube.hpp"
#include "s2h/nn.hpp"

namespace s2h {

struct FusionConfig {
  int n_hr = 4;        // high-resolution bands concatenated into the fusion input
  int res_blocks = 2;  // residual refinement blocks
  // When an attention branch is disabled its weights are replaced by their
  // global mean, so the branch still carries a learnable overall gain but no
  // per-band (per-pixel) selectivity.
  bool spectral_attention = true;
  bool spatial_attention = true;
};

struct FusionParams {
  Matrix fc_weight;  // M x M
  Matrix fc_bias;    // M x 1
  Conv2d conv_spat;  // 1 -> 1, 5x5
  Conv2d entry;      // (M + n_hr) -> (M + n_hr), 3x3, followed by ReLU
  std::vector<std::vector<Conv2d>> res_blocks;  // two 3x3 convs of width M + n_hr each
  Conv2d proj;       // (M + n_hr) -> M, 3x3

  static FusionParams zeros(int bands, int n_hr, int res_blocks);
  // Attention starts neutral (all zero, weights 0.5); convolutions are
  // He-normal with the second conv of each block and the projection scaled
  // down so the residual starts small.
  static FusionParams random(int bands, int n_hr, int res_blocks, std::mt19937_64& rng);

  int bands() const { return static_cast<int>(fc_weight.rows()); }
  int hr_bands() const { return entry.in_ch - bands(); }

  void visit(const TensorVisitor& fn, const std::string& prefix);
  void visit(const ConstTensorVisitor& fn, const std::string& prefix) const;
};

// HR-tagged bands in band order. Throws MissingHrBands unless exactly `n_hr`
// are present.
HyperCube select_hr_bands(const MultiResCube& y_s, int n_hr);

// 2x2 mean pooling; width and height must be even.
HyperCube downsample_avg4(const HyperCube& y);
Matrix downsample_avg4(const Matrix& y, int width, int height);
// Replicates every pixel into its 2x2 block (width, height of the input).
HyperCube upsample_kron4(const HyperCube& y_down);
Matrix upsample_kron4(const Matrix& y_down, int width, int height);

// sigmoid(W mean_cols(y_down) + b)
Vector spectral_attention(const HyperCube& y_down, const FusionParams& p);
// sigmoid(conv5x5(band mean of the HR bands) + bias), one weight per pixel.
Vector spatial_attention(const HyperCube& y_s_hr, const FusionParams& p);
// out[m, l] = w_spec[m] * y_up[m, l] * w_spat[l]
HyperCube emphasize(const Vector& w_spec, const HyperCube& y_up, const Vector& w_spat);

struct FusionTape {
  Matrix y_down;
  Vector v_spec;
  Vector w_spec;  // after ablation averaging
  Vector w_spat;
  Matrix v_spat;  // 1 x L
  Matrix y_up;
  Matrix cat;
  Matrix entry_pre;
  std::vector<Matrix> block_in;
  std::vector<Matrix> block_pre;
  std::vector<Matrix> block_mid;
  Matrix z;
};

// Y_H* = up(down(Y~_H)) + Y_res, with Y~_S the HR bands on the same grid.
Matrix fuse_forward(const Matrix& y_tilde, const Matrix& y_s_hr, int width, int height, const FusionParams& p,
                    const FusionConfig& cfg, FusionTape* tape = nullptr);
HyperCube fuse_forward(const HyperCube& y_tilde, const HyperCube& y_s_hr, const FusionParams& p,
                       const FusionConfig& cfg);

// Accumulates parameter gradients into `grad`; returns the gradient w.r.t.
// Y~_H.
Matrix fuse_backward(const FusionParams& p, const FusionConfig& cfg, const FusionTape& tape, const Matrix& g_out,
                     int width, int height, FusionParams& grad);

}  // namespace s2h
