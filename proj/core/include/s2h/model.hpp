#pragma once

#include <cstdint>

#include "s2h/fuse.hpp"
#include "s2h/unfold.hpp"

namespace s2h {

// End-to-end spectral super-resolution network: ADMM unfolding to Y~_H,
// then fusion with the input's own HR bands to Y_H*.
struct PipelineConfig {
  int bands_h = 32;
  int bands_m = 6;
  UnfoldConfig unfold;
  FusionConfig fusion;

  std::vector<double> wavelengths_h() const;

  // Unfold keys plus bands_h, bands_m, n_hr, res_blocks, spectral_attention,
  // spatial_attention.
  void to_config(KvConfig& cfg) const;
  static PipelineConfig from_config(const KvConfig& cfg);
  static std::vector<std::string> config_keys();
};

struct PipelineParams {
  UnfoldParams unfold;
  FusionParams fusion;

  void visit(const TensorVisitor& fn);
  void visit(const ConstTensorVisitor& fn) const;
};

PipelineParams init_pipeline(const PipelineConfig& cfg, const SrtMatrix* srt, std::uint64_t seed);
// Same structure, every tensor zero.
PipelineParams zeros_like(const PipelineParams& p);
std::size_t parameter_count(const PipelineParams& p);

struct PipelineTape {
  int width = 0;
  int height = 0;
  Matrix y_s_flat;
  Matrix y_s_hr;
  UnfoldTape unfold;
  FusionTape fusion;
};

struct PipelineOutput {
  HyperCube y_tilde;  // unfolding output
  HyperCube y_star;   // fused output
};

PipelineOutput pipeline_forward(const PipelineConfig& cfg, const PipelineParams& params, const MultiResCube& y_s,
                                PipelineTape* tape = nullptr);

// Accumulates into `grad` the parameter gradients of
// <g_tilde, Y~_H> + <g_star, Y_H*>.
void pipeline_backward(const PipelineConfig& cfg, const PipelineParams& params, const PipelineTape& tape,
                       const Matrix& g_tilde, const Matrix& g_star, PipelineParams& grad);

}  // namespace s2h
