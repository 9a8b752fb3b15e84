#include "s2h/model.hpp"

#include "s2h/simulate.hpp"

namespace s2h {

std::vector<double> PipelineConfig::wavelengths_h() const { return hyperspectral_wavelengths(bands_h); }

std::vector<std::string> PipelineConfig::config_keys() {
  std::vector<std::string> keys = UnfoldConfig::config_keys();
  for (const char* k : {"bands_h", "bands_m", "n_hr", "res_blocks", "spectral_attention", "spatial_attention"}) {
    keys.emplace_back(k);
  }
  return keys;
}

void PipelineConfig::to_config(KvConfig& cfg) const {
  unfold.to_config(cfg);
  cfg.set("bands_h", std::to_string(bands_h));
  cfg.set("bands_m", std::to_string(bands_m));
  cfg.set("n_hr", std::to_string(fusion.n_hr));
  cfg.set("res_blocks", std::to_string(fusion.res_blocks));
  cfg.set("spectral_attention", fusion.spectral_attention ? "true" : "false");
  cfg.set("spatial_attention", fusion.spatial_attention ? "true" : "false");
}

PipelineConfig PipelineConfig::from_config(const KvConfig& cfg) {
  PipelineConfig c;
  KvConfig unfold_part;
  for (const auto& key : UnfoldConfig::config_keys()) {
    if (cfg.has(key)) unfold_part.set(key, cfg.get(key));
  }
  c.unfold = UnfoldConfig::from_config(unfold_part);
  if (cfg.has("bands_h")) c.bands_h = static_cast<int>(cfg.get_int("bands_h"));
  if (cfg.has("bands_m")) c.bands_m = static_cast<int>(cfg.get_int("bands_m"));
  if (cfg.has("n_hr")) c.fusion.n_hr = static_cast<int>(cfg.get_int("n_hr"));
  if (cfg.has("res_blocks")) c.fusion.res_blocks = static_cast<int>(cfg.get_int("res_blocks"));
  if (cfg.has("spectral_attention")) c.fusion.spectral_attention = cfg.get_bool("spectral_attention");
  if (cfg.has("spatial_attention")) c.fusion.spatial_attention = cfg.get_bool("spatial_attention");
  require(c.bands_h >= 2 && c.bands_m >= 1 && c.bands_m < c.bands_h, ErrorCode::ConfigError,
          "need 1 <= bands_m < bands_h");
  require(c.fusion.n_hr >= 1 && c.fusion.n_hr <= c.bands_m && c.fusion.res_blocks >= 0, ErrorCode::ConfigError,
          "need 1 <= n_hr <= bands_m and res_blocks >= 0");
  return c;
}

void PipelineParams::visit(const TensorVisitor& fn) {
  unfold.visit(fn, "unfold");
  fusion.visit(fn, "fusion");
}

void PipelineParams::visit(const ConstTensorVisitor& fn) const {
  unfold.visit(fn, "unfold");
  fusion.visit(fn, "fusion");
}

PipelineParams init_pipeline(const PipelineConfig& cfg, const SrtMatrix* srt, std::uint64_t seed) {
  PipelineParams p;
  p.unfold = init_unfold_params(cfg.unfold, cfg.bands_m, cfg.bands_h, srt, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  p.fusion = FusionParams::random(cfg.bands_h, cfg.fusion.n_hr, cfg.fusion.res_blocks, rng);
  return p;
}

PipelineParams zeros_like(const PipelineParams& p) {
  PipelineParams z = p;
  z.visit([](const std::string&, Matrix& t) { t.setZero(); });
  return z;
}

std::size_t parameter_count(const PipelineParams& p) {
  std::size_t n = 0;
  p.visit([&](const std::string&, const Matrix& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

PipelineOutput pipeline_forward(const PipelineConfig& cfg, const PipelineParams& params, const MultiResCube& y_s,
                                PipelineTape* tape) {
  check_multires(y_s);
  require(y_s.cube.bands() == cfg.bands_m, ErrorCode::ShapeMismatch,
          "model expects " + std::to_string(cfg.bands_m) + " multispectral bands, input has " +
              std::to_string(y_s.cube.bands()));
  const HyperCube y0 = spectral_upsample_init(y_s, cfg.wavelengths_h());
  const HyperCube hr = select_hr_bands(y_s, cfg.fusion.n_hr);
  const int w = y_s.cube.width;
  const int h = y_s.cube.height;

  PipelineOutput out;
  Matrix y_tilde = unfold_forward(y_s.cube.data, y0.data, w, h, cfg.unfold, params.unfold,
                                  tape ? &tape->unfold : nullptr, nullptr);
  Matrix y_star = fuse_forward(y_tilde, hr.data, w, h, params.fusion, cfg.fusion, tape ? &tape->fusion : nullptr);
  out.y_tilde = with_data(y0, std::move(y_tilde));
  out.y_star = with_data(y0, std::move(y_star));
  if (tape) {
    tape->width = w;
    tape->height = h;
    tape->y_s_flat = y_s.cube.data;
    tape->y_s_hr = hr.data;
  }
  return out;
}

void pipeline_backward(const PipelineConfig& cfg, const PipelineParams& params, const PipelineTape& tape,
                       const Matrix& g_tilde, const Matrix& g_star, PipelineParams& grad) {
  const Matrix g_from_fusion =
      fuse_backward(params.fusion, cfg.fusion, tape.fusion, g_star, tape.width, tape.height, grad.fusion);
  unfold_backward(tape.y_s_flat, tape.width, tape.height, cfg.unfold, params.unfold, tape.unfold,
                  g_tilde + g_from_fusion, grad.unfold);
}

}  // namespace s2h
