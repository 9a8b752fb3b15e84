#include "s2h/fuse.hpp"

namespace s2h {

FusionParams FusionParams::zeros(int bands, int n_hr, int res_blocks) {
  require(bands >= 1 && n_hr >= 1 && res_blocks >= 0, ErrorCode::InvalidArgument, "bad fusion shape");
  const int width = bands + n_hr;
  FusionParams p;
  p.fc_weight = Matrix::Zero(bands, bands);
  p.fc_bias = Matrix::Zero(bands, 1);
  p.conv_spat = Conv2d::zeros(1, 1, 5);
  p.entry = Conv2d::zeros(width, width, 3);
  p.res_blocks.assign(static_cast<std::size_t>(res_blocks), {});
  for (auto& block : p.res_blocks) {
    block.push_back(Conv2d::zeros(width, width, 3));
    block.push_back(Conv2d::zeros(width, width, 3));
  }
  p.proj = Conv2d::zeros(width, bands, 3);
  return p;
}

FusionParams FusionParams::random(int bands, int n_hr, int res_blocks, std::mt19937_64& rng) {
  FusionParams p = zeros(bands, n_hr, res_blocks);
  const int width = bands + n_hr;
  p.entry = Conv2d::he_normal(width, width, 3, 1.0, rng);
  for (auto& block : p.res_blocks) {
    block[0] = Conv2d::he_normal(width, width, 3, 1.0, rng);
    block[1] = Conv2d::he_normal(width, width, 3, 0.1, rng);
  }
  p.proj = Conv2d::he_normal(width, bands, 3, 0.1, rng);
  return p;
}

void FusionParams::visit(const TensorVisitor& fn, const std::string& prefix) {
  fn(prefix + ".fc_spec.weight", fc_weight);
  fn(prefix + ".fc_spec.bias", fc_bias);
  conv_spat.visit(fn, prefix + ".conv_spat");
  entry.visit(fn, prefix + ".entry");
  for (std::size_t b = 0; b < res_blocks.size(); ++b) {
    for (std::size_t c = 0; c < res_blocks[b].size(); ++c) {
      res_blocks[b][c].visit(fn, prefix + ".res" + std::to_string(b) + ".conv" + std::to_string(c));
    }
  }
  proj.visit(fn, prefix + ".proj");
}

void FusionParams::visit(const ConstTensorVisitor& fn, const std::string& prefix) const {
  fn(prefix + ".fc_spec.weight", fc_weight);
  fn(prefix + ".fc_spec.bias", fc_bias);
  conv_spat.visit(fn, prefix + ".conv_spat");
  entry.visit(fn, prefix + ".entry");
  for (std::size_t b = 0; b < res_blocks.size(); ++b) {
    for (std::size_t c = 0; c < res_blocks[b].size(); ++c) {
      res_blocks[b][c].visit(fn, prefix + ".res" + std::to_string(b) + ".conv" + std::to_string(c));
    }
  }
  proj.visit(fn, prefix + ".proj");
}

HyperCube select_hr_bands(const MultiResCube& y_s, int n_hr) {
  std::vector<int> idx;
  for (std::size_t b = 0; b < y_s.res_class.size(); ++b) {
    if (y_s.res_class[b] == ResClass::HR) idx.push_back(static_cast<int>(b));
  }
  require(static_cast<int>(idx.size()) == n_hr, ErrorCode::MissingHrBands,
          "expected " + std::to_string(n_hr) + " HR bands, found " + std::to_string(idx.size()));
  HyperCube out(n_hr, y_s.cube.width, y_s.cube.height);
  for (int i = 0; i < n_hr; ++i) {
    out.data.row(i) = y_s.cube.data.row(idx[static_cast<std::size_t>(i)]);
    out.wavelengths[static_cast<std::size_t>(i)] = y_s.cube.wavelengths[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

Matrix downsample_avg4(const Matrix& y, int width, int height) {
  require(width % 2 == 0 && height % 2 == 0, ErrorCode::OddDimensions,
          "2x2 pooling needs even width and height, got " + std::to_string(width) + "x" + std::to_string(height));
  require(y.cols() == static_cast<Eigen::Index>(width) * height, ErrorCode::DimensionMismatch,
          "pixel count does not match the grid");
  const int w2 = width / 2;
  const int h2 = height / 2;
  Matrix out(y.rows(), static_cast<Eigen::Index>(w2) * h2);
  for (int r = 0; r < h2; ++r) {
    for (int c = 0; c < w2; ++c) {
      const Eigen::Index p = static_cast<Eigen::Index>(2 * r) * width + 2 * c;
      out.col(static_cast<Eigen::Index>(r) * w2 + c) =
          0.25 * (y.col(p) + y.col(p + 1) + y.col(p + width) + y.col(p + width + 1));
    }
  }
  return out;
}

HyperCube downsample_avg4(const HyperCube& y) {
  HyperCube out;
  out.data = downsample_avg4(y.data, y.width, y.height);
  out.width = y.width / 2;
  out.height = y.height / 2;
  out.wavelengths = y.wavelengths;
  return out;
}

Matrix upsample_kron4(const Matrix& y_down, int width, int height) {
  require(y_down.cols() == static_cast<Eigen::Index>(width) * height, ErrorCode::DimensionMismatch,
          "pixel count does not match the grid");
  const int w2 = 2 * width;
  Matrix out(y_down.rows(), static_cast<Eigen::Index>(w2) * 2 * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const auto src = y_down.col(static_cast<Eigen::Index>(r) * width + c);
      const Eigen::Index p = static_cast<Eigen::Index>(2 * r) * w2 + 2 * c;
      out.col(p) = src;
      out.col(p + 1) = src;
      out.col(p + w2) = src;
      out.col(p + w2 + 1) = src;
    }
  }
  return out;
}

HyperCube upsample_kron4(const HyperCube& y_down) {
  HyperCube out;
  out.data = upsample_kron4(y_down.data, y_down.width, y_down.height);
  out.width = 2 * y_down.width;
  out.height = 2 * y_down.height;
  out.wavelengths = y_down.wavelengths;
  return out;
}

namespace {

Vector sigmoid(const Vector& x) { return x.unaryExpr([](double v) { return s2h::sigmoid(v); }); }

Vector spectral_attention(const Matrix& y_down, const FusionParams& p, Vector* v_spec) {
  require(p.fc_weight.rows() == y_down.rows() && p.fc_weight.cols() == y_down.rows(), ErrorCode::ShapeMismatch,
          "spectral FC layer does not match the band count");
  const Vector v = y_down.rowwise().mean();
  if (v_spec) *v_spec = v;
  return sigmoid(p.fc_weight * v + p.fc_bias.col(0));
}

Vector spatial_attention(const Matrix& y_s_hr, int width, int height, const FusionParams& p, Matrix* v_spat) {
  require(y_s_hr.rows() == p.hr_bands(), ErrorCode::ShapeMismatch,
          "spatial attention expects " + std::to_string(p.hr_bands()) + " HR bands, got " +
              std::to_string(y_s_hr.rows()));
  Matrix v = y_s_hr.colwise().mean();
  const Matrix a = conv2d_forward(p.conv_spat, v, width, height);
  if (v_spat) *v_spat = std::move(v);
  return sigmoid(a.row(0).transpose());
}

}  // namespace

Vector spectral_attention(const HyperCube& y_down, const FusionParams& p) {
  return spectral_attention(y_down.data, p, nullptr);
}

Vector spatial_attention(const HyperCube& y_s_hr, const FusionParams& p) {
  return spatial_attention(y_s_hr.data, y_s_hr.width, y_s_hr.height, p, nullptr);
}

HyperCube emphasize(const Vector& w_spec, const HyperCube& y_up, const Vector& w_spat) {
  require(w_spec.size() == y_up.bands() && w_spat.size() == y_up.pixels(), ErrorCode::ShapeMismatch,
          "attention vectors do not match the cube");
  return with_data(y_up, w_spec.asDiagonal() * y_up.data * w_spat.asDiagonal());
}

Matrix fuse_forward(const Matrix& y_tilde, const Matrix& y_s_hr, int width, int height, const FusionParams& p,
                    const FusionConfig& cfg, FusionTape* tape) {
  require(y_tilde.rows() == p.bands(), ErrorCode::ShapeMismatch,
          "fusion expects " + std::to_string(p.bands()) + " bands, got " + std::to_string(y_tilde.rows()));
  require(y_s_hr.cols() == y_tilde.cols(), ErrorCode::ShapeMismatch, "HR bands and Y~_H differ in pixel count");
  const int bands = p.bands();
  const int n_hr = p.hr_bands();
  FusionTape local;
  FusionTape& t = tape ? *tape : local;

  t.y_down = downsample_avg4(y_tilde, width, height);
  t.w_spec = spectral_attention(t.y_down, p, &t.v_spec);
  if (!cfg.spectral_attention) t.w_spec.setConstant(t.w_spec.mean());
  t.w_spat = spatial_attention(y_s_hr, width, height, p, &t.v_spat);
  if (!cfg.spatial_attention) t.w_spat.setConstant(t.w_spat.mean());
  t.y_up = upsample_kron4(t.y_down, width / 2, height / 2);

  t.cat.resize(bands + n_hr, y_tilde.cols());
  t.cat.topRows(bands) = t.w_spec.asDiagonal() * t.y_up * t.w_spat.asDiagonal();
  t.cat.bottomRows(n_hr) = y_s_hr;

  t.entry_pre = conv2d_forward(p.entry, t.cat, width, height);
  Matrix z = relu(t.entry_pre);
  t.block_in.clear();
  t.block_pre.clear();
  t.block_mid.clear();
  for (const auto& block : p.res_blocks) {
    Matrix pre = conv2d_forward(block[0], z, width, height);
    Matrix mid = relu(pre);
    Matrix delta = conv2d_forward(block[1], mid, width, height);
    if (tape) {
      t.block_in.push_back(z);
      t.block_pre.push_back(std::move(pre));
      t.block_mid.push_back(std::move(mid));
    }
    z += delta;
  }
  Matrix out = t.y_up + conv2d_forward(p.proj, z, width, height);
  if (tape) t.z = std::move(z);
  return out;
}

HyperCube fuse_forward(const HyperCube& y_tilde, const HyperCube& y_s_hr, const FusionParams& p,
                       const FusionConfig& cfg) {
  require(y_tilde.width == y_s_hr.width && y_tilde.height == y_s_hr.height, ErrorCode::ShapeMismatch,
          "Y~_H and the HR bands live on different grids");
  return with_data(y_tilde, fuse_forward(y_tilde.data, y_s_hr.data, y_tilde.width, y_tilde.height, p, cfg));
}

Matrix fuse_backward(const FusionParams& p, const FusionConfig& cfg, const FusionTape& t, const Matrix& g_out,
                     int width, int height, FusionParams& grad) {
  const int bands = p.bands();
  Matrix g_up = g_out;

  Matrix g_z;
  conv2d_backward(p.proj, t.z, g_out, width, height, grad.proj, &g_z);
  for (std::size_t b = p.res_blocks.size(); b-- > 0;) {
    Matrix g_mid;
    conv2d_backward(p.res_blocks[b][1], t.block_mid[b], g_z, width, height, grad.res_blocks[b][1], &g_mid);
    const Matrix g_pre = relu_backward(t.block_pre[b], g_mid);
    Matrix g_in;
    conv2d_backward(p.res_blocks[b][0], t.block_in[b], g_pre, width, height, grad.res_blocks[b][0], &g_in);
    g_z += g_in;
  }
  const Matrix g_entry = relu_backward(t.entry_pre, g_z);
  Matrix g_cat;
  conv2d_backward(p.entry, t.cat, g_entry, width, height, grad.entry, &g_cat);
  const auto g_e = g_cat.topRows(bands);

  // E = Diag(w_spec) Y_up Diag(w_spat)
  g_up += t.w_spec.asDiagonal() * g_e * t.w_spat.asDiagonal();
  const Matrix g_e_up = g_e.cwiseProduct(t.y_up);
  Vector g_ws = g_e_up * t.w_spat;
  Vector g_wp = (t.w_spec.transpose() * g_e_up).transpose();
  if (!cfg.spectral_attention) g_ws.setConstant(g_ws.sum() / static_cast<double>(g_ws.size()));
  if (!cfg.spatial_attention) g_wp.setConstant(g_wp.sum() / static_cast<double>(g_wp.size()));

  // The ablated weights are means of sigmoid outputs; recompute the raw
  // sigmoid values when needed.
  const Vector ws_raw = cfg.spectral_attention
                            ? t.w_spec
                            : sigmoid(p.fc_weight * t.v_spec + p.fc_bias.col(0));
  const Vector wp_raw = cfg.spatial_attention
                            ? t.w_spat
                            : sigmoid(Vector(conv2d_forward(p.conv_spat, t.v_spat, width, height).row(0).transpose()));

  const Vector g_u = g_ws.cwiseProduct(ws_raw.cwiseProduct((1.0 - ws_raw.array()).matrix()));
  grad.fc_weight += g_u * t.v_spec.transpose();
  grad.fc_bias.col(0) += g_u;
  const Vector g_v = p.fc_weight.transpose() * g_u;

  const Matrix g_a = g_wp.cwiseProduct(wp_raw.cwiseProduct((1.0 - wp_raw.array()).matrix())).transpose();
  conv2d_backward(p.conv_spat, t.v_spat, g_a, width, height, grad.conv_spat, nullptr);

  // v_spec is the column mean of y_down; y_up replicates y_down.
  Matrix g_down = 4.0 * downsample_avg4(g_up, width, height);
  g_down.colwise() += g_v / static_cast<double>(t.y_down.cols());
  return 0.25 * upsample_kron4(g_down, width / 2, height / 2);
}

}  // namespace s2h
