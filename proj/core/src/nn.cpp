#include "s2h/nn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace s2h {

Conv2d Conv2d::zeros(int in, int out, int k) {
  require(in > 0 && out > 0 && k > 0 && k % 2 == 1, ErrorCode::InvalidArgument, "bad convolution shape");
  Conv2d c;
  c.in_ch = in;
  c.out_ch = out;
  c.ksize = k;
  c.weight = Matrix::Zero(out, static_cast<Eigen::Index>(k) * k * in);
  c.bias = Matrix::Zero(out, 1);
  return c;
}

Conv2d Conv2d::he_normal(int in, int out, int k, double gain, std::mt19937_64& rng) {
  Conv2d c = zeros(in, out, k);
  std::normal_distribution<double> nd(0.0, gain * std::sqrt(2.0 / (static_cast<double>(k) * k * in)));
  for (Eigen::Index j = 0; j < c.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < c.weight.rows(); ++i) c.weight(i, j) = nd(rng);
  }
  return c;
}

void Conv2d::visit(const TensorVisitor& fn, const std::string& prefix) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

void Conv2d::visit(const ConstTensorVisitor& fn, const std::string& prefix) const {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

namespace {

// Pixel tile so that one im2col buffer stays around 16 MiB.
Eigen::Index tile_size(const Conv2d& conv, Eigen::Index pixels) {
  const Eigen::Index rows = static_cast<Eigen::Index>(conv.ksize) * conv.ksize * conv.in_ch;
  return std::clamp<Eigen::Index>((Eigen::Index{1} << 21) / std::max<Eigen::Index>(rows, 1), 256, pixels);
}

// Source pixel for every (tap, pixel) pair of a tile.
void gather_indices(int ksize, int width, int height, Eigen::Index p0, Eigen::Index count,
                    std::vector<Eigen::Index>& src) {
  const int rad = ksize / 2;
  const int taps = ksize * ksize;
  src.resize(static_cast<std::size_t>(taps * count));
  for (Eigen::Index t = 0; t < count; ++t) {
    const int p = static_cast<int>(p0 + t);
    const int r = p / width;
    const int c = p % width;
    for (int dy = 0; dy < ksize; ++dy) {
      const Eigen::Index sr = reflect_index(r + dy - rad, height);
      for (int dx = 0; dx < ksize; ++dx) {
        const Eigen::Index sc = reflect_index(c + dx - rad, width);
        src[static_cast<std::size_t>(t * taps + dy * ksize + dx)] = sr * width + sc;
      }
    }
  }
}

void im2col(const Matrix& x, int taps, const std::vector<Eigen::Index>& src, Eigen::Index count, Matrix& cols) {
  const Eigen::Index in = x.rows();
  cols.resize(taps * in, count);
  for (Eigen::Index t = 0; t < count; ++t) {
    for (int k = 0; k < taps; ++k) {
      cols.block(k * in, t, in, 1) = x.col(src[static_cast<std::size_t>(t * taps + k)]);
    }
  }
}

void check_conv_input(const Conv2d& conv, const Matrix& x, int width, int height) {
  require(x.rows() == conv.in_ch, ErrorCode::ShapeMismatch,
          "convolution expects " + std::to_string(conv.in_ch) + " channels, got " + std::to_string(x.rows()));
  require(x.cols() == static_cast<Eigen::Index>(width) * height && width > 0 && height > 0,
          ErrorCode::ShapeMismatch, "feature map size does not match the grid");
}

}  // namespace

Matrix conv2d_forward(const Conv2d& conv, const Matrix& x, int width, int height) {
  check_conv_input(conv, x, width, height);
  const Eigen::Index pixels = x.cols();
  const int taps = conv.ksize * conv.ksize;
  Matrix out(conv.out_ch, pixels);
  const Eigen::Index tile = tile_size(conv, pixels);
  std::vector<Eigen::Index> src;
  Matrix cols;
  for (Eigen::Index p0 = 0; p0 < pixels; p0 += tile) {
    const Eigen::Index count = std::min(tile, pixels - p0);
    gather_indices(conv.ksize, width, height, p0, count, src);
    im2col(x, taps, src, count, cols);
    out.middleCols(p0, count).noalias() = conv.weight * cols;
  }
  out.colwise() += conv.bias.col(0);
  return out;
}

void conv2d_backward(const Conv2d& conv, const Matrix& x, const Matrix& g_out, int width, int height,
                     Conv2d& grad, Matrix* g_x) {
  check_conv_input(conv, x, width, height);
  require(g_out.rows() == conv.out_ch && g_out.cols() == x.cols(), ErrorCode::ShapeMismatch,
          "output gradient shape mismatch");
  const Eigen::Index pixels = x.cols();
  const Eigen::Index in = conv.in_ch;
  const int taps = conv.ksize * conv.ksize;
  grad.bias.col(0) += g_out.rowwise().sum();
  if (g_x) g_x->setZero(in, pixels);
  const Eigen::Index tile = tile_size(conv, pixels);
  std::vector<Eigen::Index> src;
  Matrix cols;
  Matrix g_cols;
  for (Eigen::Index p0 = 0; p0 < pixels; p0 += tile) {
    const Eigen::Index count = std::min(tile, pixels - p0);
    gather_indices(conv.ksize, width, height, p0, count, src);
    im2col(x, taps, src, count, cols);
    grad.weight.noalias() += g_out.middleCols(p0, count) * cols.transpose();
    if (g_x) {
      g_cols.noalias() = conv.weight.transpose() * g_out.middleCols(p0, count);
      for (Eigen::Index t = 0; t < count; ++t) {
        for (int k = 0; k < taps; ++k) {
          g_x->col(src[static_cast<std::size_t>(t * taps + k)]) += g_cols.block(k * in, t, in, 1);
        }
      }
    }
  }
}

}  // namespace s2h
