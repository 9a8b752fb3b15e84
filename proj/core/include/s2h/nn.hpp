#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "s2h/cube.hpp"

namespace s2h {

// Named tensor visitor used by the optimizer, the checkpoint writer and the
// gradient checker. Every parameter block exposes `visit(fn, prefix)`.
using TensorVisitor = std::function<void(const std::string& name, Matrix& tensor)>;
using ConstTensorVisitor = std::function<void(const std::string& name, const Matrix& tensor)>;

// Square-kernel 2-D convolution (cross-correlation) over feature maps stored
// as channels x pixels with row-major pixel order, reflective padding, stride
// 1, "same" output size.
//
// weight is out x (k*k*in); column (dy*k + dx)*in + c multiplies input
// channel c at spatial offset (dy - k/2, dx - k/2).
struct Conv2d {
  int in_ch = 0;
  int out_ch = 0;
  int ksize = 3;
  Matrix weight;
  Matrix bias;  // out x 1

  static Conv2d zeros(int in, int out, int k);
  // Zero-mean normal weights with standard deviation gain * sqrt(2 / fan_in).
  static Conv2d he_normal(int in, int out, int k, double gain, std::mt19937_64& rng);

  void visit(const TensorVisitor& fn, const std::string& prefix);
  void visit(const ConstTensorVisitor& fn, const std::string& prefix) const;
};

Matrix conv2d_forward(const Conv2d& conv, const Matrix& x, int width, int height);

// Accumulates parameter gradients into `grad` (same shapes as `conv`) and,
// when `g_x` is non-null, writes the input gradient into it.
void conv2d_backward(const Conv2d& conv, const Matrix& x, const Matrix& g_out, int width, int height,
                     Conv2d& grad, Matrix* g_x);

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
// Gradient through ReLU with the subgradient 0 at 0.
inline Matrix relu_backward(const Matrix& pre, const Matrix& g) {
  return (pre.array() > 0.0).select(g, 0.0);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace s2h
