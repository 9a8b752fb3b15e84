#pragma once

#include <cstdint>
#include <vector>

#include "s2h/cube.hpp"

namespace s2h {

struct UnmixResult {
  int n_sources = 0;
  Matrix endmembers;   // M x N
  Matrix abundances;   // N x L, columns on the unit simplex
  std::vector<Eigen::Index> pixel_indices;  // pixels VCA picked
};

// Wax-Kailath description length for model orders 0..n_max, computed from the
// eigenvalues of the (uncentred) sample correlation matrix Y Y^T / L.
std::vector<double> mdl_curve(const HyperCube& y, int n_max);
int estimate_order_mdl(const HyperCube& y, int n_max);

struct VcaResult {
  Matrix endmembers;                  // M x N, columns copied from the input
  std::vector<Eigen::Index> indices;  // their pixel indices
};

// Vertex component analysis. Ties in the extreme projection go to the lowest
// pixel index.
VcaResult vca(const HyperCube& y, int n, std::uint64_t seed);

// Per pixel: argmin ||E a - y||^2 subject to a >= 0, sum(a) = 1, solved by an
// active-set method.
Vector fcls_pixel(const Matrix& gram, const Vector& ety, double tol = 1e-9);
Matrix fcls(const HyperCube& y, const Matrix& endmembers, double tol = 1e-9);

// n_sources <= 0 estimates the order with MDL (up to `n_max`).
// When VCA returns a rank-deficient set (one source extracted twice) the
// abundances come from a ridge-regularised simplex solve instead of failing.
UnmixResult unmix(const HyperCube& y, int n_sources, std::uint64_t seed, int n_max = 15);

// Permutation `perm` minimising the mean angle between est.col(perm[j]) and
// ref.col(j); exhaustive search.
std::vector<int> match_endmembers(const Matrix& est, const Matrix& ref);

}  // namespace s2h
