#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "s2h/cube.hpp"
#include "s2h/learn.hpp"
#include "s2h/nn.hpp"

namespace s2h::test {

// Uniform entries in [lo, hi), wavelengths 400 + 10 b.
HyperCube random_cube(int bands, int width, int height, std::uint64_t seed, double lo = 0.0, double hi = 1.0);
Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

// Straight-line nested-loop convolution with mirrored borders, the reference
// for every Conv2d based layer.
Matrix naive_conv2d(const Conv2d& c, const Matrix& x, int width, int height);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::vector<char> file_bytes(const std::filesystem::path& p);

// Synthetic training pairs on the desk sensor, scene seeds first_seed + i.
std::vector<Sample> desk_samples(int count, std::uint64_t first_seed, int bands_h = 32, int bands_m = 6,
                                 int side = 24, int n_sources = 4);

// Toy problem for gradient checks: M = 6, two HR bands (B4, B8), 4x4.
std::vector<Sample> toy_samples(int count, std::uint64_t seed);
PipelineConfig toy_config(Strategy strategy);

}  // namespace s2h::test
