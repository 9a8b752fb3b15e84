#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

#include "s2h/error.hpp"

namespace s2h {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Band-major reflectance cube.
//
// `data` is bands x pixels. Pixels are flattened row-major over (row, col):
// pixel index = row * width + col. Every spatial operation in the library
// (pooling, replication, convolution) assumes this order. Eigen stores the
// matrix column-major, so the spectrum of one pixel is contiguous in memory.
struct HyperCube {
  Matrix data;
  int width = 0;
  int height = 0;
  std::vector<double> wavelengths;  // nm, strictly increasing, one per band

  HyperCube() = default;
  HyperCube(int bands, int width, int height, std::vector<double> wavelengths = {});

  int bands() const noexcept { return static_cast<int>(data.rows()); }
  int pixels() const noexcept { return static_cast<int>(data.cols()); }
  Eigen::Index index(int row, int col) const noexcept {
    return static_cast<Eigen::Index>(row) * width + col;
  }
  double& at(int band, int row, int col) { return data(band, index(row, col)); }
  double at(int band, int row, int col) const { return data(band, index(row, col)); }

  // Same spatial grid and band count.
  bool same_shape(const HyperCube& other) const noexcept {
    return width == other.width && height == other.height && bands() == other.bands();
  }

  bool operator==(const HyperCube& other) const;
};

// Copy of `like` with its data replaced.
HyperCube with_data(const HyperCube& like, Matrix data);

// Returns ErrorCode::Ok iff every HyperCube invariant holds: L = width*height,
// wavelengths strictly increasing with one entry per band, all values finite.
// The [0,1] range is a normalization convention enforced at ingestion, not
// here, since intermediate network tensors leave it routinely.
ErrorCode validate_cube(const HyperCube& cube);
void check_cube(const HyperCube& cube);

enum class ResClass : std::uint8_t { HR, MED, LOW };

constexpr int replication_factor(ResClass c) noexcept {
  switch (c) {
    case ResClass::HR: return 1;
    case ResClass::MED: return 4;
    case ResClass::LOW: return 36;
  }
  return 1;
}

// Side length of the aligned block a coarse band is constant over.
constexpr int block_side(ResClass c) noexcept {
  switch (c) {
    case ResClass::HR: return 1;
    case ResClass::MED: return 2;
    case ResClass::LOW: return 6;
  }
  return 1;
}

std::string_view to_string(ResClass c) noexcept;
ResClass parse_res_class(std::string_view s);

// Multi-resolution multispectral cube: every band lives on the HR grid, coarse
// bands are block-replicated (2x2 for MED, 6x6 for LOW).
struct MultiResCube {
  HyperCube cube;
  std::vector<ResClass> res_class;

  int hr_band_count() const;
};

// Block-constancy of MED/LOW bands and at least one HR band.
ErrorCode validate_multires(const MultiResCube& y);
void check_multires(const MultiResCube& y);

// Spectral response transform, multispectral bands x hyperspectral bands.
struct SrtMatrix {
  Matrix d;

  int ms_bands() const noexcept { return static_cast<int>(d.rows()); }
  int hs_bands() const noexcept { return static_cast<int>(d.cols()); }
};

ErrorCode validate_srt(const SrtMatrix& srt);

// Mirror index into [0, n) without repeating the edge sample
// (-1 -> 1, n -> n - 2), periodically extended for offsets wider than n.
constexpr int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace s2h
