#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2h/cube.hpp"
#include "s2h/kv_config.hpp"

namespace s2h {

// One multispectral band of a sensor: centre wavelength, full width at half
// maximum, and native resolution class.
struct SensorBand {
  std::string name;
  double center_nm = 0.0;
  double fwhm_nm = 0.0;
  ResClass res = ResClass::HR;
};

// The 12 Sentinel-2 bands used for level-2 products (B10 excluded).
std::vector<SensorBand> sentinel2_bands();
// Six-band desk-scale subset: B1 (LOW), B2/B3/B4/B8 (HR), B11 (MED).
std::vector<SensorBand> desk_sensor_bands();
// Sensor for `bands_m` multispectral bands: 12 -> Sentinel-2, 6 -> desk
// subset, 4 -> the four HR bands, 2 -> B4/B8 (toy). Anything else throws.
std::vector<SensorBand> sensor_for(int bands_m);

// `bands` wavelengths spaced evenly over [400, 2500] nm.
std::vector<double> hyperspectral_wavelengths(int bands);

std::vector<double> centers(const std::vector<SensorBand>& sensor);
std::vector<ResClass> res_classes(const std::vector<SensorBand>& sensor);

// Gaussian spectral responses sampled on the hyperspectral grid, one row per
// multispectral band, each row normalised to sum 1. The response width is at
// least the hyperspectral sampling step so every row integrates something.
SrtMatrix make_srt(const std::vector<SensorBand>& sensor, const std::vector<double>& wavelengths_h);

struct SceneSpec {
  int width = 24;
  int height = 24;
  int bands_h = 32;
  int bands_m = 6;
  int n_sources = 4;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;
  // Endmembers are drawn from a seeded library of smooth material spectra so
  // that scenes generated with different seeds share materials. A library size
  // of 0 draws fresh spectra for every scene.
  int library_size = 8;
  std::uint64_t library_seed = 7;
  double brightness_jitter = 0.15;

  KvConfig to_config() const;
  static SceneSpec from_config(const KvConfig& cfg);
};

// Returns Ok or InvalidSpec.
ErrorCode validate_scene_spec(const SceneSpec& spec);

struct MixingModel {
  Matrix endmembers;  // M x N, entries in [0,1]
  Matrix abundances;  // N x L, columns on the unit simplex
};

struct Scene {
  HyperCube cube;
  MixingModel mixing;
};

// Smooth material spectrum: baseline plus a few Gaussian bumps over
// wavelength, clipped to [0.02, 0.95].
Vector random_material(const std::vector<double>& wavelengths, std::uint64_t seed);

// Material library of `count` spectra with pairwise spectral angle of at
// least `min_angle_deg`.
Matrix material_library(const std::vector<double>& wavelengths, int count, std::uint64_t seed,
                        double min_angle_deg = 3.0);

// Spatially smooth simplex abundances on a width x height grid with one
// exactly pure pixel per source.
Matrix smooth_abundances(int width, int height, int n_sources, std::uint64_t seed);

Scene synth_scene(const SceneSpec& spec);

// Y = E * A + noise, clipped to [0, 1].
HyperCube mix_cube(const Matrix& endmembers, const Matrix& abundances, int width, int height,
                   const std::vector<double>& wavelengths, double noise_sigma, std::uint64_t noise_seed);

// D * Y_H on every pixel. Output wavelengths are the centroid of each SRT row.
HyperCube apply_srt(const SrtMatrix& d, const HyperCube& y_h);
HyperCube apply_srt(const SrtMatrix& d, const HyperCube& y_h, const std::vector<double>& wavelengths_m);

// Truncated Gaussian blur (radius ceil(3 sigma), reflective padding) of one
// band image stored in row-major order. sigma <= 0 is the identity.
void gaussian_blur_band(Eigen::Ref<Eigen::RowVectorXd> band, int width, int height, double sigma);

// HR bands pass through; MED/LOW bands are blurred, block-averaged over 2x2 /
// 6x6 and replicated back to the HR grid.
MultiResCube degrade_multires(const HyperCube& msi, const std::vector<ResClass>& classes,
                              double blur_sigma);

// Per pixel piecewise-linear interpolation over wavelength from the
// multispectral band centres onto `wavelengths_h`, constant extrapolation,
// clipped to [0, 1].
HyperCube spectral_upsample_init(const MultiResCube& y_s, const std::vector<double>& wavelengths_h);

// A complete simulated acquisition pair.
struct AcquisitionPair {
  HyperCube y_h;     // ground truth hyperspectral cube
  MultiResCube y_s;  // multi-resolution multispectral observation
  MixingModel mixing;
};

AcquisitionPair simulate_pair(const SceneSpec& spec, const SrtMatrix& srt,
                              const std::vector<SensorBand>& sensor, double blur_sigma);

}  // namespace s2h
