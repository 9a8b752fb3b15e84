#pragma once

#include <string>

#include "s2h/cube.hpp"

namespace s2h {

// Angle between two spectra in degrees. Throws ZeroSpectrum if either is 0.
double spectral_angle_deg(const Vector& a, const Vector& b);

// Mean over bands of 10 log10(1 / MSE_band) with unit peak. Returns +inf when
// every band matches exactly; otherwise zero-error bands are left out of the
// mean and counted in `excluded`.
double psnr(const HyperCube& x, const HyperCube& ref, int* excluded = nullptr);

struct SamResult {
  double mean_deg = 0.0;
  HyperCube map;  // one band, per-pixel angle in degrees
};
SamResult sam(const HyperCube& x, const HyperCube& ref);

double rmse(const HyperCube& x, const HyperCube& ref);

// Per-band SSIM with an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, averaged over the valid window positions and then over bands.
double ssim(const HyperCube& x, const HyperCube& ref);

struct MetricReport {
  double psnr = 0.0;
  double sam_mean = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  int psnr_excluded_bands = 0;
  HyperCube sam_map;
};

MetricReport evaluate(const HyperCube& x, const HyperCube& ref);

std::string metric_csv_header();
std::string metric_csv_row(const MetricReport& r);
std::string metric_table(const MetricReport& r);

}  // namespace s2h
