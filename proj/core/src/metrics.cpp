#include "s2h/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "s2h/kv_config.hpp"

namespace s2h {

namespace {

void check_pair(const HyperCube& x, const HyperCube& ref) {
  require(x.same_shape(ref) && x.data.cols() == ref.data.cols(), ErrorCode::ShapeMismatch,
          "metric operands differ in shape");
}

// 2 atan2(|u - v|, |u + v|) on the unit vectors: accurate near 0 and exactly
// 0 for parallel inputs, where acos of a rounded cosine is not.
template <class A, class B>
double angle_deg(const A& a, const B& b, double na, double nb) {
  double d = 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double u = a(i) / na;
    const double v = b(i) / nb;
    d += (u - v) * (u - v);
    s += (u + v) * (u + v);
  }
  return 2.0 * std::atan2(std::sqrt(d), std::sqrt(s)) * 180.0 / std::numbers::pi;
}

// Valid-mode separable filtering of a row-major image with kernel g.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& g) {
  const Eigen::Index k = g.size();
  const Eigen::Index h = img.rows() - k + 1;
  const Eigen::Index w = img.cols() - k + 1;
  Eigen::MatrixXd tmp(img.rows(), w);
  for (Eigen::Index c = 0; c < w; ++c) {
    tmp.col(c).setZero();
    for (Eigen::Index t = 0; t < k; ++t) tmp.col(c) += g(t) * img.col(c + t);
  }
  Eigen::MatrixXd out(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    out.row(r).setZero();
    for (Eigen::Index t = 0; t < k; ++t) out.row(r) += g(t) * tmp.row(r + t);
  }
  return out;
}

}  // namespace

double spectral_angle_deg(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch, "spectra differ in length");
  const double na = a.norm();
  const double nb = b.norm();
  require(na > 0.0 && nb > 0.0, ErrorCode::ZeroSpectrum, "spectral angle of an all-zero spectrum");
  return angle_deg(a, b, na, nb);
}

double psnr(const HyperCube& x, const HyperCube& ref, int* excluded) {
  check_pair(x, ref);
  double sum = 0.0;
  int used = 0;
  int zero = 0;
  for (int b = 0; b < x.bands(); ++b) {
    const double mse = (x.data.row(b) - ref.data.row(b)).squaredNorm() / static_cast<double>(x.pixels());
    if (mse == 0.0) {
      ++zero;
      continue;
    }
    sum += 10.0 * std::log10(1.0 / mse);
    ++used;
  }
  if (excluded) *excluded = used == 0 ? 0 : zero;
  if (used == 0) return std::numeric_limits<double>::infinity();
  return sum / used;
}

SamResult sam(const HyperCube& x, const HyperCube& ref) {
  check_pair(x, ref);
  SamResult r;
  r.map = HyperCube(1, x.width, x.height, {1.0});
  double sum = 0.0;
  for (int p = 0; p < x.pixels(); ++p) {
    const double na = x.data.col(p).norm();
    const double nb = ref.data.col(p).norm();
    require(na > 0.0 && nb > 0.0, ErrorCode::ZeroSpectrum, "pixel " + std::to_string(p) + " is an all-zero spectrum");
    const double a = angle_deg(x.data.col(p), ref.data.col(p), na, nb);
    r.map.data(0, p) = a;
    sum += a;
  }
  r.mean_deg = sum / x.pixels();
  return r;
}

double rmse(const HyperCube& x, const HyperCube& ref) {
  check_pair(x, ref);
  return std::sqrt((x.data - ref.data).squaredNorm() / static_cast<double>(x.data.size()));
}

double ssim(const HyperCube& x, const HyperCube& ref) {
  check_pair(x, ref);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  require(x.width >= kWin && x.height >= kWin, ErrorCode::TooSmallForWindow,
          "SSIM needs at least an 11x11 image");
  Eigen::VectorXd g(kWin);
  for (int i = 0; i < kWin; ++i) g(i) = std::exp(-0.5 * (i - kWin / 2) * (i - kWin / 2) / (kSigma * kSigma));
  g /= g.sum();

  double total = 0.0;
  for (int b = 0; b < x.bands(); ++b) {
    // rows = image rows, cols = image columns
    const Eigen::MatrixXd xi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        Eigen::RowVectorXd(x.data.row(b)).data(), x.height, x.width);
    const Eigen::MatrixXd yi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        Eigen::RowVectorXd(ref.data.row(b)).data(), x.height, x.width);
    const Eigen::ArrayXXd mx = filter_valid(xi, g).array();
    const Eigen::ArrayXXd my = filter_valid(yi, g).array();
    const Eigen::ArrayXXd sxx = filter_valid(xi.cwiseProduct(xi), g).array() - mx * mx;
    const Eigen::ArrayXXd syy = filter_valid(yi.cwiseProduct(yi), g).array() - my * my;
    const Eigen::ArrayXXd sxy = filter_valid(xi.cwiseProduct(yi), g).array() - mx * my;
    const Eigen::ArrayXXd map =
        ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    total += map.mean();
  }
  return total / x.bands();
}

MetricReport evaluate(const HyperCube& x, const HyperCube& ref) {
  MetricReport r;
  r.psnr = psnr(x, ref, &r.psnr_excluded_bands);
  SamResult s = sam(x, ref);
  r.sam_mean = s.mean_deg;
  r.sam_map = std::move(s.map);
  r.rmse = rmse(x, ref);
  r.ssim = ssim(x, ref);
  return r;
}

std::string metric_csv_header() { return "psnr_db,sam_deg,rmse,ssim,psnr_excluded_bands"; }

std::string metric_csv_row(const MetricReport& r) {
  return (std::isinf(r.psnr) ? std::string("inf") : format_double(r.psnr)) + "," + format_double(r.sam_mean) +
         "," + format_double(r.rmse) + "," + format_double(r.ssim) + "," + std::to_string(r.psnr_excluded_bands);
}

std::string metric_table(const MetricReport& r) {
  std::ostringstream os;
  os << "metric  value          (PSNR and SSIM are per-band means)\n";
  os << "PSNR    " << (std::isinf(r.psnr) ? std::string("inf") : format_double(r.psnr)) << " dB\n";
  os << "SAM     " << format_double(r.sam_mean) << " deg\n";
  os << "RMSE    " << format_double(r.rmse) << "\n";
  os << "SSIM    " << format_double(r.ssim) << "\n";
  if (r.psnr_excluded_bands > 0) os << "(" << r.psnr_excluded_bands << " exact bands left out of PSNR)\n";
  return os.str();
}

}  // namespace s2h
