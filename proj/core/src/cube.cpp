#include "s2h/cube.hpp"

#include <cmath>
#include <string>

namespace s2h {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::WavelengthOrder: return "WavelengthOrder";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::HeaderParse: return "HeaderParse";
    case ErrorCode::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case ErrorCode::UnsupportedInterleave: return "UnsupportedInterleave";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TooFewBands: return "TooFewBands";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::OddDimensions: return "OddDimensions";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::MissingHrBands: return "MissingHrBands";
    case ErrorCode::DataEmpty: return "DataEmpty";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::ZeroSpectrum: return "ZeroSpectrum";
    case ErrorCode::TooSmallForWindow: return "TooSmallForWindow";
  }
  return "Unknown";
}

HyperCube::HyperCube(int bands, int w, int h, std::vector<double> wl)
    : data(Matrix::Zero(bands, static_cast<Eigen::Index>(w) * h)),
      width(w),
      height(h),
      wavelengths(std::move(wl)) {
  if (wavelengths.empty()) {
    wavelengths.resize(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b) wavelengths[static_cast<std::size_t>(b)] = b + 1.0;
  }
}

bool HyperCube::operator==(const HyperCube& other) const {
  return width == other.width && height == other.height && wavelengths == other.wavelengths &&
         data.rows() == other.data.rows() && data.cols() == other.data.cols() &&
         data == other.data;
}

HyperCube with_data(const HyperCube& like, Matrix data) {
  HyperCube out;
  out.data = std::move(data);
  out.width = like.width;
  out.height = like.height;
  out.wavelengths = like.wavelengths;
  return out;
}

ErrorCode validate_cube(const HyperCube& cube) {
  if (cube.width <= 0 || cube.height <= 0 ||
      cube.data.cols() != static_cast<Eigen::Index>(cube.width) * cube.height) {
    return ErrorCode::DimensionMismatch;
  }
  if (!cube.data.allFinite()) return ErrorCode::NonFinite;
  if (cube.wavelengths.size() != static_cast<std::size_t>(cube.bands())) {
    return ErrorCode::WavelengthOrder;
  }
  for (std::size_t i = 1; i < cube.wavelengths.size(); ++i) {
    if (!(cube.wavelengths[i] > cube.wavelengths[i - 1])) return ErrorCode::WavelengthOrder;
  }
  return ErrorCode::Ok;
}

void check_cube(const HyperCube& cube) {
  const ErrorCode code = validate_cube(cube);
  if (code != ErrorCode::Ok) {
    fail(code, "invalid cube (" + std::to_string(cube.bands()) + " bands, " +
                   std::to_string(cube.width) + "x" + std::to_string(cube.height) + ")");
  }
}

std::string_view to_string(ResClass c) noexcept {
  switch (c) {
    case ResClass::HR: return "HR";
    case ResClass::MED: return "MED";
    case ResClass::LOW: return "LOW";
  }
  return "HR";
}

ResClass parse_res_class(std::string_view s) {
  if (s == "HR") return ResClass::HR;
  if (s == "MED") return ResClass::MED;
  if (s == "LOW") return ResClass::LOW;
  fail(ErrorCode::HeaderParse, "unknown resolution class '" + std::string(s) + "'");
}

int MultiResCube::hr_band_count() const {
  int n = 0;
  for (ResClass c : res_class) n += c == ResClass::HR ? 1 : 0;
  return n;
}

ErrorCode validate_multires(const MultiResCube& y) {
  if (const ErrorCode code = validate_cube(y.cube); code != ErrorCode::Ok) return code;
  if (y.res_class.size() != static_cast<std::size_t>(y.cube.bands())) {
    return ErrorCode::DimensionMismatch;
  }
  if (y.hr_band_count() == 0) return ErrorCode::MissingHrBands;
  for (int b = 0; b < y.cube.bands(); ++b) {
    const int side = block_side(y.res_class[static_cast<std::size_t>(b)]);
    if (side == 1) continue;
    if (y.cube.width % side != 0 || y.cube.height % side != 0) return ErrorCode::DimensionMismatch;
    for (int r = 0; r < y.cube.height; ++r) {
      for (int c = 0; c < y.cube.width; ++c) {
        if (y.cube.at(b, r, c) != y.cube.at(b, r - r % side, c - c % side)) {
          return ErrorCode::DimensionMismatch;
        }
      }
    }
  }
  return ErrorCode::Ok;
}

void check_multires(const MultiResCube& y) {
  const ErrorCode code = validate_multires(y);
  if (code != ErrorCode::Ok) fail(code, "invalid multi-resolution cube");
}

ErrorCode validate_srt(const SrtMatrix& srt) {
  if (srt.d.rows() == 0 || srt.d.rows() >= srt.d.cols()) return ErrorCode::DimensionMismatch;
  if (!srt.d.allFinite()) return ErrorCode::NonFinite;
  if ((srt.d.array() < 0.0).any()) return ErrorCode::InvalidArgument;
  for (Eigen::Index r = 0; r < srt.d.rows(); ++r) {
    if (!(srt.d.row(r).maxCoeff() > 0.0)) return ErrorCode::InvalidArgument;
  }
  return ErrorCode::Ok;
}

}  // namespace s2h
