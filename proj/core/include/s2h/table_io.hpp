#pragma once

#include <filesystem>
#include <vector>

#include "s2h/cube.hpp"

namespace s2h {

// SRT as CSV: header `band_center_nm,<hyperspectral wavelengths>`, then one
// row per multispectral band: `<band centre>,<response values>`.
void write_srt_csv(const std::filesystem::path& path, const SrtMatrix& srt, const std::vector<double>& centers_m,
                   const std::vector<double>& wavelengths_h);
struct SrtTable {
  SrtMatrix srt;
  std::vector<double> centers_m;
  std::vector<double> wavelengths_h;
};
SrtTable read_srt_csv(const std::filesystem::path& path);

// Endmembers as CSV: `wavelength_nm,source_1,...,source_N`, one row per band.
void write_endmembers_csv(const std::filesystem::path& path, const Matrix& endmembers,
                          const std::vector<double>& wavelengths);

}  // namespace s2h
