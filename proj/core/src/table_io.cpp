#include "s2h/table_io.hpp"

#include <fstream>
#include <sstream>

#include "s2h/kv_config.hpp"

namespace s2h {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return os;
}

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path) {
  try {
    return parse_double_list(line);
  } catch (const Error&) {
    fail(ErrorCode::HeaderParse, "malformed row in " + path.string() + ": " + line);
  }
}

}  // namespace

void write_srt_csv(const std::filesystem::path& path, const SrtMatrix& srt, const std::vector<double>& centers_m,
                   const std::vector<double>& wavelengths_h) {
  require(static_cast<int>(centers_m.size()) == srt.ms_bands() &&
              static_cast<int>(wavelengths_h.size()) == srt.hs_bands(),
          ErrorCode::DimensionMismatch, "SRT labels do not match its shape");
  std::ofstream os = open_out(path);
  os << "band_center_nm";
  for (double w : wavelengths_h) os << ',' << format_double(w);
  os << '\n';
  for (int r = 0; r < srt.ms_bands(); ++r) {
    os << format_double(centers_m[static_cast<std::size_t>(r)]);
    for (int c = 0; c < srt.hs_bands(); ++c) os << ',' << format_double(srt.d(r, c));
    os << '\n';
  }
  require(static_cast<bool>(os), ErrorCode::Io, "failed writing " + path.string());
}

SrtTable read_srt_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::HeaderParse, path.string() + " is empty");
  const auto comma = line.find(',');
  require(comma != std::string::npos && trim(line.substr(0, comma)) == "band_center_nm", ErrorCode::HeaderParse,
          path.string() + " does not start with band_center_nm");
  SrtTable t;
  t.wavelengths_h = parse_row(line.substr(comma + 1), path);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row = parse_row(line, path);
    require(row.size() == t.wavelengths_h.size() + 1, ErrorCode::HeaderParse,
            "row width differs from the header in " + path.string());
    t.centers_m.push_back(row[0]);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::HeaderParse, path.string() + " has no SRT rows");
  t.srt.d.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.wavelengths_h.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < t.wavelengths_h.size(); ++c) {
      t.srt.d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c + 1];
    }
  }
  return t;
}

void write_endmembers_csv(const std::filesystem::path& path, const Matrix& e, const std::vector<double>& wavelengths) {
  require(static_cast<Eigen::Index>(wavelengths.size()) == e.rows(), ErrorCode::DimensionMismatch,
          "one wavelength per endmember row required");
  std::ofstream os = open_out(path);
  os << "wavelength_nm";
  for (Eigen::Index j = 0; j < e.cols(); ++j) os << ",source_" << j + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    os << format_double(wavelengths[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < e.cols(); ++j) os << ',' << format_double(e(i, j));
    os << '\n';
  }
  require(static_cast<bool>(os), ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace s2h
