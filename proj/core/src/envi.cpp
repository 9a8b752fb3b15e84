#include "s2h/envi.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace s2h {
namespace fs = std::filesystem;

namespace {

fs::path base_of(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".hdr" || ext == ".bsq") {
    fs::path base = path;
    base.replace_extension();
    return base;
  }
  return path;
}

std::size_t element_size(int data_type) {
  switch (data_type) {
    case 2: return 2;   // int16
    case 4: return 4;   // float32
    case 5: return 8;   // float64
    case 12: return 2;  // uint16
    default: fail(ErrorCode::HeaderParse, "unsupported data type " + std::to_string(data_type));
  }
}

template <typename T>
T load_scalar(const unsigned char* p, bool swap) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), p, sizeof(T));
  if (swap) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

double decode(const unsigned char* p, int data_type, bool swap) {
  switch (data_type) {
    case 2: return load_scalar<std::int16_t>(p, swap);
    case 4: return load_scalar<float>(p, swap);
    case 5: return load_scalar<double>(p, swap);
    case 12: return load_scalar<std::uint16_t>(p, swap);
    default: return 0.0;
  }
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out + "}";
}

int header_int(const KvConfig& hdr, const std::string& key) {
  const long long v = parse_int(hdr.get(key));
  if (v <= 0 || v > (1LL << 30)) fail(ErrorCode::HeaderParse, "bad value for '" + key + "'");
  return static_cast<int>(v);
}

std::string header_text(const HyperCube& cube, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream os;
  os << "ENVI\n";
  os << "samples = " << cube.width << "\n";
  os << "lines = " << cube.height << "\n";
  os << "bands = " << cube.bands() << "\n";
  os << "header offset = 0\n";
  os << "file type = ENVI Standard\n";
  os << "data type = 4\n";
  os << "interleave = bsq\n";
  os << "byte order = 0\n";
  os << "reflectance scale factor = 1\n";
  os << "wavelength units = Nanometers\n";
  os << "wavelength = " << join_doubles(cube.wavelengths) << "\n";
  for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
  return os.str();
}

void write_cube_files(const HyperCube& cube, const fs::path& path,
                      const std::vector<std::pair<std::string, std::string>>& extra) {
  check_cube(cube);
  const fs::path hdr = envi_header_path(path);
  const fs::path bsq = envi_payload_path(path);
  {
    std::ofstream out(hdr, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + hdr.string());
    out << header_text(cube, extra);
    if (!out) fail(ErrorCode::Io, "write failed for " + hdr.string());
  }
  const int m = cube.bands();
  const Eigen::Index l = cube.pixels();
  std::vector<unsigned char> buf(static_cast<std::size_t>(m) * static_cast<std::size_t>(l) * 4);
  std::size_t off = 0;
  for (int b = 0; b < m; ++b) {
    for (Eigen::Index p = 0; p < l; ++p) {
      auto bytes = std::bit_cast<std::array<unsigned char, 4>>(static_cast<float>(cube.data(b, p)));
      if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
      std::memcpy(buf.data() + off, bytes.data(), 4);
      off += 4;
    }
  }
  std::ofstream out(bsq, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + bsq.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + bsq.string());
}

}  // namespace

fs::path envi_header_path(const fs::path& path) {
  fs::path p = base_of(path);
  p += ".hdr";
  return p;
}

fs::path envi_payload_path(const fs::path& path) {
  fs::path p = base_of(path);
  p += ".bsq";
  return p;
}

KvConfig read_envi_header(const fs::path& path) {
  const fs::path hdr = envi_header_path(path);
  if (!fs::exists(hdr)) fail(ErrorCode::Io, "missing header " + hdr.string());
  try {
    return KvConfig::load(hdr);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) fail(ErrorCode::HeaderParse, e.what());
    throw;
  }
}

HyperCube read_envi(const fs::path& path) {
  const KvConfig hdr = read_envi_header(path);
  HyperCube cube;
  int bands = 0;
  int data_type = 4;
  bool swap = false;
  long long offset = 0;
  double scale = kDefaultReflectanceScale;
  try {
    cube.width = header_int(hdr, "samples");
    cube.height = header_int(hdr, "lines");
    bands = header_int(hdr, "bands");
    data_type = static_cast<int>(parse_int(hdr.get_or("data type", "4")));
    const std::string interleave = trim(hdr.get_or("interleave", "bsq"));
    if (interleave != "bsq" && interleave != "BSQ") {
      fail(ErrorCode::UnsupportedInterleave, "interleave '" + interleave + "' (only bsq)");
    }
    const int byte_order = static_cast<int>(parse_int(hdr.get_or("byte order", "0")));
    const bool file_big = byte_order == 1;
    swap = file_big != (std::endian::native == std::endian::big);
    offset = parse_int(hdr.get_or("header offset", "0"));
    if (hdr.has("reflectance scale factor")) scale = parse_double(hdr.get("reflectance scale factor"));
    if (!(scale > 0.0)) fail(ErrorCode::HeaderParse, "reflectance scale factor must be positive");
    if (hdr.has("wavelength")) {
      cube.wavelengths = parse_double_list(hdr.get("wavelength"));
    } else {
      for (int b = 0; b < bands; ++b) cube.wavelengths.push_back(b + 1.0);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) fail(ErrorCode::HeaderParse, e.what());
    throw;
  }
  if (cube.wavelengths.size() != static_cast<std::size_t>(bands)) {
    fail(ErrorCode::HeaderParse, "wavelength list length does not match band count");
  }
  const std::size_t esize = element_size(data_type);
  const std::size_t npix = static_cast<std::size_t>(cube.width) * static_cast<std::size_t>(cube.height);
  const std::size_t expected = npix * static_cast<std::size_t>(bands) * esize;

  const fs::path bsq = envi_payload_path(path);
  std::ifstream in(bsq, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open payload " + bsq.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (offset < 0 || buf.size() != expected + static_cast<std::size_t>(offset)) {
    fail(ErrorCode::PayloadSizeMismatch, "payload has " + std::to_string(buf.size()) +
                                             " bytes, header implies " +
                                             std::to_string(expected + static_cast<std::size_t>(offset)));
  }
  cube.data.resize(bands, static_cast<Eigen::Index>(npix));
  const unsigned char* p = buf.data() + offset;
  for (int b = 0; b < bands; ++b) {
    for (std::size_t i = 0; i < npix; ++i, p += esize) {
      cube.data(b, static_cast<Eigen::Index>(i)) = decode(p, data_type, swap) / scale;
    }
  }
  check_cube(cube);
  return cube;
}

void write_envi(const HyperCube& cube, const fs::path& path) { write_cube_files(cube, path, {}); }

MultiResCube read_multires(const fs::path& path) {
  MultiResCube out;
  out.cube = read_envi(path);
  const KvConfig hdr = read_envi_header(path);
  if (!hdr.has("resolution class")) {
    out.res_class.assign(static_cast<std::size_t>(out.cube.bands()), ResClass::HR);
  } else {
    for (const auto& tag : split_list(hdr.get("resolution class"))) {
      out.res_class.push_back(parse_res_class(tag));
    }
  }
  if (out.res_class.size() != static_cast<std::size_t>(out.cube.bands())) {
    fail(ErrorCode::HeaderParse, "resolution class list length does not match band count");
  }
  check_multires(out);
  return out;
}

void write_multires(const MultiResCube& cube, const fs::path& path) {
  check_multires(cube);
  std::string tags = "{";
  for (std::size_t i = 0; i < cube.res_class.size(); ++i) {
    if (i) tags += ", ";
    tags += std::string(to_string(cube.res_class[i]));
  }
  tags += "}";
  write_cube_files(cube.cube, path, {{"resolution class", tags}});
}

}  // namespace s2h
