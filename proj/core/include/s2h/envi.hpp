#pragma once

#include <filesystem>

#include "s2h/cube.hpp"
#include "s2h/kv_config.hpp"

namespace s2h {

// ENVI-style cube files: a text header `<base>.hdr` and a raw band-sequential
// payload `<base>.bsq`. Writing always emits little-endian float32 with a
// reflectance scale factor of 1. Reading accepts float32/float64/int16/uint16
// payloads in either byte order and divides by `reflectance scale factor`
// (10000 when the key is absent, the usual level-2 reflectance convention).
//
// `path` may name the header, the payload, or the extension-less base.

inline constexpr double kDefaultReflectanceScale = 10000.0;

std::filesystem::path envi_header_path(const std::filesystem::path& path);
std::filesystem::path envi_payload_path(const std::filesystem::path& path);

HyperCube read_envi(const std::filesystem::path& path);
void write_envi(const HyperCube& cube, const std::filesystem::path& path);

// The header of a cube file; useful for reading extension keys.
KvConfig read_envi_header(const std::filesystem::path& path);

// Multi-resolution cubes carry a `resolution class = {HR, MED, ...}` key.
MultiResCube read_multires(const std::filesystem::path& path);
void write_multires(const MultiResCube& cube, const std::filesystem::path& path);

}  // namespace s2h
