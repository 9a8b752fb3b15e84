#include "s2h/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace s2h {

std::vector<SensorBand> sentinel2_bands() {
  return {
      {"B1", 443.0, 20.0, ResClass::LOW},  {"B2", 490.0, 65.0, ResClass::HR},
      {"B3", 560.0, 35.0, ResClass::HR},   {"B4", 665.0, 30.0, ResClass::HR},
      {"B5", 705.0, 15.0, ResClass::MED},  {"B6", 740.0, 15.0, ResClass::MED},
      {"B7", 783.0, 20.0, ResClass::MED},  {"B8", 842.0, 115.0, ResClass::HR},
      {"B8A", 865.0, 20.0, ResClass::MED}, {"B9", 945.0, 20.0, ResClass::LOW},
      {"B11", 1610.0, 90.0, ResClass::MED}, {"B12", 2190.0, 180.0, ResClass::MED},
  };
}

std::vector<SensorBand> desk_sensor_bands() {
  return {
      {"B1", 443.0, 20.0, ResClass::LOW}, {"B2", 490.0, 65.0, ResClass::HR},
      {"B3", 560.0, 35.0, ResClass::HR},  {"B4", 665.0, 30.0, ResClass::HR},
      {"B8", 842.0, 115.0, ResClass::HR}, {"B11", 1610.0, 90.0, ResClass::MED},
  };
}

std::vector<SensorBand> sensor_for(int bands_m) {
  switch (bands_m) {
    case 12: return sentinel2_bands();
    case 6: return desk_sensor_bands();
    case 4:
      return {{"B2", 490.0, 65.0, ResClass::HR}, {"B3", 560.0, 35.0, ResClass::HR},
              {"B4", 665.0, 30.0, ResClass::HR}, {"B8", 842.0, 115.0, ResClass::HR}};
    case 2: return {{"B4", 665.0, 30.0, ResClass::HR}, {"B8", 842.0, 115.0, ResClass::HR}};
    default:
      fail(ErrorCode::InvalidSpec, "no built-in sensor with " + std::to_string(bands_m) + " bands");
  }
}

std::vector<double> hyperspectral_wavelengths(int bands) {
  require(bands >= 1, ErrorCode::InvalidSpec, "need at least one hyperspectral band");
  std::vector<double> wl(static_cast<std::size_t>(bands));
  for (int i = 0; i < bands; ++i) {
    wl[static_cast<std::size_t>(i)] = bands == 1 ? 400.0 : 400.0 + 2100.0 * i / (bands - 1);
  }
  return wl;
}

std::vector<double> centers(const std::vector<SensorBand>& sensor) {
  std::vector<double> out;
  for (const auto& b : sensor) out.push_back(b.center_nm);
  return out;
}

std::vector<ResClass> res_classes(const std::vector<SensorBand>& sensor) {
  std::vector<ResClass> out;
  for (const auto& b : sensor) out.push_back(b.res);
  return out;
}

SrtMatrix make_srt(const std::vector<SensorBand>& sensor, const std::vector<double>& wl) {
  require(!sensor.empty() && wl.size() > sensor.size(), ErrorCode::DimensionMismatch,
          "SRT needs fewer multispectral than hyperspectral bands");
  const double step = wl.size() > 1 ? (wl.back() - wl.front()) / static_cast<double>(wl.size() - 1) : 1.0;
  SrtMatrix srt{Matrix::Zero(static_cast<Eigen::Index>(sensor.size()), static_cast<Eigen::Index>(wl.size()))};
  for (std::size_t r = 0; r < sensor.size(); ++r) {
    const double sigma = std::max(sensor[r].fwhm_nm, step) / 2.354820045;
    for (std::size_t c = 0; c < wl.size(); ++c) {
      const double z = (wl[c] - sensor[r].center_nm) / sigma;
      srt.d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::exp(-0.5 * z * z);
    }
    const double sum = srt.d.row(static_cast<Eigen::Index>(r)).sum();
    require(sum > 0.0, ErrorCode::InvalidSpec, "band " + sensor[r].name + " misses the hyperspectral range");
    srt.d.row(static_cast<Eigen::Index>(r)) /= sum;
  }
  return srt;
}

KvConfig SceneSpec::to_config() const {
  KvConfig cfg;
  cfg.set("width", std::to_string(width));
  cfg.set("height", std::to_string(height));
  cfg.set("bands_h", std::to_string(bands_h));
  cfg.set("bands_m", std::to_string(bands_m));
  cfg.set("n_sources", std::to_string(n_sources));
  cfg.set("seed", std::to_string(seed));
  cfg.set("noise_sigma", format_double(noise_sigma));
  cfg.set("library_size", std::to_string(library_size));
  cfg.set("library_seed", std::to_string(library_seed));
  cfg.set("brightness_jitter", format_double(brightness_jitter));
  return cfg;
}

SceneSpec SceneSpec::from_config(const KvConfig& cfg) {
  static const char* const known[] = {"width",        "height",       "bands_h",          "bands_m",
                                      "n_sources",    "seed",         "noise_sigma",      "library_size",
                                      "library_seed", "brightness_jitter"};
  for (const auto& [key, value] : cfg.values()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      fail(ErrorCode::ConfigError, "unknown scene key '" + key + "'");
    }
  }
  SceneSpec s;
  auto int_or = [&](const char* key, int fallback) {
    return cfg.has(key) ? static_cast<int>(cfg.get_int(key)) : fallback;
  };
  s.width = int_or("width", s.width);
  s.height = int_or("height", s.height);
  s.bands_h = int_or("bands_h", s.bands_h);
  s.bands_m = int_or("bands_m", s.bands_m);
  s.n_sources = int_or("n_sources", s.n_sources);
  if (cfg.has("seed")) s.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  if (cfg.has("noise_sigma")) s.noise_sigma = cfg.get_double("noise_sigma");
  s.library_size = int_or("library_size", s.library_size);
  if (cfg.has("library_seed")) s.library_seed = static_cast<std::uint64_t>(cfg.get_int("library_seed"));
  if (cfg.has("brightness_jitter")) s.brightness_jitter = cfg.get_double("brightness_jitter");
  return s;
}

ErrorCode validate_scene_spec(const SceneSpec& s) {
  const bool ok = s.width > 0 && s.height > 0 && s.width % 6 == 0 && s.height % 6 == 0 &&
                  s.bands_h >= 2 && s.bands_m >= 1 && s.bands_m < s.bands_h && s.n_sources >= 2 &&
                  s.n_sources <= std::min(s.bands_m, s.width * s.height) && s.noise_sigma >= 0.0 &&
                  std::isfinite(s.noise_sigma) && s.library_size >= 0 &&
                  (s.library_size == 0 || s.library_size >= s.n_sources) && s.brightness_jitter >= 0.0 &&
                  s.brightness_jitter < 1.0;
  return ok ? ErrorCode::Ok : ErrorCode::InvalidSpec;
}

namespace {

double spectral_angle_deg(const Vector& a, const Vector& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser, so nearby seeds give unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Vector random_material(const std::vector<double>& wl, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lo = wl.front();
  const double span = std::max(wl.back() - wl.front(), 1.0);
  const double base = 0.05 + 0.3 * u(rng);
  const double slope = -0.1 + 0.2 * u(rng);
  const int bumps = 2 + static_cast<int>(u(rng) * 3.0);
  std::vector<double> amp, ctr, wid;
  for (int g = 0; g < bumps; ++g) {
    amp.push_back(-0.25 + 0.8 * u(rng));
    ctr.push_back(lo + span * u(rng));
    wid.push_back(span * (0.04 + 0.18 * u(rng)));
  }
  Vector e(static_cast<Eigen::Index>(wl.size()));
  for (std::size_t i = 0; i < wl.size(); ++i) {
    double v = base + slope * (wl[i] - lo) / span;
    for (int g = 0; g < bumps; ++g) {
      const double z = (wl[i] - ctr[static_cast<std::size_t>(g)]) / wid[static_cast<std::size_t>(g)];
      v += amp[static_cast<std::size_t>(g)] * std::exp(-0.5 * z * z);
    }
    e(static_cast<Eigen::Index>(i)) = std::clamp(v, 0.02, 0.95);
  }
  return e;
}

Matrix material_library(const std::vector<double>& wl, int count, std::uint64_t seed, double min_angle_deg) {
  require(count >= 1, ErrorCode::InvalidSpec, "library needs at least one material");
  Matrix lib(static_cast<Eigen::Index>(wl.size()), count);
  std::uint64_t draw = 0;
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0;; ++attempt) {
      require(attempt < 10000, ErrorCode::InvalidSpec, "cannot draw distinct library materials");
      const Vector e = random_material(wl, mix_seed(seed, draw++));
      bool distinct = true;
      for (int j = 0; j < k && distinct; ++j) {
        distinct = spectral_angle_deg(e, lib.col(j)) >= min_angle_deg;
      }
      if (distinct) {
        lib.col(k) = e;
        break;
      }
    }
  }
  return lib;
}

Matrix smooth_abundances(int width, int height, int n, std::uint64_t seed) {
  require(n >= 1 && n <= width * height, ErrorCode::InvalidSpec, "bad source count for grid");
  std::mt19937_64 rng(mix_seed(seed, 11));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Anchor pixels, spread out by rejection sampling.
  std::vector<std::pair<int, int>> anchors;
  double min_dist = 0.6 * std::sqrt(static_cast<double>(width) * height / n);
  int tries = 0;
  while (static_cast<int>(anchors.size()) < n) {
    const int r = static_cast<int>(u(rng) * height);
    const int c = static_cast<int>(u(rng) * width);
    bool ok = true;
    for (const auto& [ar, ac] : anchors) {
      if (std::hypot(ar - r, ac - c) < std::max(min_dist, 1.0)) ok = false;
    }
    if (ok) {
      anchors.emplace_back(r, c);
    } else if (++tries > 200) {
      min_dist *= 0.9;
      tries = 0;
    }
  }
  double closest = 1e300;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      closest = std::min(closest, std::hypot(anchors[i].first - anchors[j].first,
                                             anchors[i].second - anchors[j].second));
    }
  }
  if (n == 1) closest = std::max(width, height);
  const double s = 0.45 * closest;

  // Low-amplitude smooth texture per source.
  constexpr int kBlobs = 3;
  const double blob_r = 0.25 * std::min(width, height);
  std::vector<std::array<double, 3 * kBlobs>> tex(static_cast<std::size_t>(n));
  for (auto& t : tex) {
    for (int j = 0; j < kBlobs; ++j) {
      t[3 * j] = -1.0 + 2.0 * u(rng);
      t[3 * j + 1] = u(rng) * height;
      t[3 * j + 2] = u(rng) * width;
    }
  }

  Matrix a(n, static_cast<Eigen::Index>(width) * height);
  Vector logits(n);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int k = 0; k < n; ++k) {
        const auto& [ar, ac] = anchors[static_cast<std::size_t>(k)];
        const double d2 = double(r - ar) * (r - ar) + double(c - ac) * (c - ac);
        double g = 0.0;
        const auto& t = tex[static_cast<std::size_t>(k)];
        for (int j = 0; j < kBlobs; ++j) {
          const double b2 = (r - t[3 * j + 1]) * (r - t[3 * j + 1]) + (c - t[3 * j + 2]) * (c - t[3 * j + 2]);
          g += t[3 * j] * std::exp(-0.5 * b2 / (blob_r * blob_r));
        }
        logits(k) = -d2 / (2.0 * s * s) + 0.8 * g;
      }
      const Vector w = (logits.array() - logits.maxCoeff()).exp();
      a.col(static_cast<Eigen::Index>(r) * width + c) = w / w.sum();
    }
  }
  for (int k = 0; k < n; ++k) {
    const auto& [ar, ac] = anchors[static_cast<std::size_t>(k)];
    auto col = a.col(static_cast<Eigen::Index>(ar) * width + ac);
    col.setZero();
    col(k) = 1.0;
  }
  return a;
}

HyperCube mix_cube(const Matrix& e, const Matrix& a, int width, int height, const std::vector<double>& wl,
                   double noise_sigma, std::uint64_t noise_seed) {
  require(e.cols() == a.rows() && a.cols() == static_cast<Eigen::Index>(width) * height &&
              e.rows() == static_cast<Eigen::Index>(wl.size()),
          ErrorCode::DimensionMismatch, "mixing model does not match the grid");
  HyperCube y;
  y.width = width;
  y.height = height;
  y.wavelengths = wl;
  y.data = e * a;
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> nd(0.0, noise_sigma);
    for (Eigen::Index p = 0; p < y.data.cols(); ++p) {
      for (Eigen::Index m = 0; m < y.data.rows(); ++m) y.data(m, p) += nd(rng);
    }
  }
  y.data = y.data.cwiseMax(0.0).cwiseMin(1.0);
  return y;
}

Scene synth_scene(const SceneSpec& spec) {
  if (validate_scene_spec(spec) != ErrorCode::Ok) fail(ErrorCode::InvalidSpec, "invalid scene spec");
  const auto wl = hyperspectral_wavelengths(spec.bands_h);
  std::mt19937_64 rng(mix_seed(spec.seed, 3));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Matrix e;
  if (spec.library_size > 0) {
    const Matrix lib = material_library(wl, spec.library_size, spec.library_seed);
    std::vector<int> idx(static_cast<std::size_t>(spec.library_size));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < spec.n_sources; ++i) {  // partial Fisher-Yates
      const int j = i + static_cast<int>(u(rng) * (spec.library_size - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    e.resize(spec.bands_h, spec.n_sources);
    for (int i = 0; i < spec.n_sources; ++i) {
      const double gain = 1.0 + spec.brightness_jitter * (2.0 * u(rng) - 1.0);
      e.col(i) = (lib.col(idx[static_cast<std::size_t>(i)]) * gain).cwiseMin(1.0);
    }
  } else {
    e = material_library(wl, spec.n_sources, mix_seed(spec.seed, 5));
  }
  Scene scene;
  scene.mixing.endmembers = e;
  scene.mixing.abundances = smooth_abundances(spec.width, spec.height, spec.n_sources, spec.seed);
  scene.cube = mix_cube(e, scene.mixing.abundances, spec.width, spec.height, wl, spec.noise_sigma,
                        mix_seed(spec.seed, 17));
  return scene;
}

HyperCube apply_srt(const SrtMatrix& d, const HyperCube& y_h, const std::vector<double>& wavelengths_m) {
  require(d.hs_bands() == y_h.bands(), ErrorCode::DimensionMismatch,
          "SRT has " + std::to_string(d.hs_bands()) + " columns, cube has " + std::to_string(y_h.bands()) +
              " bands");
  require(wavelengths_m.size() == static_cast<std::size_t>(d.ms_bands()), ErrorCode::DimensionMismatch,
          "one wavelength per multispectral band required");
  HyperCube out;
  out.width = y_h.width;
  out.height = y_h.height;
  out.wavelengths = wavelengths_m;
  out.data = d.d * y_h.data;
  return out;
}

HyperCube apply_srt(const SrtMatrix& d, const HyperCube& y_h) {
  std::vector<double> wl;
  const bool have_wl = y_h.wavelengths.size() == static_cast<std::size_t>(y_h.bands());
  for (int r = 0; r < d.ms_bands(); ++r) {
    const double mass = d.d.row(r).sum();
    double c = r + 1.0;
    if (have_wl && mass > 0.0) {
      c = 0.0;
      for (int k = 0; k < d.hs_bands(); ++k) c += d.d(r, k) * y_h.wavelengths[static_cast<std::size_t>(k)];
      c /= mass;
    }
    wl.push_back(c);
  }
  if (!std::is_sorted(wl.begin(), wl.end(), std::less_equal<>())) {
    for (int r = 0; r < d.ms_bands(); ++r) wl[static_cast<std::size_t>(r)] = r + 1.0;
  }
  return apply_srt(d, y_h, wl);
}

void gaussian_blur_band(Eigen::Ref<Eigen::RowVectorXd> band, int width, int height, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (!(sigma > 0.0) || radius < 1) return;
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;

  std::vector<double> tmp(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] * band(r * width + reflect_index(c + i, width));
      }
      tmp[static_cast<std::size_t>(r) * width + c] = acc;
    }
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[static_cast<std::size_t>(i + radius)] *
               tmp[static_cast<std::size_t>(reflect_index(r + i, height)) * width + c];
      }
      band(r * width + c) = acc;
    }
  }
}

MultiResCube degrade_multires(const HyperCube& msi, const std::vector<ResClass>& classes, double blur_sigma) {
  check_cube(msi);
  require(classes.size() == static_cast<std::size_t>(msi.bands()), ErrorCode::DimensionMismatch,
          "one resolution class per band required");
  MultiResCube out{msi, classes};
  for (int b = 0; b < msi.bands(); ++b) {
    const int side = block_side(classes[static_cast<std::size_t>(b)]);
    if (side == 1) continue;
    require(msi.width % side == 0 && msi.height % side == 0, ErrorCode::DimensionMismatch,
            "spatial size not divisible by the " + std::to_string(side) + "x" + std::to_string(side) + " block");
    Eigen::RowVectorXd band = msi.data.row(b);
    gaussian_blur_band(band, msi.width, msi.height, blur_sigma);
    const double inv = 1.0 / (side * side);
    for (int br = 0; br < msi.height; br += side) {
      for (int bc = 0; bc < msi.width; bc += side) {
        double mean = 0.0;
        for (int r = br; r < br + side; ++r) {
          for (int c = bc; c < bc + side; ++c) mean += band(r * msi.width + c);
        }
        mean *= inv;
        for (int r = br; r < br + side; ++r) {
          for (int c = bc; c < bc + side; ++c) out.cube.data(b, static_cast<Eigen::Index>(r) * msi.width + c) = mean;
        }
      }
    }
  }
  return out;
}

namespace {

// Rows: target wavelengths; columns: source bands.
Matrix interpolation_matrix(const std::vector<double>& src, const std::vector<double>& dst) {
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(dst.size()), static_cast<Eigen::Index>(src.size()));
  for (std::size_t t = 0; t < dst.size(); ++t) {
    const double x = dst[t];
    const auto ti = static_cast<Eigen::Index>(t);
    if (src.size() == 1 || x <= src.front()) {
      w(ti, 0) = 1.0;
    } else if (x >= src.back()) {
      w(ti, static_cast<Eigen::Index>(src.size() - 1)) = 1.0;
    } else {
      const auto hi = static_cast<std::size_t>(std::upper_bound(src.begin(), src.end(), x) - src.begin());
      const std::size_t lo = hi - 1;
      const double f = (x - src[lo]) / (src[hi] - src[lo]);
      w(ti, static_cast<Eigen::Index>(lo)) = 1.0 - f;
      w(ti, static_cast<Eigen::Index>(hi)) = f;
    }
  }
  return w;
}

}  // namespace

HyperCube spectral_upsample_init(const MultiResCube& y_s, const std::vector<double>& wavelengths_h) {
  check_cube(y_s.cube);
  require(!wavelengths_h.empty(), ErrorCode::WavelengthOrder, "empty target wavelength list");
  for (std::size_t i = 1; i < wavelengths_h.size(); ++i) {
    require(wavelengths_h[i] > wavelengths_h[i - 1], ErrorCode::WavelengthOrder,
            "target wavelengths must be strictly increasing");
  }
  const Matrix w = interpolation_matrix(y_s.cube.wavelengths, wavelengths_h);
  HyperCube out;
  out.width = y_s.cube.width;
  out.height = y_s.cube.height;
  out.wavelengths = wavelengths_h;
  out.data = (w * y_s.cube.data).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

AcquisitionPair simulate_pair(const SceneSpec& spec, const SrtMatrix& srt, const std::vector<SensorBand>& sensor,
                              double blur_sigma) {
  Scene scene = synth_scene(spec);
  const HyperCube msi = apply_srt(srt, scene.cube, centers(sensor));
  AcquisitionPair pair;
  pair.y_s = degrade_multires(msi, res_classes(sensor), blur_sigma);
  pair.y_h = std::move(scene.cube);
  pair.mixing = std::move(scene.mixing);
  return pair;
}

}  // namespace s2h
