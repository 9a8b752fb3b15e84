#include "support.hpp"

#include <fstream>
#include <iterator>

#include "s2h/simulate.hpp"

namespace s2h::test {

HyperCube random_cube(int bands, int width, int height, std::uint64_t seed, double lo, double hi) {
  std::vector<double> wl(static_cast<std::size_t>(bands));
  for (int b = 0; b < bands; ++b) wl[static_cast<std::size_t>(b)] = 400.0 + 10.0 * b;
  HyperCube c(bands, width, height, wl);
  c.data = random_matrix(bands, static_cast<Eigen::Index>(width) * height, seed, lo, hi);
  return c;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

Matrix naive_conv2d(const Conv2d& c, const Matrix& x, int width, int height) {
  Matrix out(c.out_ch, x.cols());
  for (int o = 0; o < c.out_ch; ++o) {
    for (int r = 0; r < height; ++r) {
      for (int col = 0; col < width; ++col) {
        double s = c.bias(o, 0);
        for (int dy = 0; dy < c.ksize; ++dy) {
          for (int dx = 0; dx < c.ksize; ++dx) {
            const int rr = mirror(r + dy - c.ksize / 2, height);
            const int cc = mirror(col + dx - c.ksize / 2, width);
            for (int i = 0; i < c.in_ch; ++i) {
              s += c.weight(o, (dy * c.ksize + dx) * c.in_ch + i) * x(i, rr * width + cc);
            }
          }
        }
        out(o, r * width + col) = s;
      }
    }
  }
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("s2h_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Sample> desk_samples(int count, std::uint64_t first_seed, int bands_h, int bands_m, int side,
                                 int n_sources) {
  const auto sensor = sensor_for(bands_m);
  const SrtMatrix srt = make_srt(sensor, hyperspectral_wavelengths(bands_h));
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    SceneSpec spec;
    spec.width = side;
    spec.height = side;
    spec.bands_h = bands_h;
    spec.bands_m = bands_m;
    spec.n_sources = n_sources;
    spec.seed = first_seed + static_cast<std::uint64_t>(i);
    AcquisitionPair p = simulate_pair(spec, srt, sensor, 1.0);
    out.push_back(Sample{std::move(p.y_s), std::move(p.y_h)});
  }
  return out;
}

std::vector<Sample> toy_samples(int count, std::uint64_t seed) {
  const auto sensor = sensor_for(2);
  const auto wl = hyperspectral_wavelengths(6);
  const SrtMatrix srt = make_srt(sensor, wl);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed + 17 * static_cast<std::uint64_t>(i);
    const Matrix e = random_matrix(6, 3, s, 0.1, 0.9);
    Matrix a = random_matrix(3, 16, s + 1, 0.0, 1.0);
    for (Eigen::Index p = 0; p < a.cols(); ++p) a.col(p) /= a.col(p).sum();
    HyperCube y_h(6, 4, 4, wl);
    y_h.data = e * a;
    MultiResCube y_s{apply_srt(srt, y_h, centers(sensor)), res_classes(sensor)};
    out.push_back(Sample{std::move(y_s), std::move(y_h)});
  }
  return out;
}

PipelineConfig toy_config(Strategy strategy) {
  PipelineConfig c;
  c.bands_h = 6;
  c.bands_m = 2;
  c.unfold = UnfoldConfig::for_strategy(strategy);
  c.unfold.stages = 3;
  c.unfold.learn_rho = true;
  c.unfold.share_d = false;
  c.unfold.tol = 0.0;
  c.fusion.n_hr = 2;
  c.fusion.res_blocks = 1;
  return c;
}

}  // namespace s2h::test
