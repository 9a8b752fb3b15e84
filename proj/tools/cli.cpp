#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "s2h/bss.hpp"
#include "s2h/checkpoint.hpp"
#include "s2h/envi.hpp"
#include "s2h/learn.hpp"
#include "s2h/metrics.hpp"
#include "s2h/model.hpp"
#include "s2h/parallel.hpp"
#include "s2h/simulate.hpp"
#include "s2h/table_io.hpp"

namespace s2h::cli {
namespace {

namespace fs = std::filesystem;

struct Key {
  std::string name;
  std::string fallback;  // empty: no fixed default (derived from other keys)
  std::string help;
};

// Keys of one subcommand: `--key value` on the command line, `key = value` in
// the --config file. Command-line values win over the file.
class KeySet {
 public:
  KeySet(CLI::App* app, std::vector<Key> keys) : keys_(std::move(keys)) {
    app->add_option("--config", config_path_, "key = value file; command-line keys override it");
    for (const Key& k : keys_) {
      std::string help = k.help;
      if (!k.fallback.empty()) help += " [" + k.fallback + "]";
      options_[k.name] = app->add_option("--" + k.name, given_[k.name], help);
    }
  }

  KvConfig resolve() const {
    KvConfig cfg;
    if (!config_path_.empty()) {
      if (!fs::exists(config_path_)) fail(ErrorCode::Io, "config file '" + config_path_ + "' not found");
      const KvConfig file = KvConfig::load(config_path_);
      for (const auto& [key, value] : file.values()) {
        if (!known(key)) fail(ErrorCode::ConfigError, "unknown key '" + key + "' in " + config_path_);
        cfg.set(key, value);
      }
    }
    for (const Key& k : keys_) {
      if (options_.at(k.name)->count() > 0) {
        cfg.set(k.name, given_.at(k.name));
      } else if (!cfg.has(k.name) && !k.fallback.empty()) {
        cfg.set(k.name, k.fallback);
      }
    }
    return cfg;
  }

 private:
  bool known(const std::string& key) const {
    return std::any_of(keys_.begin(), keys_.end(), [&](const Key& k) { return k.name == key; });
  }

  std::vector<Key> keys_;
  std::string config_path_;
  std::map<std::string, std::string> given_;
  std::map<std::string, CLI::Option*> options_;
};

void append(std::vector<Key>& dst, const std::vector<Key>& src) { dst.insert(dst.end(), src.begin(), src.end()); }

std::vector<Key> common_keys() {
  return {{"threads", "0", "worker threads, 0 = all cores"},
          {"deterministic", "true", "ordered reductions (always on; accepted for scripts)"}};
}

std::vector<Key> scene_keys() {
  return {{"width", "24", "scene width in pixels"},
          {"height", "24", "scene height in pixels"},
          {"n_sources", "4", "endmembers per scene"},
          {"noise_sigma", "0", "additive Gaussian noise on the hyperspectral cube"},
          {"library_size", "8", "material library size, 0 = fresh spectra per scene"},
          {"library_seed", "7", "material library seed"},
          {"brightness_jitter", "0.15", "per-scene endmember brightness jitter"},
          {"blur_sigma", "1", "blur before MED/LOW block averaging"}};
}

std::vector<Key> pipeline_keys() {
  return {{"strategy", "", "mathematical | learnable | hybrid [learnable]"},
          {"stages", "", "unfolding stages (strategy default)"},
          {"rho", "", "ADMM penalty (strategy default)"},
          {"learn_rho", "", "train rho"},
          {"share_d", "", "one D shared by all stages"},
          {"prox", "", "denoiser | tv"},
          {"phi_mode", "", "learned | exact"},
          {"tv_weight", "", "spectral TV weight"},
          {"tv_solver", "", "taut_string | split_bregman"},
          {"tol", "", "residual stop, 0 disables"},
          {"denoiser_blocks", "", "residual blocks per stage denoiser"},
          {"denoiser_convs", "", "convolutions per denoiser block"},
          {"bands_h", "", "hyperspectral bands [32]"},
          {"bands_m", "", "multispectral bands [6]"},
          {"n_hr", "", "HR bands fed to fusion"},
          {"res_blocks", "", "fusion residual blocks"},
          {"spectral_attention", "", "enable spectral attention"},
          {"spatial_attention", "", "enable spatial attention"}};
}

KvConfig subset(const KvConfig& cfg, const std::vector<std::string>& keys) {
  KvConfig out;
  for (const auto& k : keys) {
    if (cfg.has(k)) out.set(k, cfg.get(k));
  }
  return out;
}

void merge(KvConfig& dst, const KvConfig& src) {
  for (const auto& [k, v] : src.values()) dst.set(k, v);
}

void echo(const std::string& command, const KvConfig& resolved) {
  std::cerr << "# s2h " << command << " resolved configuration\n" << resolved.to_string();
}

void apply_common(const KvConfig& cfg) {
  const long long threads = cfg.get_int("threads");
  require(threads >= 0, ErrorCode::ConfigError, "threads must be >= 0");
  set_thread_count(static_cast<int>(threads));
  cfg.get_bool("deterministic");
}

std::string require_key(const KvConfig& cfg, const std::string& key) {
  if (!cfg.has(key) || cfg.get(key).empty()) fail(ErrorCode::ConfigError, "--" + key + " is required");
  return cfg.get(key);
}

void require_input(const fs::path& p) {
  const fs::path hdr = envi_header_path(p);
  if (!fs::exists(p) && !fs::exists(hdr)) fail(ErrorCode::Io, "input '" + p.string() + "' not found");
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) fail(ErrorCode::Io, "file '" + p.string() + "' not found");
}

void prepare_parent(const fs::path& p) {
  const fs::path parent = p.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec || !fs::is_directory(parent)) fail(ErrorCode::Io, "cannot create directory '" + parent.string() + "'");
}

void prepare_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) fail(ErrorCode::Io, "cannot create directory '" + p.string() + "'");
}

std::ofstream open_out(const fs::path& p) {
  prepare_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write '" + p.string() + "'");
  return out;
}

std::vector<double> index_wavelengths(int n) {
  std::vector<double> wl(static_cast<std::size_t>(n));
  std::iota(wl.begin(), wl.end(), 1.0);
  return wl;
}

SceneSpec scene_from(const KvConfig& cfg, int bands_h, int bands_m) {
  SceneSpec s;
  s.width = static_cast<int>(cfg.get_int("width"));
  s.height = static_cast<int>(cfg.get_int("height"));
  s.bands_h = bands_h;
  s.bands_m = bands_m;
  s.n_sources = static_cast<int>(cfg.get_int("n_sources"));
  s.noise_sigma = cfg.get_double("noise_sigma");
  s.library_size = static_cast<int>(cfg.get_int("library_size"));
  s.library_seed = static_cast<std::uint64_t>(cfg.get_int("library_seed"));
  s.brightness_jitter = cfg.get_double("brightness_jitter");
  if (validate_scene_spec(s) != ErrorCode::Ok) fail(ErrorCode::InvalidSpec, "invalid scene specification");
  return s;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const KvConfig& cfg) {
  apply_common(cfg);
  const fs::path out = require_key(cfg, "out");
  const int bands_h = static_cast<int>(cfg.get_int("bands_h"));
  const int bands_m = static_cast<int>(cfg.get_int("bands_m"));
  SceneSpec spec = scene_from(cfg, bands_h, bands_m);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const double blur = cfg.get_double("blur_sigma");

  KvConfig scene = spec.to_config();
  scene.set("blur_sigma", format_double(blur));
  KvConfig resolved = scene;
  resolved.set("out", out.string());
  merge(resolved, subset(cfg, {"threads", "deterministic"}));
  echo("simulate", resolved);

  const auto sensor = sensor_for(bands_m);
  const auto wl = hyperspectral_wavelengths(bands_h);
  const SrtMatrix srt = make_srt(sensor, wl);
  const AcquisitionPair pair = simulate_pair(spec, srt, sensor, blur);

  prepare_dir(out);
  write_envi(pair.y_h, out / "y_h");
  write_multires(pair.y_s, out / "y_s");
  write_srt_csv(out / "srt.csv", srt, centers(sensor), wl);
  write_endmembers_csv(out / "endmembers.csv", pair.mixing.endmembers, wl);
  HyperCube abundances(spec.n_sources, spec.width, spec.height, index_wavelengths(spec.n_sources));
  abundances.data = pair.mixing.abundances;
  write_envi(abundances, out / "abundances");
  scene.save(out / "scene.cfg");
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<Sample> make_samples(const SceneSpec& base, const SrtMatrix& srt, const std::vector<SensorBand>& sensor,
                                 double blur, int count, std::uint64_t first_seed) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SceneSpec s = base;
    s.seed = first_seed + static_cast<std::uint64_t>(i);
    AcquisitionPair p = simulate_pair(s, srt, sensor, blur);
    out.push_back(Sample{std::move(p.y_s), std::move(p.y_h)});
  }
  return out;
}

int cmd_train(const KvConfig& cfg) {
  apply_common(cfg);
  const fs::path out = require_key(cfg, "out");
  const fs::path log_path = cfg.get_or("log", "").empty() ? fs::path(out.string() + ".log.csv") : fs::path(cfg.get("log"));
  const std::string d_init = cfg.get("d_init");
  require(d_init == "srt" || d_init == "xavier", ErrorCode::ConfigError, "d_init must be srt or xavier");

  auto pkeys = PipelineConfig::config_keys();
  const PipelineConfig pc = PipelineConfig::from_config(subset(cfg, pkeys));
  const TrainConfig tc = TrainConfig::from_config(subset(cfg, TrainConfig::config_keys()));
  const SceneSpec base = scene_from(cfg, pc.bands_h, pc.bands_m);
  const double blur = cfg.get_double("blur_sigma");
  const int n_train = static_cast<int>(cfg.get_int("n_train"));
  const int n_val = static_cast<int>(cfg.get_int("n_val"));
  const auto data_seed = static_cast<std::uint64_t>(cfg.get_int("data_seed"));
  require(n_train >= 1 && n_val >= 1, ErrorCode::ConfigError, "n_train and n_val must be positive");

  KvConfig resolved;
  pc.to_config(resolved);
  tc.to_config(resolved);
  KvConfig data_cfg = base.to_config();
  data_cfg.erase("seed");
  for (const char* k : {"blur_sigma", "n_train", "n_val", "data_seed", "d_init"}) data_cfg.set(k, cfg.get(k));
  KvConfig extra = resolved;
  merge(extra, data_cfg);
  merge(resolved, data_cfg);
  resolved.set("out", out.string());
  resolved.set("log", log_path.string());
  merge(resolved, subset(cfg, {"threads", "deterministic"}));
  echo("train", resolved);

  const auto sensor = sensor_for(pc.bands_m);
  const SrtMatrix srt = make_srt(sensor, pc.wavelengths_h());
  const auto train_set = make_samples(base, srt, sensor, blur, n_train, data_seed);
  const auto val_set = make_samples(base, srt, sensor, blur, n_val, data_seed + 100000);

  PipelineParams params = init_pipeline(pc, d_init == "srt" ? &srt : nullptr, tc.seed);
  std::ofstream log = open_out(log_path);
  prepare_parent(out);
  std::cout << "epoch,lr,train_loss,val_loss\n";
  try {
    train(pc, params, train_set, val_set, tc, &log, [](const EpochRecord& r) {
      std::cout << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.train_loss) << ','
                << format_double(r.val_loss) << '\n'
                << std::flush;
    });
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFinite) {
      save_pipeline(out, pc, params, extra);
      std::cerr << "training diverged; last finite parameters saved to " << out << '\n';
    }
    throw;
  }
  save_pipeline(out, pc, params, extra);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_superresolve(const KvConfig& cfg) {
  apply_common(cfg);
  const fs::path input = require_key(cfg, "input");
  const fs::path out = require_key(cfg, "out");
  const std::string ckpt = cfg.get_or("checkpoint", "");
  require_input(input);
  if (!ckpt.empty()) require_file(ckpt);
  if (cfg.has("srt")) require_file(cfg.get("srt"));
  prepare_parent(out);

  const MultiResCube y_s = read_multires(input);
  KvConfig resolved;
  HyperCube result;
  double seconds = 0.0;

  if (!ckpt.empty()) {
    for (const auto& k : UnfoldConfig::config_keys()) {
      if (cfg.has(k)) fail(ErrorCode::ConfigError, "--" + k + " is fixed by the checkpoint");
    }
    if (cfg.has("bands_h") || cfg.has("srt")) fail(ErrorCode::ConfigError, "--bands_h/--srt are fixed by the checkpoint");
    const LoadedPipeline lp = load_pipeline(ckpt);
    lp.config.to_config(resolved);
    resolved.set("checkpoint", ckpt);
    resolved.set("input", input.string());
    resolved.set("out", out.string());
    merge(resolved, subset(cfg, {"threads", "deterministic"}));
    echo("superresolve", resolved);
    if (y_s.cube.bands() != lp.config.bands_m) {
      fail(ErrorCode::ShapeMismatch, "checkpoint expects " + std::to_string(lp.config.bands_m) +
                                         " multispectral bands, input has " + std::to_string(y_s.cube.bands()));
    }
    const auto t0 = std::chrono::steady_clock::now();
    PipelineOutput o = pipeline_forward(lp.config, lp.params, y_s);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result = std::move(o.y_star);
  } else {
    const UnfoldConfig ucfg = UnfoldConfig::from_config(subset(cfg, UnfoldConfig::config_keys()));
    if (ucfg.strategy != Strategy::Mathematical) {
      fail(ErrorCode::ConfigError, "strategy " + std::string(to_string(ucfg.strategy)) + " needs --checkpoint");
    }
    SrtMatrix srt;
    std::vector<double> wl;
    if (cfg.has("srt")) {
      SrtTable t = read_srt_csv(cfg.get("srt"));
      srt = std::move(t.srt);
      wl = std::move(t.wavelengths_h);
    } else {
      const int bands_h = static_cast<int>(parse_int(cfg.get_or("bands_h", "32")));
      wl = hyperspectral_wavelengths(bands_h);
      srt = make_srt(sensor_for(y_s.cube.bands()), wl);
    }
    if (srt.ms_bands() != y_s.cube.bands()) {
      fail(ErrorCode::ShapeMismatch, "SRT has " + std::to_string(srt.ms_bands()) + " rows, input has " +
                                         std::to_string(y_s.cube.bands()) + " bands");
    }
    ucfg.to_config(resolved);
    resolved.set("bands_h", std::to_string(srt.hs_bands()));
    resolved.set("srt", cfg.get_or("srt", "sensor"));
    resolved.set("input", input.string());
    resolved.set("out", out.string());
    merge(resolved, subset(cfg, {"threads", "deterministic"}));
    echo("superresolve", resolved);
    const UnfoldParams params = init_unfold_params(ucfg, srt.ms_bands(), srt.hs_bands(), &srt, 0);
    const auto t0 = std::chrono::steady_clock::now();
    UnfoldTrace trace;
    result = run_unfolding(y_s, ucfg, params, wl, &trace);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!trace.residual.empty()) {
      std::cerr << "stages " << trace.stages_run << ", residual " << format_double(trace.residual.back()) << '\n';
    }
  }
  write_envi(result, out);
  std::cout << "seconds,pixels\n" << format_double(seconds) << ',' << result.pixels() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_unmix(const KvConfig& cfg) {
  apply_common(cfg);
  const fs::path input = require_key(cfg, "input");
  const fs::path out = require_key(cfg, "out");
  require_input(input);
  const int n_sources = static_cast<int>(cfg.get_int("n_sources"));
  const int n_max = static_cast<int>(cfg.get_int("n_max"));
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  KvConfig resolved = subset(cfg, {"input", "out", "n_sources", "n_max", "seed", "threads", "deterministic"});
  echo("unmix", resolved);

  const HyperCube y = read_envi(input);
  const UnmixResult r = unmix(y, n_sources, seed, n_max);

  prepare_dir(out);
  HyperCube all(r.n_sources, y.width, y.height, index_wavelengths(r.n_sources));
  all.data = r.abundances;
  write_envi(all, out / "abundances");
  for (int k = 0; k < r.n_sources; ++k) {
    HyperCube one(1, y.width, y.height, {1.0});
    one.data = r.abundances.row(k);
    write_envi(one, out / ("abundance_" + std::to_string(k + 1)));
  }
  write_endmembers_csv(out / "endmembers.csv", r.endmembers, y.wavelengths);
  std::ofstream px = open_out(out / "pixels.csv");
  px << "source,pixel,row,col\n";
  for (std::size_t k = 0; k < r.pixel_indices.size(); ++k) {
    const Eigen::Index p = r.pixel_indices[k];
    px << k + 1 << ',' << p << ',' << p / y.width << ',' << p % y.width << '\n';
  }
  std::cout << "n_sources\n" << r.n_sources << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const KvConfig& cfg) {
  apply_common(cfg);
  const fs::path input = require_key(cfg, "input");
  const fs::path reference = require_key(cfg, "reference");
  require_input(input);
  require_input(reference);
  KvConfig resolved = subset(cfg, {"input", "reference", "sam_map", "csv", "threads", "deterministic"});
  echo("evaluate", resolved);

  const HyperCube x = read_envi(input);
  const HyperCube ref = read_envi(reference);
  const MetricReport r = evaluate(x, ref);
  const std::string csv = metric_csv_header() + "\n" + metric_csv_row(r) + "\n";
  std::cerr << metric_table(r);
  std::cout << csv;
  if (cfg.has("csv") && !cfg.get("csv").empty()) {
    std::ofstream f = open_out(cfg.get("csv"));
    f << csv;
  }
  if (cfg.has("sam_map") && !cfg.get("sam_map").empty()) {
    prepare_parent(cfg.get("sam_map"));
    write_envi(r.sam_map, cfg.get("sam_map"));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

// Synthetic bench input of side x side pixels. The 6x6 class needs sides
// divisible by 6; otherwise those bands are degraded on the 2x2 grid, which
// leaves the per-pixel work unchanged.
MultiResCube bench_input(const PipelineConfig& pc, int side, std::uint64_t seed) {
  const auto sensor = sensor_for(pc.bands_m);
  const auto wl = pc.wavelengths_h();
  const SrtMatrix srt = make_srt(sensor, wl);
  const int n = 4;
  const Matrix e = material_library(wl, n, seed);
  const Matrix a = smooth_abundances(side, side, n, seed + 1);
  const HyperCube y_h = mix_cube(e, a, side, side, wl, 0.0, seed + 2);
  auto classes = res_classes(sensor);
  for (auto& c : classes) {
    if (side % block_side(c) != 0) c = ResClass::MED;
  }
  return degrade_multires(apply_srt(srt, y_h, centers(sensor)), classes, 1.0);
}

int cmd_bench(const KvConfig& cfg) {
  apply_common(cfg);
  std::vector<int> sides;
  for (const auto& s : split_list(cfg.get("sizes"))) sides.push_back(static_cast<int>(parse_int(s)));
  std::sort(sides.begin(), sides.end());
  sides.erase(std::unique(sides.begin(), sides.end()), sides.end());
  require(sides.size() >= 3, ErrorCode::ConfigError, "bench needs at least 3 distinct sizes");
  require(sides.front() >= 2 && std::all_of(sides.begin(), sides.end(), [](int s) { return s % 2 == 0; }),
          ErrorCode::ConfigError, "bench sizes must be even sides >= 2");
  const int reps = static_cast<int>(cfg.get_int("reps"));
  require(reps >= 1, ErrorCode::ConfigError, "reps must be >= 1");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const std::string ckpt = cfg.get_or("checkpoint", "");
  if (!ckpt.empty()) require_file(ckpt);

  PipelineConfig pc;
  PipelineParams params;
  if (!ckpt.empty()) {
    for (const auto& k : PipelineConfig::config_keys()) {
      if (cfg.has(k)) fail(ErrorCode::ConfigError, "--" + k + " is fixed by the checkpoint");
    }
    LoadedPipeline lp = load_pipeline(ckpt);
    pc = lp.config;
    params = std::move(lp.params);
  } else {
    pc = PipelineConfig::from_config(subset(cfg, PipelineConfig::config_keys()));
    const SrtMatrix srt = make_srt(sensor_for(pc.bands_m), pc.wavelengths_h());
    params = init_pipeline(pc, &srt, seed);
  }

  KvConfig resolved;
  pc.to_config(resolved);
  merge(resolved, subset(cfg, {"sizes", "reps", "seed", "checkpoint", "out", "threads", "deterministic"}));
  echo("bench", resolved);

  struct Row {
    long long pixels;
    double median;
    double stddev;
  };
  std::vector<Row> rows;
  bool noisy = false;
  for (const int side : sides) {
    const MultiResCube y_s = bench_input(pc, side, seed);
    pipeline_forward(pc, params, y_s);  // warm-up, untimed
    std::vector<double> t;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      pipeline_forward(pc, params, y_s);
      t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::vector<double> sorted = t;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(m);
    double var = 0.0;
    for (double v : t) var += (v - mean) * (v - mean);
    const double stddev = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;
    if (stddev > 0.5 * median) noisy = true;
    rows.push_back({static_cast<long long>(side) * side, median, stddev});
  }

  // least-squares slope of log(time) against log(pixels)
  double mx = 0.0, my = 0.0;
  for (const Row& r : rows) {
    mx += std::log(static_cast<double>(r.pixels));
    my += std::log(r.median);
  }
  mx /= static_cast<double>(rows.size());
  my /= static_cast<double>(rows.size());
  double sxy = 0.0, sxx = 0.0;
  for (const Row& r : rows) {
    const double dx = std::log(static_cast<double>(r.pixels)) - mx;
    sxy += dx * (std::log(r.median) - my);
    sxx += dx * dx;
  }
  const double slope = sxy / sxx;

  std::ostringstream csv;
  csv << "pixels,reps,median_s,stddev_s,slope\n";
  for (const Row& r : rows) {
    csv << r.pixels << ',' << reps << ',' << format_double(r.median) << ',' << format_double(r.stddev) << ','
        << format_double(slope) << '\n';
  }
  std::cout << csv.str();
  if (cfg.has("out") && !cfg.get("out").empty()) {
    std::ofstream f = open_out(cfg.get("out"));
    f << csv.str();
  }
  if (noisy) {
    std::cerr << "timing spread above half the median; machine too noisy for a scaling fit\n";
    return kExitEnvironment;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::HeaderParse:
    case ErrorCode::PayloadSizeMismatch:
    case ErrorCode::UnsupportedInterleave:
    case ErrorCode::Io:
      return kExitIo;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::WavelengthOrder:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
    case ErrorCode::TooFewBands:
    case ErrorCode::TooFewPixels:
    case ErrorCode::OddDimensions:
    case ErrorCode::MissingHrBands:
    case ErrorCode::TooSmallForWindow:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Spectral super-resolution of multi-resolution multispectral images"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::unique_ptr<KeySet> keys;
    int (*fn)(const KvConfig&);
  };
  std::vector<Command> commands;
  auto add = [&](const char* name, const char* help, std::vector<Key> keys, int (*fn)(const KvConfig&)) {
    append(keys, common_keys());
    CLI::App* sub = app.add_subcommand(name, help);
    commands.push_back({sub, std::make_unique<KeySet>(sub, std::move(keys)), fn});
  };

  {
    std::vector<Key> k = scene_keys();
    append(k, {{"bands_h", "32", "hyperspectral bands"},
               {"bands_m", "6", "multispectral bands (12, 6, 4 or 2)"},
               {"seed", "1", "scene seed"},
               {"out", "", "output directory"}});
    add("simulate", "Generate a synthetic scene and its multi-resolution observation", std::move(k), cmd_simulate);
  }
  {
    std::vector<Key> k = pipeline_keys();
    append(k, {{"epochs", "40", "training epochs"},
               {"batch_size", "4", "samples per step"},
               {"lr", "1e-4", "Adam learning rate"},
               {"milestones", "30,60,90", "epochs after which the rate is scaled"},
               {"lr_factor", "0.5", "rate factor per milestone"},
               {"seed", "1", "initialisation and shuffling seed"},
               {"lambda", "1e-4", "TV regularisation weight of the loss"},
               {"normalize_l1", "true", "divide l1 terms by the entry count"}});
    append(k, scene_keys());
    append(k, {{"n_train", "64", "training pairs"},
               {"n_val", "16", "validation pairs"},
               {"data_seed", "1000", "seed of the first training scene"},
               {"d_init", "srt", "initial D: srt (sensor response) | xavier"},
               {"out", "", "checkpoint path"},
               {"log", "", "CSV training log (default <out>.log.csv)"}});
    add("train", "Train the pipeline on synthetic pairs", std::move(k), cmd_train);
  }
  add("superresolve", "Reconstruct the hyperspectral cube from a multi-resolution input",
      {{"input", "", "multi-resolution input cube"},
       {"out", "", "output cube"},
       {"checkpoint", "", "trained pipeline (optional for the mathematical strategy)"},
       {"srt", "", "SRT CSV for the mathematical strategy (default: sensor response)"},
       {"strategy", "", "mathematical without a checkpoint"},
       {"stages", "", "unfolding stages"},
       {"rho", "", "ADMM penalty"},
       {"tv_weight", "", "spectral TV weight"},
       {"tv_solver", "", "taut_string | split_bregman"},
       {"tol", "", "residual stop"},
       {"bands_h", "", "hyperspectral bands when no SRT is given [32]"}},
      cmd_superresolve);
  add("unmix", "Estimate endmembers and abundances",
      {{"input", "", "input cube"},
       {"out", "", "output directory"},
       {"n_sources", "0", "sources, 0 = estimate with MDL"},
       {"n_max", "15", "largest order MDL considers"},
       {"seed", "1", "VCA seed"}},
      cmd_unmix);
  add("evaluate", "Compare a reconstruction against a reference",
      {{"input", "", "reconstructed cube"},
       {"reference", "", "reference cube"},
       {"sam_map", "", "write the per-pixel SAM map here"},
       {"csv", "", "also write the metric CSV here"}},
      cmd_evaluate);
  {
    std::vector<Key> k = {{"sizes", "64,128,256,512", "image sides in pixels"},
                          {"reps", "3", "timed runs per size"},
                          {"seed", "1", "input and initialisation seed"},
                          {"checkpoint", "", "trained pipeline (default: untrained weights)"},
                          {"out", "", "also write the CSV report here"}};
    append(k, pipeline_keys());
    add("bench", "Time the pipeline forward pass over image sizes", std::move(k), cmd_bench);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      return c.fn(c.keys->resolve());
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_code_for(e.code());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitFailure;
}

}  // namespace s2h::cli
