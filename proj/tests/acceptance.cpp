// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "s2h/bss.hpp"
#include "s2h/checkpoint.hpp"
#include "s2h/envi.hpp"
#include "s2h/learn.hpp"
#include "s2h/metrics.hpp"
#include "s2h/prox.hpp"
#include "s2h/simulate.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace s2h;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Y-step against a dense solve of (2 D^T D + rho I) Y = X

Outcome c1_woodbury() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ulog(std::log(1e-2), std::log(1e2));
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Matrix d = test::random_matrix(6, 32, 1000 + t, 0.0, 1.0);
    const double rho = std::exp(ulog(rng));
    const Matrix y_s = test::random_matrix(6, 50, 2000 + t);
    const Matrix vu = test::random_matrix(32, 50, 3000 + t);
    const Matrix got = y_step_closed_form(d, rho, y_s, vu);
    const Matrix x = 2.0 * d.transpose() * y_s + rho * vu;
    const Matrix a = 2.0 * d.transpose() * d + rho * Matrix::Identity(32, 32);
    const Matrix want = a.fullPivLu().solve(x);
    worst = std::max(worst, (got - want).norm() / want.norm());
  }
  return {worst <= 1e-10, "max relative error " + fmt("%.3e", worst) + " (tol 1e-10, 200 draws)"};
}

// ---------------------------------------------------------------------------
// 2. Split Bregman against the taut string

Outcome c2_prox() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> len(2, 64);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Vector z(len(rng));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = val(rng);
    const TvWeight w(lam(rng));
    const Vector exact = prox_tv1d_taut_string(z, w);
    const Vector sb = prox_tv1d_split_bregman(z, w).v;
    worst = std::max(worst, (exact - sb).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "max |split_bregman - taut_string| " + fmt("%.3e", worst) + " (tol 1e-6, 1000 vectors)"};
}

// ---------------------------------------------------------------------------
// 3. Central finite differences on every parameter block

Outcome c3_gradients() {
  const auto data = test::toy_samples(2, 31);
  LossSpec spec;
  spec.lambda = 1e-2;
  double worst = 0.0;
  std::string where;
  std::set<std::string> blocks;
  for (Strategy s : {Strategy::Learnable, Strategy::Hybrid}) {
    const PipelineConfig cfg = test::toy_config(s);
    const SrtMatrix srt = make_srt(sensor_for(2), hyperspectral_wavelengths(6));
    PipelineParams params = init_pipeline(cfg, &srt, 7);
    // move attention away from its neutral start
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (Eigen::Index i = 0; i < params.fusion.fc_weight.size(); ++i) params.fusion.fc_weight(i) = nd(rng);
    for (Eigen::Index i = 0; i < params.fusion.fc_bias.size(); ++i) params.fusion.fc_bias(i) = nd(rng);
    const auto res = grad_check_pipeline(cfg, params, data, spec, 1e-5);
    for (const auto& [block, r] : res) {
      blocks.insert(block);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = std::string(to_string(s)) + ":" + r.worst;
      }
    }
  }
  const bool all_blocks = blocks.count("d") && blocks.count("log_rho") && blocks.count("phi") &&
                          blocks.count("denoiser") && blocks.count("fusion");
  return {all_blocks && worst <= 1e-4,
          "max relative error " + fmt("%.3e", worst) + " at " + where + " over " + std::to_string(blocks.size()) +
              " blocks (tol 1e-4, eps 1e-5)"};
}

// ---------------------------------------------------------------------------
// 4. Fusion algebra

Outcome c4_fusion() {
  const int m = 32, w = 8, h = 6;
  const HyperCube y = test::random_cube(m, w, h, 41);
  const Vector ws = test::random_matrix(m, 1, 42, 0.0, 1.0);
  const Vector wp = test::random_matrix(w * h, 1, 43, 0.0, 1.0);
  const Matrix dense = Matrix(ws.asDiagonal()) * y.data * Matrix(wp.asDiagonal());
  const double algebra = (emphasize(ws, y, wp).data - dense).cwiseAbs().maxCoeff();

  const HyperCube small = test::random_cube(m, w / 2, h / 2, 44);
  const bool identity = downsample_avg4(upsample_kron4(small)).data == small.data;

  std::mt19937_64 rng(45);
  FusionParams p = FusionParams::random(m, 4, 1, rng);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < p.fc_weight.size(); ++i) p.fc_weight(i) = nd(rng);
  for (Eigen::Index i = 0; i < p.fc_bias.size(); ++i) p.fc_bias(i) = nd(rng);
  double lo = 1.0, hi = 0.0;
  for (int t = 0; t < 20; ++t) {
    const HyperCube yd = test::random_cube(m, w / 2, h / 2, 500 + t);
    const HyperCube hr = test::random_cube(4, w, h, 600 + t);
    const Vector a = spectral_attention(yd, p);
    const Vector b = spatial_attention(hr, p);
    lo = std::min({lo, a.minCoeff(), b.minCoeff()});
    hi = std::max({hi, a.maxCoeff(), b.maxCoeff()});
  }
  const bool open = lo > 0.0 && hi < 1.0;
  return {algebra <= 1e-12 && identity && open,
          "emphasis vs dense " + fmt("%.3e", algebra) + " (tol 1e-12); down(up(x)) == x " +
              (identity ? "exact" : "NOT exact") + "; attention range [" + fmt("%.4f", lo) + ", " +
              fmt("%.4f", hi) + "] inside (0,1)"};
}

// ---------------------------------------------------------------------------
// 5. Mathematical strategy on a consistent problem

Outcome c5_admm() {
  SceneSpec spec;
  spec.width = spec.height = 24;
  spec.bands_h = 32;
  spec.bands_m = 6;
  spec.seed = 5;
  const auto sensor = desk_sensor_bands();
  const auto wl = hyperspectral_wavelengths(32);
  const SrtMatrix srt = make_srt(sensor, wl);
  const Scene sc = synth_scene(spec);
  const MultiResCube y_s{apply_srt(srt, sc.cube, centers(sensor)), std::vector<ResClass>(6, ResClass::HR)};

  UnfoldConfig cfg = UnfoldConfig::for_strategy(Strategy::Mathematical);
  cfg.stages = 50;
  cfg.tol = 1e-6;
  const UnfoldParams p = init_unfold_params(cfg, 6, 32, &srt, 0);
  UnfoldTrace trace;
  const HyperCube out = run_unfolding(y_s, cfg, p, wl, &trace);
  const double resid = trace.residual.empty() ? 1.0 : trace.residual.back();
  const double fit = (srt.d * out.data - y_s.cube.data).norm() / y_s.cube.data.norm();
  return {resid < 1e-6 && trace.stages_run <= 50 && fit <= 1e-3,
          "residual " + fmt("%.3e", resid) + " after " + std::to_string(trace.stages_run) +
              " stages (tol 1e-6 within 50); data fit " + fmt("%.3e", fit) + " (tol 1e-3)"};
}

// ---------------------------------------------------------------------------
// 6 and 7. Desk-scale training

struct HeldOut {
  double sam = 0.0;
  double rmse = 0.0;
};

HeldOut score(const std::vector<Sample>& val, const std::function<HyperCube(const Sample&)>& predict) {
  HeldOut h;
  for (const auto& s : val) {
    const HyperCube y = predict(s);
    h.sam += sam(y, s.y_h).mean_deg;
    h.rmse += rmse(y, s.y_h);
  }
  h.sam /= static_cast<double>(val.size());
  h.rmse /= static_cast<double>(val.size());
  return h;
}

struct DeskData {
  std::vector<Sample> train;
  std::vector<Sample> val;
  SrtMatrix srt;
};

const DeskData& desk_data() {
  static const DeskData d = [] {
    DeskData out;
    out.train = test::desk_samples(64, 1000);
    out.val = test::desk_samples(16, 101000);
    out.srt = make_srt(sensor_for(6), hyperspectral_wavelengths(32));
    return out;
  }();
  return d;
}

HeldOut train_and_score(bool spectral_attention, std::uint64_t seed) {
  const DeskData& data = desk_data();
  PipelineConfig cfg;
  cfg.unfold = UnfoldConfig::for_strategy(Strategy::Learnable);
  cfg.fusion.spectral_attention = spectral_attention;
  PipelineParams params = init_pipeline(cfg, &data.srt, seed);
  TrainConfig t;
  t.epochs = 40;
  t.batch_size = 4;
  t.lr = 1e-4;
  t.seed = seed;
  train(cfg, params, data.train, data.val, t);
  return score(data.val, [&](const Sample& s) { return pipeline_forward(cfg, params, s.y_s).y_star; });
}

HeldOut& trained_seed1() {
  static HeldOut h = train_and_score(true, 1);
  return h;
}

Outcome c6_learning() {
  const DeskData& data = desk_data();
  const auto wl = hyperspectral_wavelengths(32);
  const HeldOut base = score(data.val, [&](const Sample& s) { return spectral_upsample_init(s.y_s, wl); });
  const HeldOut net = trained_seed1();
  const double sam_drop = 1.0 - net.sam / base.sam;
  const double rmse_drop = 1.0 - net.rmse / base.rmse;
  return {sam_drop >= 0.30 && rmse_drop >= 0.25,
          "held-out SAM " + fmt("%.3f", net.sam) + " vs baseline " + fmt("%.3f", base.sam) + " deg (" +
              fmt("%.1f", 100 * sam_drop) + "% lower, need 30%); RMSE " + fmt("%.5f", net.rmse) + " vs " +
              fmt("%.5f", base.rmse) + " (" + fmt("%.1f", 100 * rmse_drop) + "% lower, need 25%)"};
}

Outcome c7_attention() {
  double on = trained_seed1().sam, off = 0.0;
  for (std::uint64_t seed : {2, 3}) on += train_and_score(true, seed).sam;
  for (std::uint64_t seed : {1, 2, 3}) off += train_and_score(false, seed).sam;
  on /= 3;
  off /= 3;
  return {on <= off, "mean held-out SAM over seeds 1..3: attention " + fmt("%.4f", on) + " deg, without " +
                         fmt("%.4f", off) + " deg (need on <= off)"};
}

// ---------------------------------------------------------------------------
// 8. Runtime scaling through the bench command

int run_cli(std::vector<std::string> args, bool quiet = true) {
  args.insert(args.begin(), "s2h");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::streambuf* out = std::cout.rdbuf();
  std::streambuf* err = std::cerr.rdbuf();
  std::ostringstream sink;
  if (quiet) {
    std::cout.rdbuf(sink.rdbuf());
    std::cerr.rdbuf(sink.rdbuf());
  }
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return rc;
}

Outcome c8_scaling() {
  const fs::path dir = test::scratch_dir("acc_bench");
  const fs::path csv = dir / "bench.csv";
  const int rc = run_cli({"bench", "--sizes", "64,128,256,512", "--reps", "3", "--out", csv.string()});
  if (rc != 0) return {false, "bench exited with " + std::to_string(rc)};
  std::ifstream f(csv);
  std::string line, last;
  std::getline(f, line);
  while (std::getline(f, line)) {
    if (!line.empty()) last = line;
  }
  const double slope = std::stod(last.substr(last.rfind(',') + 1));
  return {slope >= 0.8 && slope <= 1.2, "log-log slope " + fmt("%.3f", slope) + " over 64^2..512^2 (need [0.8, 1.2])"};
}

// ---------------------------------------------------------------------------
// 9. Blind source separation

Outcome c9_bss() {
  SceneSpec spec;
  spec.width = spec.height = 36;
  spec.bands_h = 32;
  spec.n_sources = 5;
  spec.seed = 9;
  const Scene clean = synth_scene(spec);
  const int order = estimate_order_mdl(clean.cube, 15);

  const VcaResult v = vca(clean.cube, 5, 1);
  const auto perm = match_endmembers(v.endmembers, clean.mixing.endmembers);
  double worst_sam = 0.0;
  for (int j = 0; j < 5; ++j) {
    worst_sam = std::max(worst_sam, spectral_angle_deg(v.endmembers.col(perm[static_cast<std::size_t>(j)]),
                                                       clean.mixing.endmembers.col(j)));
  }

  auto abundance_rmse = [&](const HyperCube& y) {
    const VcaResult vv = vca(y, 5, 1);
    const auto pp = match_endmembers(vv.endmembers, clean.mixing.endmembers);
    const Matrix a = fcls(y, vv.endmembers);
    Matrix ordered(5, a.cols());
    for (int j = 0; j < 5; ++j) ordered.row(j) = a.row(pp[static_cast<std::size_t>(j)]);
    return std::sqrt((ordered - clean.mixing.abundances).squaredNorm() / static_cast<double>(ordered.size()));
  };
  const double rmse0 = abundance_rmse(clean.cube);
  spec.noise_sigma = 5e-3;
  const double rmse1 = abundance_rmse(synth_scene(spec).cube);
  return {order == 5 && worst_sam <= 1.0 && rmse0 <= 1e-3 && rmse1 <= 2e-2,
          "MDL order " + std::to_string(order) + " (need 5); worst VCA SAM " + fmt("%.4f", worst_sam) +
              " deg (tol 1); abundance RMSE " + fmt("%.2e", rmse0) + " at sigma 0 (tol 1e-3), " +
              fmt("%.2e", rmse1) + " at sigma 5e-3 (tol 2e-2)"};
}

// ---------------------------------------------------------------------------
// 10. Sources that the multispectral sensor cannot tell apart

double min_pairwise_sam(const Matrix& e, int* below1 = nullptr) {
  double lo = 180.0;
  std::set<int> close;
  for (Eigen::Index i = 0; i < e.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < e.cols(); ++j) {
      const double a = spectral_angle_deg(e.col(i), e.col(j));
      lo = std::min(lo, a);
      if (a < 1.0) {
        close.insert(static_cast<int>(i));
        close.insert(static_cast<int>(j));
      }
    }
  }
  if (below1) *below1 = static_cast<int>(close.size());
  return lo;
}

Outcome c10_identifiability() {
  const int n = 4, side = 24;
  const auto sensor = desk_sensor_bands();
  const auto wl = hyperspectral_wavelengths(32);
  const SrtMatrix srt = make_srt(sensor, wl);
  Matrix e = material_library(wl, n, 77, 10.0);
  // Twin of one source that differs from it only inside the null space of D,
  // kept in [0.02, 0.95] so mixing does not clip it. The source with the most
  // headroom gets the twin.
  const Eigen::FullPivLU<Matrix> lu(srt.d);
  const Matrix kernel = lu.kernel();
  Vector bump(32);
  for (int b = 0; b < 32; ++b) bump(b) = std::exp(-0.5 * std::pow((b - 16.0) / 4.0, 2));
  Vector dir = kernel * kernel.colPivHouseholderQr().solve(bump);
  dir /= dir.cwiseAbs().maxCoeff();
  Vector twin = e.col(0);
  double hsi_twin = 0.0;
  int src = 0;
  for (int j = 0; j < n - 1; ++j) {
    for (double s = 0.005; s < 0.5; s += 0.005) {
      const Vector c = e.col(j) + s * dir;
      if (c.minCoeff() < 0.02 || c.maxCoeff() > 0.95) break;
      const double ang = spectral_angle_deg(e.col(j), c);
      if (ang > hsi_twin) {
        hsi_twin = ang;
        twin = c;
        src = j;
      }
      if (ang > 5.0) break;
    }
  }
  e.col(n - 1) = twin;
  const double msi_twin = spectral_angle_deg(srt.d * e.col(src), srt.d * e.col(n - 1));

  // patchy land cover: mostly pure regions with mixed borders
  Matrix a = smooth_abundances(side, side, n, 78).array().pow(8.0).matrix();
  for (Eigen::Index p = 0; p < a.cols(); ++p) a.col(p) /= a.col(p).sum();
  const HyperCube hsi = mix_cube(e, a, side, side, wl, 0.0, 0);
  const HyperCube msi = apply_srt(srt, hsi, centers(sensor));
  const UnmixResult uh = unmix(hsi, n, 1);
  const UnmixResult um = unmix(msi, n, 1);
  int msi_close = 0, hsi_close = 0;
  min_pairwise_sam(um.endmembers, &msi_close);
  const double hsi_min = min_pairwise_sam(uh.endmembers, &hsi_close);
  const bool setup = msi_twin < 0.5 && hsi_twin >= 2.0;
  return {setup && msi_close >= 2 && hsi_min >= 2.0,
          "twin sources " + fmt("%.2f", hsi_twin) + " deg apart in HSI, " + fmt("%.2e", msi_twin) +
              " deg in MSI (need < 0.5); MSI unmixing: " + std::to_string(msi_close) +
              " endmembers within 1 deg of another (need >= 2); HSI unmixing: closest pair " + fmt("%.2f", hsi_min) +
              " deg (need >= 2)"};
}

// ---------------------------------------------------------------------------
// 11. I/O round trips and reproducibility

bool same_file(const fs::path& a, const fs::path& b) { return test::file_bytes(a) == test::file_bytes(b); }

bool same_tree(const fs::path& a, const fs::path& b) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (!same_file(e.path(), b / e.path().filename())) return false;
    ++n;
  }
  return n > 0;
}

Outcome c11_io() {
  const fs::path dir = test::scratch_dir("acc_io");
  std::vector<std::string> failed;

  HyperCube cube = test::random_cube(7, 9, 5, 111, -3.0, 3.0);
  cube.data = cube.data.cast<float>().cast<double>();  // payloads are float32
  write_envi(cube, dir / "c");
  const HyperCube back = read_envi(dir / "c");
  if (!(back.data == cube.data) || back.wavelengths != cube.wavelengths) failed.push_back("envi");
  write_envi(back, dir / "c2");
  if (!same_file(envi_payload_path(dir / "c"), envi_payload_path(dir / "c2")) ||
      !same_file(envi_header_path(dir / "c"), envi_header_path(dir / "c2"))) {
    failed.push_back("envi-rewrite");
  }

  PipelineConfig cfg;
  cfg.unfold = UnfoldConfig::for_strategy(Strategy::Learnable);
  const SrtMatrix srt = make_srt(sensor_for(6), hyperspectral_wavelengths(32));
  const PipelineParams params = init_pipeline(cfg, &srt, 3);
  save_pipeline(dir / "p.ckpt", cfg, params);
  const LoadedPipeline loaded = load_pipeline(dir / "p.ckpt");
  const auto sample = test::desk_samples(1, 5);
  const PipelineOutput o1 = pipeline_forward(cfg, params, sample[0].y_s);
  const PipelineOutput o2 = pipeline_forward(loaded.config, loaded.params, sample[0].y_s);
  if (!(o1.y_star.data == o2.y_star.data) || !(o1.y_tilde.data == o2.y_tilde.data)) failed.push_back("checkpoint");

  // every command twice with identical arguments
  const std::vector<std::string> sim = {"simulate", "--width", "12", "--height", "12", "--seed", "4",
                                        "--deterministic", "true"};
  const std::vector<std::string> trn = {"train", "--width", "12", "--height", "12", "--n_train", "4", "--n_val",
                                        "2", "--epochs", "2", "--batch_size", "2", "--seed", "4", "--deterministic",
                                        "true"};
  for (const char* run : {"a", "b"}) {
    const fs::path r = dir / run;
    fs::create_directories(r);
    auto s = sim;
    s.insert(s.end(), {"--out", (r / "sim").string()});
    auto t = trn;
    t.insert(t.end(), {"--out", (r / "m.ckpt").string()});
    const std::string ys = (r / "sim" / "y_s").string();
    const std::string yh = (r / "sim" / "y_h").string();
    const bool ok =
        run_cli(s) == 0 && run_cli(t) == 0 &&
        run_cli({"superresolve", "--input", ys, "--out", (r / "rec").string(), "--checkpoint",
                 (r / "m.ckpt").string()}) == 0 &&
        run_cli({"superresolve", "--input", ys, "--out", (r / "math").string(), "--strategy", "mathematical",
                 "--srt", (r / "sim" / "srt.csv").string()}) == 0 &&
        run_cli({"unmix", "--input", yh, "--out", (r / "unmix").string(), "--seed", "4"}) == 0 &&
        run_cli({"evaluate", "--input", (r / "rec").string(), "--reference", yh, "--csv", (r / "eval.csv").string(),
                 "--sam_map", (r / "sam").string()}) == 0;
    if (!ok) failed.push_back(std::string("commands-") + run);
  }
  const fs::path a = dir / "a", b = dir / "b";
  if (!same_tree(a / "sim", b / "sim")) failed.push_back("simulate");
  if (!same_file(a / "m.ckpt", b / "m.ckpt") || !same_file(a / "m.ckpt.log.csv", b / "m.ckpt.log.csv")) {
    failed.push_back("train");
  }
  for (const char* c : {"rec", "math", "sam"}) {
    if (!same_file(envi_payload_path(a / c), envi_payload_path(b / c)) ||
        !same_file(envi_header_path(a / c), envi_header_path(b / c))) {
      failed.push_back(c);
    }
  }
  if (!same_tree(a / "unmix", b / "unmix")) failed.push_back("unmix");
  if (!same_file(a / "eval.csv", b / "eval.csv")) failed.push_back("evaluate");

  std::string detail = "ENVI and checkpoint round trips bit-exact; simulate, train, superresolve (checkpoint and "
                       "mathematical), unmix and evaluate byte-identical across two runs";
  if (!failed.empty()) {
    detail = "mismatch in:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

struct Criterion {
  int id;
  double budget_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, 5, c1_woodbury},  {2, 10, c2_prox},       {3, 60, c3_gradients}, {4, 5, c4_fusion},
      {5, 60, c5_admm},     {6, 900, c6_learning},  {7, 3600, c7_attention}, {8, 300, c8_scaling},
      {9, 30, c9_bss},      {10, 60, c10_identifiability}, {11, 120, c11_io}};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %2d %s  %s; %.1f s (budget %.0f s)\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                c.budget_s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
