#include "s2h/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "s2h/parallel.hpp"

namespace s2h {

namespace {

void check_loss_shapes(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt) {
  require(y_tilde.same_shape(y_gt) && y_star.same_shape(y_gt), ErrorCode::ShapeMismatch,
          "loss operands differ in shape");
}

double l1_scale(const HyperCube& y, const LossSpec& spec) {
  return spec.normalize_l1 ? 1.0 / static_cast<double>(y.data.size()) : 1.0;
}

}  // namespace

LossTerms loss_terms(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec) {
  check_loss_shapes(y_tilde, y_star, y_gt);
  require(spec.lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
  LossTerms t;
  const double scale = l1_scale(y_gt, spec);
  t.l1_tilde = (y_tilde.data - y_gt.data).cwiseAbs().sum() * scale;
  t.l1_star = (y_star.data - y_gt.data).cwiseAbs().sum() * scale;
  if (spec.lambda > 0.0) {
    t.tv_spec = tv_spec(y_tilde.data);
    t.tv_spat = tv_spat(y_star.data, y_star.width, y_star.height);
  }
  t.total = t.l1_tilde + t.l1_star + spec.lambda * (t.tv_spec + t.tv_spat);
  return t;
}

double loss_total(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec) {
  return loss_terms(y_tilde, y_star, y_gt, spec).total;
}

void loss_grad(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec,
               Matrix& g_tilde, Matrix& g_star) {
  check_loss_shapes(y_tilde, y_star, y_gt);
  const double scale = l1_scale(y_gt, spec);
  const auto sgn = [](double v) { return sign0(v); };
  g_tilde = (y_tilde.data - y_gt.data).unaryExpr(sgn) * scale;
  g_star = (y_star.data - y_gt.data).unaryExpr(sgn) * scale;
  if (spec.lambda > 0.0) {
    g_tilde += spec.lambda * tv_spec_grad(y_tilde.data);
    g_star += spec.lambda * tv_spat_grad(y_star.data, y_star.width, y_star.height);
  }
}

// ---------------------------------------------------------------------------

void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, OptimState& state,
               const AdamHyper& hyper) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch, "parameter and gradient lists differ");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  require(state.m.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    require(g.rows() == params[i]->rows() && g.cols() == params[i]->cols(), ErrorCode::ShapeMismatch,
            "gradient shape mismatch");
    require(g.allFinite(), ErrorCode::NonFinite, "non-finite gradient");
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g.cwiseAbs2();
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    params[i]->array() -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
  }
}

void adam_step(PipelineParams& params, const PipelineParams& grads, OptimState& state, const AdamHyper& hyper) {
  std::vector<Matrix*> p;
  std::vector<const Matrix*> g;
  params.visit([&](const std::string&, Matrix& t) { p.push_back(&t); });
  grads.visit([&](const std::string&, const Matrix& t) { g.push_back(&t); });
  adam_step(p, g, state, hyper);
}

double learning_rate(double base, int epoch, const std::vector<int>& milestones, double factor) {
  const auto passed = std::count_if(milestones.begin(), milestones.end(), [&](int m) { return epoch > m; });
  return base * std::pow(factor, static_cast<double>(passed));
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& TrainConfig::config_keys() {
  static const std::vector<std::string> keys = {"epochs",    "batch_size", "lr",     "milestones",
                                                "lr_factor", "seed",       "lambda", "normalize_l1"};
  return keys;
}

void TrainConfig::to_config(KvConfig& cfg) const {
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("batch_size", std::to_string(batch_size));
  cfg.set("lr", format_double(lr));
  std::string ms;
  for (std::size_t i = 0; i < milestones.size(); ++i) ms += (i ? "," : "") + std::to_string(milestones[i]);
  cfg.set("milestones", ms);
  cfg.set("lr_factor", format_double(lr_factor));
  cfg.set("seed", std::to_string(seed));
  cfg.set("lambda", format_double(loss.lambda));
  cfg.set("normalize_l1", loss.normalize_l1 ? "true" : "false");
}

TrainConfig TrainConfig::from_config(const KvConfig& cfg) {
  TrainConfig t;
  if (cfg.has("epochs")) t.epochs = static_cast<int>(cfg.get_int("epochs"));
  if (cfg.has("batch_size")) t.batch_size = static_cast<int>(cfg.get_int("batch_size"));
  if (cfg.has("lr")) t.lr = cfg.get_double("lr");
  if (cfg.has("milestones")) {
    t.milestones.clear();
    for (const auto& s : split_list(cfg.get("milestones"))) t.milestones.push_back(static_cast<int>(parse_int(s)));
  }
  if (cfg.has("lr_factor")) t.lr_factor = cfg.get_double("lr_factor");
  if (cfg.has("seed")) t.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  if (cfg.has("lambda")) t.loss.lambda = cfg.get_double("lambda");
  if (cfg.has("normalize_l1")) t.loss.normalize_l1 = cfg.get_bool("normalize_l1");
  require(t.epochs >= 0 && t.batch_size >= 1 && t.lr >= 0.0 && t.loss.lambda >= 0.0, ErrorCode::ConfigError,
          "need epochs >= 0, batch_size >= 1, lr >= 0, lambda >= 0");
  return t;
}

bool is_frozen(const PipelineConfig& cfg, const std::string& name) {
  if (name.rfind("unfold.", 0) != 0) return false;
  if (cfg.unfold.strategy == Strategy::Mathematical) return true;
  return name == "unfold.log_rho" && !cfg.unfold.learn_rho;
}

namespace {

struct SampleResult {
  double loss = 0.0;
  PipelineParams grad;
};

void sample_gradient(const PipelineConfig& cfg, const PipelineParams& params, const Sample& s, const LossSpec& spec,
                     SampleResult& out) {
  PipelineTape tape;
  const PipelineOutput o = pipeline_forward(cfg, params, s.y_s, &tape);
  out.loss = loss_total(o.y_tilde, o.y_star, s.y_h, spec);
  Matrix g_tilde, g_star;
  loss_grad(o.y_tilde, o.y_star, s.y_h, spec, g_tilde, g_star);
  pipeline_backward(cfg, params, tape, g_tilde, g_star, out.grad);
}

bool all_finite(const PipelineParams& p) {
  bool ok = true;
  p.visit([&](const std::string&, const Matrix& t) { ok = ok && t.allFinite(); });
  return ok;
}

}  // namespace

double evaluate_loss(const PipelineConfig& cfg, const PipelineParams& params, const std::vector<Sample>& data,
                     const LossSpec& spec) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
  parallel_for(static_cast<std::int64_t>(data.size()), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const auto& s = data[static_cast<std::size_t>(i)];
      const PipelineOutput o = pipeline_forward(cfg, params, s.y_s);
      losses[static_cast<std::size_t>(i)] = loss_total(o.y_tilde, o.y_star, s.y_h, spec);
    }
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

double batch_gradient(const PipelineConfig& cfg, const PipelineParams& params, const std::vector<Sample>& data,
                      const std::vector<std::size_t>& indices, const LossSpec& spec, PipelineParams& grad) {
  std::vector<SampleResult> results(indices.size());
  for (auto& r : results) r.grad = zeros_like(params);
  parallel_for(static_cast<std::int64_t>(indices.size()), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      sample_gradient(cfg, params, data[indices[static_cast<std::size_t>(i)]], spec,
                      results[static_cast<std::size_t>(i)]);
    }
  });
  // Reduce in sample order so the sum does not depend on the thread count.
  std::vector<Matrix*> dst;
  grad.visit([&](const std::string&, Matrix& t) { dst.push_back(&t); });
  double loss = 0.0;
  for (auto& r : results) {
    loss += r.loss;
    std::size_t k = 0;
    r.grad.visit([&](const std::string&, const Matrix& t) { *dst[k++] += t; });
  }
  return loss;
}

TrainReport train(const PipelineConfig& cfg, PipelineParams& params, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& tcfg, std::ostream* log,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  require(!train_set.empty(), ErrorCode::DataEmpty, "training set is empty");
  require(tcfg.batch_size >= 1, ErrorCode::ConfigError, "batch_size must be >= 1");
  TrainReport report;
  std::vector<bool> frozen;
  params.visit([&](const std::string& name, const Matrix&) { frozen.push_back(is_frozen(cfg, name)); });

  const auto emit = [&](const EpochRecord& r) {
    report.epochs.push_back(r);
    if (log) {
      *log << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.train_loss) << ','
           << format_double(r.val_loss) << '\n';
      log->flush();
    }
    if (on_epoch) on_epoch(r);
  };
  if (log) *log << "epoch,lr,train_loss,val_loss\n";
  emit({0, tcfg.lr, evaluate_loss(cfg, params, train_set, tcfg.loss), evaluate_loss(cfg, params, val_set, tcfg.loss)});

  std::mt19937_64 rng(tcfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  OptimState opt;
  AdamHyper hyper;
  PipelineParams last_good = params;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    hyper.lr = learning_rate(tcfg.lr, epoch, tcfg.milestones, tcfg.lr_factor);
    // Fisher-Yates with the engine directly, so the order is the same on
    // every standard library.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      PipelineParams grad = zeros_like(params);
      const double loss = batch_gradient(cfg, params, train_set, batch, tcfg.loss, grad);
      if (!std::isfinite(loss)) {
        params = last_good;
        fail(ErrorCode::NonFinite, "non-finite training loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;
      std::size_t k = 0;
      const double inv = 1.0 / static_cast<double>(batch.size());
      grad.visit([&](const std::string&, Matrix& t) {
        if (frozen[k++]) t.setZero();
        else t *= inv;
      });
      last_good = params;
      try {
        adam_step(params, grad, opt, hyper);
      } catch (const Error&) {
        params = last_good;
        throw;
      }
      if (!all_finite(params)) {
        params = last_good;
        fail(ErrorCode::NonFinite, "non-finite parameters at epoch " + std::to_string(epoch));
      }
    }
    emit({epoch, hyper.lr, epoch_loss / static_cast<double>(train_set.size()),
          evaluate_loss(cfg, params, val_set, tcfg.loss)});
  }
  return report;
}

// ---------------------------------------------------------------------------

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult grad_check(const std::function<double()>& f, const std::vector<std::pair<std::string, Matrix*>>& params,
                           const std::vector<const Matrix*>& analytic, double eps, int max_per_tensor, double floor) {
  require(params.size() == analytic.size(), ErrorCode::ShapeMismatch, "parameter and gradient lists differ");
  GradCheckResult res;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params[t].second;
    const Eigen::Index n = p.size();
    const Eigen::Index count = max_per_tensor > 0 ? std::min<Eigen::Index>(n, max_per_tensor) : n;
    for (Eigen::Index j = 0; j < count; ++j) {
      const Eigen::Index idx = count == n ? j : (j * n) / count;
      double& x = p.data()[idx];
      const double saved = x;
      x = saved + eps;
      const double fp = f();
      x = saved - eps;
      const double fm = f();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(analytic[t]->data()[idx], numeric, floor);
      ++res.checked;
      if (res.worst.empty() || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst = params[t].first + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return res;
}

std::map<std::string, GradCheckResult> grad_check_pipeline(const PipelineConfig& cfg, PipelineParams& params,
                                                           const std::vector<Sample>& data, const LossSpec& spec,
                                                           double eps, int max_per_tensor) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  PipelineParams grad = zeros_like(params);
  batch_gradient(cfg, params, data, all, spec, grad);

  const auto block_of = [](const std::string& name) -> std::string {
    if (name.rfind("fusion.", 0) == 0) return "fusion";
    if (name.rfind("unfold.denoiser", 0) == 0) return "denoiser";
    if (name.rfind("unfold.phi", 0) == 0) return "phi";
    if (name == "unfold.log_rho") return "log_rho";
    return "d";
  };
  std::map<std::string, std::pair<std::vector<std::pair<std::string, Matrix*>>, std::vector<const Matrix*>>> groups;
  params.visit([&](const std::string& name, Matrix& t) { groups[block_of(name)].first.emplace_back(name, &t); });
  grad.visit([&](const std::string& name, const Matrix& t) { groups[block_of(name)].second.push_back(&t); });

  const auto f = [&] {
    double total = 0.0;
    for (const auto& s : data) {
      const PipelineOutput o = pipeline_forward(cfg, params, s.y_s);
      total += loss_total(o.y_tilde, o.y_star, s.y_h, spec);
    }
    return total;
  };
  std::map<std::string, GradCheckResult> out;
  for (auto& [block, lists] : groups) out[block] = grad_check(f, lists.first, lists.second, eps, max_per_tensor);
  return out;
}

}  // namespace s2h
