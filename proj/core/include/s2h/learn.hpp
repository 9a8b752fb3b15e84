#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "s2h/model.hpp"

namespace s2h {

// l1(Y~_H, Y_gt) + l1(Y_H*, Y_gt) + lambda [tv_spec(Y~_H) + tv_spat(Y_H*)]
struct LossSpec {
  double lambda = 1e-4;
  // Divide each l1 term by the entry count M*L so lambda keeps its weight
  // relative to the normalised TV terms; false gives plain absolute sums.
  bool normalize_l1 = true;
};

struct LossTerms {
  double l1_tilde = 0.0;
  double l1_star = 0.0;
  double tv_spec = 0.0;
  double tv_spat = 0.0;
  double total = 0.0;
};

LossTerms loss_terms(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec);
double loss_total(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec);
// Subgradients of loss_total with sign(0) = 0.
void loss_grad(const HyperCube& y_tilde, const HyperCube& y_star, const HyperCube& y_gt, const LossSpec& spec,
               Matrix& g_tilde, Matrix& g_star);

// ---------------------------------------------------------------------------
// Optimiser

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long long step = 0;
};

// Bias-corrected Adam on parallel lists of parameters and gradients. The
// moment buffers are created on the first call.
void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, OptimState& state,
               const AdamHyper& hyper);
void adam_step(PipelineParams& params, const PipelineParams& grads, OptimState& state, const AdamHyper& hyper);

// base * factor^(number of milestones strictly below `epoch`); epochs are
// 1-based, so the rate drops from epoch milestone + 1 on.
double learning_rate(double base, int epoch, const std::vector<int>& milestones, double factor = 0.5);

// ---------------------------------------------------------------------------
// Training

struct Sample {
  MultiResCube y_s;
  HyperCube y_h;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 4;
  double lr = 1e-4;
  std::vector<int> milestones = {30, 60, 90};
  double lr_factor = 0.5;
  std::uint64_t seed = 1;
  LossSpec loss;

  // Keys: epochs, batch_size, lr, milestones, lr_factor, seed, lambda,
  // normalize_l1.
  void to_config(KvConfig& cfg) const;
  static TrainConfig from_config(const KvConfig& cfg);
  static const std::vector<std::string>& config_keys();
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;  // epoch 0 is the evaluation before training
};

// Parameters that are not trained under `cfg`: the unfolding of the
// mathematical strategy, rho when learn_rho is false.
bool is_frozen(const PipelineConfig& cfg, const std::string& tensor_name);

// Mean per-sample loss.
double evaluate_loss(const PipelineConfig& cfg, const PipelineParams& params, const std::vector<Sample>& data,
                     const LossSpec& spec);

// Summed per-sample loss and summed gradients over `data[indices]`.
double batch_gradient(const PipelineConfig& cfg, const PipelineParams& params, const std::vector<Sample>& data,
                      const std::vector<std::size_t>& indices, const LossSpec& spec, PipelineParams& grad);

// Trains `params` in place. `log`, when given, receives the CSV log
// (header epoch,lr,train_loss,val_loss). A non-finite loss or parameter
// restores the last good parameters and throws NonFinite.
TrainReport train(const PipelineConfig& cfg, PipelineParams& params, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& tcfg, std::ostream* log = nullptr,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Finite-difference checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]" of the worst coordinate
  int checked = 0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

// Compares `analytic` against central differences of `f` over every
// coordinate of each tensor (at most `max_per_tensor` evenly spaced ones when
// positive).
GradCheckResult grad_check(const std::function<double()>& f, const std::vector<std::pair<std::string, Matrix*>>& params,
                           const std::vector<const Matrix*>& analytic, double eps, int max_per_tensor = 0,
                           double floor = 1e-8);

// Checks the full pipeline loss on `data`, grouping the result by parameter
// block (d, log_rho, phi, denoiser, fusion).
std::map<std::string, GradCheckResult> grad_check_pipeline(const PipelineConfig& cfg, PipelineParams& params,
                                                           const std::vector<Sample>& data, const LossSpec& spec,
                                                           double eps, int max_per_tensor = 0);

}  // namespace s2h
