#pragma once

#include <iosfwd>

#include "leaffm/data.hpp"
#include "leaffm/metrics.hpp"
#include "leaffm/params.hpp"
#include "leaffm/scoring.hpp"

namespace leaffm {

// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
double logloss(uint8_t label, double p);

struct LossReport {
  size_t count = 0;
  double mean_logloss = 0.0;
  double penalty = 0.0;
  double objective = 0.0;  // mean_logloss + penalty
  std::vector<double> predictions;
  std::vector<uint8_t> labels;
};

// Forward-only objective over a batch (mean logloss + L2 penalty).
LossReport batch_loss(std::span<const Instance> batch, const ParameterSet& ps,
                      ForwardCache* ws = nullptr);

// Full backward pass: accumulates gradients of the batch objective for the
// global bias, touched linear/embedding rows, every generation stack, and
// layer-norm parameters. The L2 term contributes 2*lambda*theta on touched
// rows and on all dense tensors.
LossReport backward_batch(std::span<const Instance> batch, const ParameterSet& ps,
                          GradientSet& grads);

struct EpochRecord {
  int epoch = 0;
  double train_objective = 0.0;
  double val_auc = 0.0;
  double val_logloss = 0.0;
  double seconds = 0.0;
};

struct TrainRun {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_auc = 0.0;
  bool early_stopped = false;
};

struct TrainResult {
  TrainRun run;
  ParameterSet params;  // checkpoint with the best validation AUC
};

// Mini-batch Adam with per-epoch validation, best-checkpoint tracking and
// patience-based early stopping. Deterministic for threads == 1.
TrainResult train(const ModelConfig& cfg, const DatasetSplit& split, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradCheckResult {
  ModelConfig cfg;
  double worst = 0.0;
  std::vector<std::pair<TensorClass, double>> per_class;
  bool pass = false;
  double tolerance = 0.0;
};

// Central finite differences (step 1e-6) of the full batch objective against
// backward_batch, over every trainable scalar of a tiny model. Cases whose
// relu pre-activations sit near a kink are resampled.
GradCheckResult gradient_check(const ModelConfig& cfg, int n_cases, double tolerance,
                               uint64_t seed);

struct GradCheckJob {
  ModelConfig cfg;
  double tolerance = 1e-4;
  std::string name;
};

// The standard verification grid: every variant crossed with depth, expansion
// ratio and generated-feature count where legal; kink-free configurations get
// the tighter tolerance.
std::vector<GradCheckJob> gradient_check_grid();

std::string gradcheck_report_line(const GradCheckResult& r, const std::string& name);

}  // namespace leaffm
