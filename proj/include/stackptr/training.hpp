#pragma once

// Teacher-forced training: minibatch gradient averaging, global-norm
// clipping, Adam, plateau learning-rate decay and best-epoch retention.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stackptr/model.hpp"

namespace stackptr {

struct OptimState {
  std::vector<std::vector<double>> m;  // first moments, one per parameter
  std::vector<std::vector<double>> v;  // second moments
  std::uint64_t step = 0;
  double lr = 0.0;
  double best_score = 0.0;
  bool has_best = false;
  std::size_t bad_epochs = 0;
  std::size_t decays = 0;

  static OptimState init(const ag::ParameterSet& params, double lr);
};

/// Global L2 norm of all gradients.
double grad_norm(const ag::ParameterSet& params);

/// Rescales all gradients so their global norm is at most `max_norm`;
/// returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_gradients(ag::ParameterSet& params, double max_norm);

/// Clips, then applies one bias-corrected Adam update with the state's lr.
/// Padding rows are never updated.
void adam_step(ag::ParameterSet& params, OptimState& state, const ModelConfig& config);

/// Records one validation score. After `patience` consecutive epochs without
/// a strict improvement the rate is multiplied by decay_rate and the counter
/// restarts. Returns true when a decay happened.
bool lr_schedule(OptimState& state, double score, const ModelConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-sentence loss over the epoch
  double dev_uas = 0.0;
  double dev_las = 0.0;
  bool best = false;
};

struct TrainResult {
  std::unique_ptr<Model> model;  // parameters of the best epoch
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_dev_uas = 0.0;
  double embedding_coverage = 0.0;
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Fits the vocabulary on `train_set`, builds the model and trains it. An
/// empty dev set selects epochs on the training set instead.
TrainResult train(ModelKind kind, const ModelConfig& config, const std::vector<TreebankEntry>& train_set,
                  const std::vector<TreebankEntry>& dev_set, const TrainOptions& options = {});

/// Tab-separated log: epoch, lr, train_loss, dev_uas, dev_las, best.
std::string format_log(const std::vector<EpochRecord>& log);

/// Seed of the per-sentence graph (dropout masks) for one training step.
std::uint64_t step_seed(std::uint64_t seed, std::size_t epoch, std::size_t index);

}  // namespace stackptr
