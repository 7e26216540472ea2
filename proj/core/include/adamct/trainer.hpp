#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adamct/data.hpp"
#include "adamct/evaluator.hpp"
#include "adamct/model.hpp"

namespace adamct {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;  // retained in the update as an l2 term
  int max_epochs = 200;
  int patience = 20;
  Index batch_size = 128;
  std::uint64_t seed = 42;
  int eval_every = 1;
  double clip_norm = 0.0;  // 0 disables global-norm clipping

  std::vector<std::string> validate() const;
};

// lr * (1 - epoch / max_epochs): linear per-epoch decay, strictly positive
// over [0, max_epochs).
double lr_schedule(int epoch, const TrainConfig& config);

template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedParam<T>> params, const TrainConfig& config);

  void zero_grad();

  // One bias-corrected Adam update from the parameters' current gradients.
  // Throws TrainError naming the tensor on a non-finite gradient.
  void step(double lr_t);

  std::int64_t step_count() const { return step_; }

 private:
  std::vector<NamedParam<T>> params_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  TrainConfig config_;
  std::int64_t step_ = 0;
};

// Per-layer mixture coefficients accumulated over an epoch of training.
struct AlphaEpochStats {
  std::vector<double> sum_per_layer;
  Index sequences = 0;
};

// One pass over the batches in train mode; returns the sequence-weighted
// mean loss. An empty batch list is an error, never a silent zero.
template <typename T>
double train_epoch(AdaMCTModel<T>& model, const std::vector<Batch>& batches,
                   AdamOptimizer<T>& opt, double lr_t, RngState& dropout_rng,
                   AlphaEpochStats* alpha_stats = nullptr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ndcg10 = 0.0;
  double val_recall10 = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_ndcg10 = 0.0;

  // epoch,loss,val_ndcg10,val_recall10,lr
  std::string to_csv() const;
  std::string to_json() const;
};

// One row per epoch per layer: the batch-averaged alpha plus the eval-mode
// alpha of two fixed users (indices 0 and 1 of the evaluation order).
struct AlphaLog {
  struct Row {
    int epoch = 0;
    Index layer = 0;
    double mean = 0.0;
    double user0 = 0.0;
    double user1 = 0.0;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
};

// Trains with linear lr decay and early stopping on validation NDCG@10
// (first occurrence wins ties); the model is left at the best epoch's
// weights, never a later one.
template <typename T>
TrainHistory fit(AdaMCTModel<T>& model, const Splits& splits,
                 const Dataset& dataset, const TrainConfig& train_config,
                 const EvalConfig& eval_config, AlphaLog* alpha_log = nullptr);

}  // namespace adamct
