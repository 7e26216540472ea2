#include "adamct/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace adamct {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (lr <= 0.0) problems.push_back("train.lr: must be > 0");
  if (beta1 <= 0.0 || beta1 >= 1.0) problems.push_back("train.beta1: must lie in (0, 1)");
  if (beta2 <= 0.0 || beta2 >= 1.0) problems.push_back("train.beta2: must lie in (0, 1)");
  if (adam_eps <= 0.0) problems.push_back("train.adam_eps: must be > 0");
  if (weight_decay < 0.0) problems.push_back("train.weight_decay: must be >= 0");
  if (max_epochs < 1) problems.push_back("train.max_epochs: must be >= 1");
  if (patience < 1) problems.push_back("train.patience: must be >= 1");
  if (batch_size == 0) problems.push_back("train.batch_size: must be >= 1");
  if (eval_every < 1) problems.push_back("train.eval_every: must be >= 1");
  if (clip_norm < 0.0) problems.push_back("train.clip_norm: must be >= 0");
  return problems;
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.max_epochs) {
    throw ConfigError("lr_schedule: epoch " + std::to_string(epoch) +
                      " outside [0, " + std::to_string(config.max_epochs) + ")");
  }
  return config.lr *
         (1.0 - static_cast<double>(epoch) / static_cast<double>(config.max_epochs));
}

template <typename T>
AdamOptimizer<T>::AdamOptimizer(std::vector<NamedParam<T>> params,
                                const TrainConfig& config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const NamedParam<T>& p : params_) {
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void AdamOptimizer<T>::zero_grad() {
  for (NamedParam<T>& p : params_) {
    p.tensor.zero_grad();
  }
}

template <typename T>
void AdamOptimizer<T>::step(double lr_t) {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));

  // Optional global-norm clip across all parameters.
  double clip_scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (NamedParam<T>& p : params_) {
      if (!p.tensor.has_grad()) continue;
      for (T g : p.tensor.grad()) {
        sq += static_cast<double>(g) * static_cast<double>(g);
      }
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) {
      clip_scale = config_.clip_norm / norm;
    }
  }

  for (Index i = 0; i < params_.size(); ++i) {
    Tensor<T> t = params_[i].tensor;
    auto data = t.data();
    auto grad = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (Index j = 0; j < data.size(); ++j) {
      double g = static_cast<double>(grad[j]) * clip_scale;
      if (!std::isfinite(g)) {
        throw TrainError("adam: non-finite gradient in " + params_[i].name);
      }
      if (config_.weight_decay != 0.0) {
        g += config_.weight_decay * static_cast<double>(data[j]);
      }
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * g;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bias1;
      const double vhat = vj / bias2;
      data[j] = static_cast<T>(static_cast<double>(data[j]) -
                               lr_t * mhat / (std::sqrt(vhat) + config_.adam_eps));
    }
  }
}

template <typename T>
double train_epoch(AdaMCTModel<T>& model, const std::vector<Batch>& batches,
                   AdamOptimizer<T>& opt, double lr_t, RngState& dropout_rng,
                   AlphaEpochStats* alpha_stats) {
  if (batches.empty()) {
    throw TrainError("train_epoch: no batches (empty training split?)");
  }
  if (alpha_stats != nullptr) {
    alpha_stats->sum_per_layer.assign(model.config.num_layers, 0.0);
    alpha_stats->sequences = 0;
  }

  double loss_sum = 0.0;
  Index seq_count = 0;
  for (const Batch& batch : batches) {
    opt.zero_grad();
    Tape<T> tape;
    Tensor<T> total;
    for (Index i = 0; i < batch.size; ++i) {
      ForwardTrace<T> trace;
      Tensor<T> logits = model_forward(&tape, model, batch.items_row(i),
                                       batch.mask_row(i), Mode::kTrain,
                                       &dropout_rng, &trace);
      Tensor<T> loss = cross_entropy_loss(&tape, logits, batch.targets[i]);
      total = total.defined() ? add(&tape, total, loss) : loss;
      if (alpha_stats != nullptr) {
        for (Index l = 0; l < trace.alpha.size(); ++l) {
          alpha_stats->sum_per_layer[l] += static_cast<double>(trace.alpha[l]);
        }
        ++alpha_stats->sequences;
      }
    }
    Tensor<T> mean_loss =
        scale(&tape, total, T(1) / static_cast<T>(batch.size));
    tape.backward(mean_loss);
    opt.step(lr_t);

    loss_sum += static_cast<double>(mean_loss.value()) *
                static_cast<double>(batch.size);
    seq_count += batch.size;
  }
  return loss_sum / static_cast<double>(seq_count);
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os << "epoch,loss,val_ndcg10,val_recall10,lr\n";
  for (const EpochRecord& r : epochs) {
    os << r.epoch << "," << format_double(r.train_loss) << ","
       << format_double(r.val_ndcg10) << "," << format_double(r.val_recall10)
       << "," << format_double(r.lr) << "\n";
  }
  return os.str();
}

std::string TrainHistory::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["best_val_ndcg10"] = best_val_ndcg10;
  nlohmann::json rows = nlohmann::json::array();
  for (const EpochRecord& r : epochs) {
    rows.push_back({{"epoch", r.epoch},
                    {"loss", r.train_loss},
                    {"val_ndcg10", r.val_ndcg10},
                    {"val_recall10", r.val_recall10},
                    {"lr", r.lr},
                    {"wall_seconds", r.wall_seconds}});
  }
  j["epochs"] = rows;
  return j.dump(2);
}

std::string AlphaLog::to_csv() const {
  std::ostringstream os;
  os << "epoch,layer,alpha_mean,alpha_user0,alpha_user1\n";
  for (const Row& r : rows) {
    os << r.epoch << "," << r.layer << "," << format_double(r.mean) << ","
       << format_double(r.user0) << "," << format_double(r.user1) << "\n";
  }
  return os.str();
}

namespace {

// Eval-mode per-layer alpha for one user's input; used for the tracked-user
// columns of the alpha log.
template <typename T>
std::vector<T> probe_alpha(const AdaMCTModel<T>& model, const SplitExample& ex) {
  const Padded p = pad_truncate(ex.input, model.config.max_len);
  ForwardTrace<T> trace;
  model_forward<T>(nullptr, model, p.items, p.valid_mask, Mode::kEval, nullptr,
                   &trace);
  return trace.alpha;
}

template <typename T>
std::vector<std::vector<T>> snapshot_params(const AdaMCTModel<T>& model) {
  std::vector<std::vector<T>> snap;
  for (const NamedParam<T>& p : model.parameters()) {
    snap.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  }
  return snap;
}

template <typename T>
void restore_params(AdaMCTModel<T>& model, const std::vector<std::vector<T>>& snap) {
  const auto params = model.parameters();
  for (Index i = 0; i < params.size(); ++i) {
    Tensor<T> t = params[i].tensor;
    std::copy(snap[i].begin(), snap[i].end(), t.data().begin());
  }
}

}  // namespace

template <typename T>
TrainHistory fit(AdaMCTModel<T>& model, const Splits& splits,
                 const Dataset& dataset, const TrainConfig& train_config,
                 const EvalConfig& eval_config, AlphaLog* alpha_log) {
  {
    const auto problems = train_config.validate();
    if (!problems.empty()) {
      std::string joined = "invalid train config:";
      for (const auto& p : problems) joined += "\n  - " + p;
      throw ConfigError(joined);
    }
  }
  if (splits.train.empty() || splits.valid.empty()) {
    throw DataError("fit: train/valid splits are empty");
  }

  RngState shuffle_rng = RngState(train_config.seed).child(1);
  RngState dropout_rng = RngState(train_config.seed).child(2);

  EvalConfig val_config = eval_config;
  val_config.split = "valid";

  AdamOptimizer<T> opt(model.parameters(), train_config);
  TrainHistory history;
  std::vector<std::vector<T>> best_snapshot = snapshot_params(model);
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr_t = lr_schedule(epoch, train_config);
    const auto batches =
        make_batches(splits.train, train_config.batch_size,
                     model.config.max_len, /*shuffle=*/true, shuffle_rng);

    AlphaEpochStats alpha_stats;
    const double loss = train_epoch(model, batches, opt, lr_t, dropout_rng,
                                    alpha_log != nullptr ? &alpha_stats : nullptr);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss;
    rec.lr = lr_t;

    const bool eval_now = (epoch + 1) % train_config.eval_every == 0 ||
                          epoch + 1 == train_config.max_epochs;
    bool stop = false;
    if (eval_now) {
      const MetricsReport val =
          evaluate_split(model, splits.valid, dataset, val_config);
      rec.val_ndcg10 = val.ndcg.count(10) ? val.ndcg.at(10) : 0.0;
      rec.val_recall10 = val.recall.count(10) ? val.recall.at(10) : 0.0;

      if (history.best_epoch < 0 || rec.val_ndcg10 > history.best_val_ndcg10) {
        history.best_epoch = epoch;
        history.best_val_ndcg10 = rec.val_ndcg10;
        best_snapshot = snapshot_params(model);
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
        if (epochs_since_best >= train_config.patience) {
          stop = true;
        }
      }
    }

    if (alpha_log != nullptr) {
      std::vector<T> a0, a1;
      if (!splits.test.empty()) a0 = probe_alpha(model, splits.test[0]);
      if (splits.test.size() > 1) a1 = probe_alpha(model, splits.test[1]);
      for (Index l = 0; l < model.config.num_layers; ++l) {
        AlphaLog::Row row;
        row.epoch = epoch;
        row.layer = l;
        row.mean = alpha_stats.sequences > 0
                       ? alpha_stats.sum_per_layer[l] /
                             static_cast<double>(alpha_stats.sequences)
                       : 0.0;
        row.user0 = l < a0.size() ? static_cast<double>(a0[l]) : 0.0;
        row.user1 = l < a1.size() ? static_cast<double>(a1[l]) : 0.0;
        alpha_log->rows.push_back(row);
      }
    }

    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history.epochs.push_back(rec);
    if (stop) {
      break;
    }
  }

  restore_params(model, best_snapshot);
  return history;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define ADAMCT_INSTANTIATE_TRAINER(T)                                          \
  template class AdamOptimizer<T>;                                             \
  template double train_epoch(AdaMCTModel<T>&, const std::vector<Batch>&,      \
                              AdamOptimizer<T>&, double, RngState&,            \
                              AlphaEpochStats*);                               \
  template TrainHistory fit(AdaMCTModel<T>&, const Splits&, const Dataset&,    \
                            const TrainConfig&, const EvalConfig&, AlphaLog*);

ADAMCT_INSTANTIATE_TRAINER(float)
ADAMCT_INSTANTIATE_TRAINER(double)

#undef ADAMCT_INSTANTIATE_TRAINER

}  // namespace adamct
