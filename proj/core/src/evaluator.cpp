#include "adamct/evaluator.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace adamct {

std::vector<std::string> EvalConfig::validate() const {
  std::vector<std::string> problems;
  if (negatives == 0) {
    problems.push_back("eval.negatives: must be >= 1");
  }
  if (ks.empty()) {
    problems.push_back("eval.ks: must name at least one cutoff");
  }
  for (int k : ks) {
    if (k < 1) {
      problems.push_back("eval.ks: cutoff " + std::to_string(k) + " < 1");
    }
  }
  if (split != "test" && split != "valid" && split != "train") {
    problems.push_back("eval.split: '" + split + "' is not train|valid|test");
  }
  return problems;
}

int rank_ground_truth(double gt_score, std::span<const double> negative_scores) {
  if (!std::isfinite(gt_score)) {
    throw EvalError("rank: ground-truth score is not finite");
  }
  int rank = 1;
  for (double s : negative_scores) {
    if (!std::isfinite(s)) {
      throw EvalError("rank: negative score is not finite");
    }
    if (s >= gt_score) {
      ++rank;
    }
  }
  return rank;
}

int recall_at_k(int rank, int k) { return rank <= k ? 1 : 0; }

double ndcg_at_k(int rank, int k) {
  if (rank > k) {
    return 0.0;
  }
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["split"] = split;
  j["num_users"] = num_users;
  j["negatives"] = negatives;
  j["seed"] = seed;
  for (const auto& [k, v] : recall) {
    j["recall@" + std::to_string(k)] = v;
  }
  for (const auto& [k, v] : ndcg) {
    j["ndcg@" + std::to_string(k)] = v;
  }
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream head, row;
  head << "split,num_users,negatives,seed";
  row << split << "," << num_users << "," << negatives << "," << seed;
  for (const auto& [k, v] : recall) {
    head << ",recall@" << k;
    row << "," << v;
  }
  for (const auto& [k, v] : ndcg) {
    head << ",ndcg@" << k;
    row << "," << v;
  }
  return head.str() + "\n" + row.str() + "\n";
}

MetricsReport evaluate_with_scorer(std::span<const SplitExample> examples,
                                   const Dataset& dataset,
                                   const EvalConfig& config,
                                   const Scorer& scorer) {
  MetricsReport report;
  report.split = config.split;
  report.num_users = examples.size();
  report.negatives = config.negatives;
  report.seed = config.seed;
  for (int k : config.ks) {
    report.recall[k] = 0.0;
    report.ndcg[k] = 0.0;
  }
  if (examples.empty()) {
    return report;
  }

  RngState rng(config.seed);
  for (const SplitExample& ex : examples) {
    // Negatives avoid the user's entire interaction history, not just the
    // evaluated prefix.
    const auto& full_history = dataset.sequences[ex.user];
    std::unordered_set<ItemId> history(full_history.begin(), full_history.end());
    const std::vector<ItemId> negatives = sample_negatives(
        history, ex.target, dataset.num_items(), config.negatives, rng);
    for (ItemId neg : negatives) {
      if (neg == kPadItem || neg == ex.target || history.count(neg)) {
        throw EvalError("evaluate: sampled negative violates the protocol");
      }
    }

    const ScoredExample scored = scorer(ex, negatives);
    if (scored.negative_scores.size() != negatives.size()) {
      throw EvalError("evaluate: scorer returned wrong negative count");
    }
    const int rank = rank_ground_truth(scored.gt_score, scored.negative_scores);
    for (int k : config.ks) {
      report.recall[k] += recall_at_k(rank, k);
      report.ndcg[k] += ndcg_at_k(rank, k);
    }
  }

  const double inv = 1.0 / static_cast<double>(examples.size());
  for (int k : config.ks) {
    report.recall[k] *= inv;
    report.ndcg[k] *= inv;
  }
  return report;
}

template <typename T>
MetricsReport evaluate_split(const AdaMCTModel<T>& model,
                             std::span<const SplitExample> examples,
                             const Dataset& dataset, const EvalConfig& config) {
  const Index max_len = model.config.max_len;
  const Scorer scorer = [&](const SplitExample& ex,
                            std::span<const ItemId> negatives) {
    const Padded p = pad_truncate(ex.input, max_len);
    Tensor<T> logits =
        model_forward<T>(nullptr, model, p.items, p.valid_mask, Mode::kEval);
    ScoredExample out;
    out.gt_score = static_cast<double>(logits.at(ex.target - 1));
    out.negative_scores.reserve(negatives.size());
    for (ItemId neg : negatives) {
      out.negative_scores.push_back(static_cast<double>(logits.at(neg - 1)));
    }
    return out;
  };
  return evaluate_with_scorer(examples, dataset, config, scorer);
}

template MetricsReport evaluate_split(const AdaMCTModel<float>&,
                                      std::span<const SplitExample>,
                                      const Dataset&, const EvalConfig&);
template MetricsReport evaluate_split(const AdaMCTModel<double>&,
                                      std::span<const SplitExample>,
                                      const Dataset&, const EvalConfig&);

}  // namespace adamct
