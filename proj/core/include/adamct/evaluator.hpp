#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adamct/data.hpp"
#include "adamct/model.hpp"
#include "adamct/rng.hpp"

namespace adamct {

struct EvalConfig {
  Index negatives = 100;
  std::vector<int> ks = {1, 5, 10};
  std::uint64_t seed = 7;
  std::string split = "test";

  std::vector<std::string> validate() const;
};

// 1 + |{negatives with score >= gt}|: ties count against the model.
int rank_ground_truth(double gt_score, std::span<const double> negative_scores);

int recall_at_k(int rank, int k);

// 1 / log2(rank + 1) inside the top-k list, else 0.
double ndcg_at_k(int rank, int k);

struct MetricsReport {
  std::string split;
  Index num_users = 0;
  Index negatives = 0;
  std::uint64_t seed = 0;
  std::map<int, double> recall;  // k -> mean
  std::map<int, double> ndcg;

  std::string to_json() const;
  // split,num_users,negatives,seed,recall@...,ndcg@...
  std::string to_csv() const;
};

// Scores for one example: first the ground truth, then each negative.
struct ScoredExample {
  double gt_score = 0.0;
  std::vector<double> negative_scores;
};

using Scorer = std::function<ScoredExample(const SplitExample&,
                                           std::span<const ItemId> negatives)>;

// Protocol core: resamples negatives per user from the evaluation stream,
// asserts they avoid the user's full history and the target, ranks the
// ground truth pessimistically, and averages per-user metrics.
MetricsReport evaluate_with_scorer(std::span<const SplitExample> examples,
                                   const Dataset& dataset,
                                   const EvalConfig& config, const Scorer& scorer);

template <typename T>
MetricsReport evaluate_split(const AdaMCTModel<T>& model,
                             std::span<const SplitExample> examples,
                             const Dataset& dataset, const EvalConfig& config);

}  // namespace adamct
