#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adamct/config.hpp"

namespace adamct {

enum class GridKind { kMixture, kSeatt, kComponents };

GridKind grid_kind_from_string(const std::string& s);
std::string to_string(GridKind kind);

struct AblationCell {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;  // key, value
};

struct AblationSpec {
  GridKind grid = GridKind::kMixture;
  std::vector<AblationCell> cells;
  std::vector<std::uint64_t> seeds;
};

// The fixed grids: mixture = adaptive plus fixed local weights
// {1.0, 0.8, 0.5, 0.2, 0.0}; seatt = the four sigmoid/softmax combinations
// per branch; components = full model plus one removal each of the global
// branch, local branch, adaptive mixture, and both gates.
AblationSpec make_grid(GridKind kind, std::vector<std::uint64_t> seeds);

struct AblationRun {
  std::uint64_t seed = 0;
  double ndcg10 = 0.0;
  double recall10 = 0.0;
  bool ok = false;
  std::string error;
};

struct AblationCellResult {
  AblationCell cell;
  std::vector<AblationRun> runs;
  double mean_ndcg10 = 0.0;
  double mean_recall10 = 0.0;
  bool ok = false;  // every seed finished
};

struct AblationReport {
  std::string grid;
  std::vector<AblationCellResult> cells;
  bool all_ok = false;

  std::string to_json() const;
  // cell,setting,seed,ndcg10,recall10,status (+ one mean row per cell)
  std::string to_csv() const;
};

// Trains and evaluates every cell x seed from the base config. A failing
// cell is recorded and the grid continues.
AblationReport run_ablation(const RunConfig& base, const AblationSpec& spec);

}  // namespace adamct
