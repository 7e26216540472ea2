#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "adamct/data.hpp"
#include "adamct/evaluator.hpp"
#include "adamct/gradcheck.hpp"
#include "adamct/model.hpp"
#include "adamct/trainer.hpp"

namespace adamct {

struct DataConfig {
  enum class Source { kSynthetic, kFile };
  Source source = Source::kSynthetic;
  std::string path;
  char delimiter = ',';
  bool header = false;
  double malformed_threshold = 0.01;
  bool sliding_window = false;
  SyntheticSpec synthetic;
  std::string markov_table_path;  // row-stochastic CSV for pattern=markov
};

// One run, fully described: data source, architecture, optimization,
// evaluation, and output location. model.num_items is derived from the data
// and is not a config key.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  ModelGradCheckOptions gradcheck;
  std::string out_dir = "adamct_out";
  bool deterministic = false;
};

// Flat key-value text with [section] headers and '#' comments. Unknown keys
// are rejected; every violation is reported at once, each with its key path.
RunConfig parse_run_config(std::istream& in, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Canonical serialization: load(serialize(cfg)) == cfg. Written to the output
// directory of every run for provenance.
std::string serialize_run_config(const RunConfig& config);

// Applies one "section.key=value" override through the same machinery as the
// parser (used by the ablation grids and CLI flags).
void apply_override(RunConfig& config, const std::string& dotted_key,
                    const std::string& value);

// Builds the dataset the config describes (file ingestion or synthesis).
Dataset build_dataset(const RunConfig& config);

}  // namespace adamct
