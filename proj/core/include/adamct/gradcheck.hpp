#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adamct/model.hpp"
#include "adamct/tensor.hpp"

namespace adamct {

template <typename T>
struct GradCheckRow {
  std::string name;
  T max_rel_err = T(0);
  Index coords_checked = 0;
};

template <typename T>
struct GradCheckReport {
  std::vector<GradCheckRow<T>> rows;
  T max_rel_err = T(0);
  std::string worst_tensor;
};

// Compares the tape's analytic gradients against central finite differences
// of `f`, which must be deterministic in the parameters (eval-mode dropout,
// fixed inputs). Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); per tensor up to
// max_coords coordinates are sampled (0 = all). Meant for T = double.
template <typename T>
GradCheckReport<T> grad_check(const std::function<Tensor<T>(Tape<T>&)>& f,
                              std::span<const NamedParam<T>> params, T eps,
                              Index max_coords, RngState& rng);

struct ModelGradCheckOptions {
  Index batch_size = 4;
  std::uint64_t seed = 12345;
  double eps = 1e-5;
  Index max_coords = 0;  // 0 checks every coordinate
  double threshold = 1e-5;
};

struct ModelGradCheckRow {
  std::string tensor;
  std::string group;
  double max_rel_err = 0.0;
  Index coords_checked = 0;
};

struct ModelGradCheckReport {
  std::vector<ModelGradCheckRow> rows;  // parameter declaration order
  double worst = 0.0;
  std::string worst_tensor;
  double threshold = 0.0;

  bool passed() const { return worst < threshold; }
  std::string to_json() const;
};

// Maps a parameter name to its reporting group (embeddings, positional,
// global/local encoder, attention, conv, both seatt, mixture, output head).
std::string gradcheck_group(const std::string& tensor_name);

// Builds a 64-bit model from the config, draws one synthetic batch, and runs
// grad_check of the mean cross-entropy loss against every parameter.
ModelGradCheckReport gradcheck_model(const ModelConfig& config,
                                     const ModelGradCheckOptions& options = {});

}  // namespace adamct
