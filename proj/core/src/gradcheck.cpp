#include "adamct/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "adamct/data.hpp"

namespace adamct {

template <typename T>
GradCheckReport<T> grad_check(const std::function<Tensor<T>(Tape<T>&)>& f,
                              std::span<const NamedParam<T>> params, T eps,
                              Index max_coords, RngState& rng) {
  for (const NamedParam<T>& p : params) {
    Tensor<T> t = p.tensor;
    t.zero_grad();
  }

  Tape<T> tape;
  Tensor<T> loss = f(tape);
  if (!std::isfinite(static_cast<double>(loss.value()))) {
    throw DataError("grad_check: loss is not finite");
  }
  tape.backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const NamedParam<T>& p : params) {
    Tensor<T> t = p.tensor;
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), T(0));
    }
  }

  const auto eval_loss = [&]() {
    Tape<T> scratch;
    const T v = f(scratch).value();
    if (!std::isfinite(static_cast<double>(v))) {
      throw DataError("grad_check: perturbed loss is not finite");
    }
    return v;
  };

  GradCheckReport<T> report;
  for (Index pi = 0; pi < params.size(); ++pi) {
    Tensor<T> t = params[pi].tensor;
    std::vector<Index> coords;
    if (max_coords == 0 || t.numel() <= max_coords) {
      coords.resize(t.numel());
      for (Index i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      coords.reserve(max_coords);
      for (Index i = 0; i < max_coords; ++i) {
        coords.push_back(static_cast<Index>(rng.uniform_below(t.numel())));
      }
    }

    GradCheckRow<T> row;
    row.name = params[pi].name;
    row.coords_checked = coords.size();
    for (Index c : coords) {
      const T saved = t.at(c);
      t.at(c) = saved + eps;
      const T plus = eval_loss();
      t.at(c) = saved - eps;
      const T minus = eval_loss();
      t.at(c) = saved;

      const T numeric = (plus - minus) / (T(2) * eps);
      const T expected = analytic[pi][c];
      const T denom = std::max({std::abs(expected), std::abs(numeric),
                                static_cast<T>(1e-8)});
      const T rel = std::abs(expected - numeric) / denom;
      row.max_rel_err = std::max(row.max_rel_err, rel);
    }
    if (row.max_rel_err >= report.max_rel_err) {
      if (report.worst_tensor.empty() || row.max_rel_err > report.max_rel_err) {
        report.worst_tensor = row.name;
      }
      report.max_rel_err = std::max(report.max_rel_err, row.max_rel_err);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

template GradCheckReport<float> grad_check(
    const std::function<Tensor<float>(Tape<float>&)>&,
    std::span<const NamedParam<float>>, float, Index, RngState&);
template GradCheckReport<double> grad_check(
    const std::function<Tensor<double>(Tape<double>&)>&,
    std::span<const NamedParam<double>>, double, Index, RngState&);

std::string gradcheck_group(const std::string& name) {
  if (name == "embedding.item_table") return "embeddings";
  if (name == "embedding.pos_table") return "positional";
  if (name.rfind("head.", 0) == 0) return "output_head";
  const auto dot = name.find('.');
  if (dot == std::string::npos) return "other";
  const auto second = name.find('.', dot + 1);
  const std::string module = name.substr(
      dot + 1, second == std::string::npos ? std::string::npos : second - dot - 1);
  if (module == "global_encoder" || module == "local_encoder" ||
      module == "attention" || module == "conv" || module == "seatt_global" ||
      module == "seatt_local" || module == "mixture") {
    return module;
  }
  return "other";
}

std::string ModelGradCheckReport::to_json() const {
  nlohmann::json j;
  j["worst"] = worst;
  j["worst_tensor"] = worst_tensor;
  j["threshold"] = threshold;
  j["passed"] = passed();
  nlohmann::json rows_json = nlohmann::json::array();
  for (const ModelGradCheckRow& r : rows) {
    rows_json.push_back({{"tensor", r.tensor},
                         {"group", r.group},
                         {"max_rel_err", r.max_rel_err},
                         {"coords_checked", r.coords_checked}});
  }
  j["rows"] = rows_json;
  return j.dump(2);
}

ModelGradCheckReport gradcheck_model(const ModelConfig& config,
                                     const ModelGradCheckOptions& options) {
  RngState rng(options.seed);
  RngState init_rng = rng.child(1);
  AdaMCTModel<double> model = init_model<double>(config, init_rng);

  // One synthetic batch of uniform-random sequences, fixed for every
  // f-evaluation; forward runs in eval mode so f is deterministic.
  RngState data_rng = rng.child(2);
  std::vector<std::vector<ItemId>> items(options.batch_size);
  std::vector<std::vector<std::uint8_t>> masks(options.batch_size);
  for (Index b = 0; b < options.batch_size; ++b) {
    const Index len = static_cast<Index>(data_rng.uniform_int(
        2, static_cast<std::int64_t>(config.max_len)));
    std::vector<ItemId> seq(len);
    for (auto& id : seq) {
      id = static_cast<ItemId>(data_rng.uniform_below(
               static_cast<std::uint64_t>(config.num_items))) +
           1;
    }
    const Padded p = pad_truncate(seq, config.max_len);
    items[b] = p.items;
    masks[b] = p.valid_mask;
  }
  std::vector<ItemId> targets(options.batch_size);
  for (auto& t : targets) {
    t = static_cast<ItemId>(data_rng.uniform_below(
            static_cast<std::uint64_t>(config.num_items))) +
        1;
  }

  const auto f = [&](Tape<double>& tape) {
    Tensor<double> total;
    for (Index b = 0; b < options.batch_size; ++b) {
      Tensor<double> logits =
          model_forward<double>(&tape, model, items[b], masks[b], Mode::kEval);
      Tensor<double> loss = cross_entropy_loss(&tape, logits, targets[b]);
      total = total.defined() ? add(&tape, total, loss) : loss;
    }
    return scale(&tape, total, 1.0 / static_cast<double>(options.batch_size));
  };

  const auto params = model.parameters();
  RngState coord_rng = rng.child(3);
  const GradCheckReport<double> raw = grad_check<double>(
      f, params, options.eps, options.max_coords, coord_rng);

  ModelGradCheckReport report;
  report.threshold = options.threshold;
  report.worst = raw.max_rel_err;
  report.worst_tensor = raw.worst_tensor;
  for (const GradCheckRow<double>& r : raw.rows) {
    report.rows.push_back(
        {r.name, gradcheck_group(r.name), r.max_rel_err, r.coords_checked});
  }
  return report;
}

}  // namespace adamct
