#include "adamct/model.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace adamct {

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> problems;
  const auto bad = [&](const std::string& msg) { problems.push_back(msg); };

  if (num_items < 1) bad("model.num_items: must be >= 1, got " + std::to_string(num_items));
  if (d_model == 0) bad("model.d_model: must be >= 1");
  if (num_layers == 0) bad("model.layers: must be >= 1");
  if (num_heads == 0) {
    bad("model.heads: must be >= 1");
  } else if (d_model % num_heads != 0) {
    bad("model.d_model: " + std::to_string(d_model) +
        " is not divisible by model.heads " + std::to_string(num_heads));
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    bad("model.kernel: must be odd, got " + std::to_string(kernel_size));
  } else if (kernel_size > max_len) {
    bad("model.kernel: " + std::to_string(kernel_size) +
        " exceeds model.max_len " + std::to_string(max_len));
  }
  if (reduction == 0) bad("model.reduction: must be >= 1");
  if (max_len == 0) bad("model.max_len: must be >= 1");
  if (dropout_hidden < 0.0 || dropout_hidden >= 1.0) {
    bad("model.dropout_hidden: must lie in [0, 1)");
  }
  if (dropout_attn < 0.0 || dropout_attn >= 1.0) {
    bad("model.dropout_attn: must lie in [0, 1)");
  }
  if (mixture_mode == MixtureMode::kFixed && (alpha0 < 0.0 || alpha0 > 1.0)) {
    bad("model.alpha0: must lie in [0, 1]");
  }
  return problems;
}

template <typename T>
std::vector<NamedParam<T>> AdaMCTModel<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  out.push_back({"embedding.item_table", embeddings.item_table});
  out.push_back({"embedding.pos_table", embeddings.pos_table});
  for (Index l = 0; l < layers.size(); ++l) {
    layers[l].collect("layer" + std::to_string(l), out);
  }
  out.push_back({"head.w_pred", head.w_pred});
  out.push_back({"head.b_pred", head.b_pred});
  out.push_back({"head.b_out", head.b_out});
  return out;
}

template <typename T>
void AdaMCTModel<T>::zero_grad() const {
  for (const NamedParam<T>& p : parameters()) {
    Tensor<T> t = p.tensor;
    t.zero_grad();
  }
}

template <typename T>
AdaMCTModel<T> AdaMCTModel<T>::clone() const {
  AdaMCTModel<T> copy = *this;
  auto fresh = [](Tensor<T>& t) { t = t.clone(); };
  fresh(copy.embeddings.item_table);
  fresh(copy.embeddings.pos_table);
  for (LayerWeights<T>& l : copy.layers) {
    fresh(l.global_encoder.weight);
    fresh(l.global_encoder.bias);
    fresh(l.global_encoder.ln_gamma);
    fresh(l.global_encoder.ln_beta);
    fresh(l.local_encoder.weight);
    fresh(l.local_encoder.bias);
    fresh(l.local_encoder.ln_gamma);
    fresh(l.local_encoder.ln_beta);
    for (auto& t : l.attention.wq) fresh(t);
    for (auto& t : l.attention.wk) fresh(t);
    for (auto& t : l.attention.wv) fresh(t);
    fresh(l.attention.wo);
    fresh(l.attention.ln_gamma);
    fresh(l.attention.ln_beta);
    fresh(l.conv.filters);
    fresh(l.conv.bias);
    fresh(l.conv.ln_gamma);
    fresh(l.conv.ln_beta);
    fresh(l.seatt_global.w1);
    fresh(l.seatt_global.b1);
    fresh(l.seatt_global.w2);
    fresh(l.seatt_global.b2);
    fresh(l.seatt_local.w1);
    fresh(l.seatt_local.b1);
    fresh(l.seatt_local.w2);
    fresh(l.seatt_local.b2);
    fresh(l.mixture.mid_weight);
    fresh(l.mixture.mid_bias);
    fresh(l.mixture.out_weight);
    fresh(l.mixture.out_bias);
    fresh(l.mixture.ln_gamma);
    fresh(l.mixture.ln_beta);
  }
  fresh(copy.head.w_pred);
  fresh(copy.head.b_pred);
  fresh(copy.head.b_out);
  copy.head.item_table = copy.embeddings.item_table;  // keep sharing
  return copy;
}

template <typename T>
AdaMCTModel<T> init_model(const ModelConfig& config, RngState& rng) {
  const std::vector<std::string> problems = config.validate();
  if (!problems.empty()) {
    std::string joined = "invalid model config:";
    for (const std::string& p : problems) joined += "\n  - " + p;
    throw ConfigError(joined);
  }

  AdaMCTModel<T> m;
  m.config = config;
  const Index d = config.d_model;
  const Index vocab_rows = static_cast<Index>(config.num_items) + 1;

  m.embeddings.item_table = Tensor<T>::zeros({vocab_rows, d}, /*tracked=*/true);
  {
    auto data = m.embeddings.item_table.data();
    // Row 0 (padding) stays zero-initialized; it is still a parameter.
    for (Index i = d; i < data.size(); ++i) {
      data[i] = static_cast<T>(rng.truncated_normal(0.02, 2.0));
    }
  }
  m.embeddings.pos_table = Tensor<T>::zeros({config.max_len, d}, /*tracked=*/true);
  for (auto& v : m.embeddings.pos_table.data()) {
    v = static_cast<T>(rng.truncated_normal(0.02, 2.0));
  }

  for (Index l = 0; l < config.num_layers; ++l) {
    LayerWeights<T> layer;
    layer.global_encoder = BranchEncoderWeights<T>::init(d, rng);
    layer.local_encoder = BranchEncoderWeights<T>::init(d, rng);
    layer.attention = AttentionWeights<T>::init(d, config.num_heads, rng);
    layer.conv = ConvWeights<T>::init(d, config.kernel_size,
                                      config.conv_activation, rng);
    layer.seatt_global = SEAttWeights<T>::init(config.max_len, config.reduction,
                                               config.seatt_global, rng);
    layer.seatt_local = SEAttWeights<T>::init(config.max_len, config.reduction,
                                              config.seatt_local, rng);
    layer.mixture = MixtureWeights<T>::init(d, config.mixture_mode,
                                            static_cast<T>(config.alpha0), rng);
    m.layers.push_back(std::move(layer));
  }

  m.head.w_pred = Tensor<T>::zeros({d, d}, /*tracked=*/true);
  for (auto& v : m.head.w_pred.data()) {
    v = static_cast<T>(rng.truncated_normal(0.02, 2.0));
  }
  m.head.b_pred = Tensor<T>::zeros({d}, /*tracked=*/true);
  m.head.b_out = Tensor<T>::zeros({vocab_rows}, /*tracked=*/true);
  m.head.item_table = m.embeddings.item_table;  // shared storage, no copy
  return m;
}

template <typename T>
Tensor<T> embed_sequence(Tape<T>* tape, const AdaMCTModel<T>& model,
                         std::span<const ItemId> items) {
  const Index n = items.size();
  const Index big_n = model.config.max_len;
  if (n == 0) {
    throw DataError("embed_sequence: empty sequence");
  }
  if (n > big_n) {
    throw DataError("embed_sequence: sequence of " + std::to_string(n) +
                    " items exceeds max_len " + std::to_string(big_n));
  }
  std::vector<Index> item_rows(n);
  std::vector<Index> pos_rows(n);
  for (Index t = 0; t < n; ++t) {
    const ItemId id = items[t];
    if (id < 0 || id > model.config.num_items) {
      throw DataError("embed_sequence: item ID " + std::to_string(id) +
                      " at position " + std::to_string(t) + " is outside [0, " +
                      std::to_string(model.config.num_items) + "]");
    }
    item_rows[t] = static_cast<Index>(id);
    pos_rows[t] = big_n - n + t;
  }
  Tensor<T> item_emb = gather_rows(tape, model.embeddings.item_table, item_rows);
  Tensor<T> pos_emb = gather_rows(tape, model.embeddings.pos_table, pos_rows);
  return add(tape, item_emb, pos_emb);
}

template <typename T>
Tensor<T> model_forward(Tape<T>* tape, const AdaMCTModel<T>& model,
                        std::span<const ItemId> items,
                        std::span<const std::uint8_t> valid_mask, Mode mode,
                        RngState* rng, ForwardTrace<T>* trace) {
  const Index n = items.size();
  if (valid_mask.size() != n) {
    throw DataError("model_forward: mask length " +
                    std::to_string(valid_mask.size()) +
                    " does not match sequence length " + std::to_string(n));
  }
  Index last_valid = n;
  for (Index t = n; t-- > 0;) {
    if (valid_mask[t] != 0) {
      last_valid = t;
      break;
    }
  }
  if (last_valid == n) {
    throw DataError("model_forward: sequence has no valid position");
  }

  Tensor<T> h = embed_sequence(tape, model, items);

  LayerRuntime<T> rt;
  rt.dropout_hidden = static_cast<T>(model.config.dropout_hidden);
  rt.dropout_attn = static_cast<T>(model.config.dropout_attn);
  rt.mode = mode;
  rt.rng = rng;
  rt.conv_padding = model.config.conv_padding;
  rt.seatt_enabled = model.config.seatt_enabled;

  if (trace != nullptr) {
    trace->alpha.assign(model.layers.size(), T(0));
  }
  for (Index l = 0; l < model.layers.size(); ++l) {
    T alpha = T(0);
    h = layer_forward(tape, h, model.layers[l], valid_mask, rt,
                      trace != nullptr ? &alpha : nullptr);
    if (trace != nullptr) {
      trace->alpha[l] = alpha;
    }
  }

  Tensor<T> h_last = take_row(tape, h, last_valid);
  Tensor<T> hidden = add_row_bias(tape, matmul(tape, h_last, model.head.w_pred),
                                  model.head.b_pred);
  hidden = activation(tape, hidden, ActKind::kGelu);
  Tensor<T> logits_full = matmul_nt(tape, hidden, model.head.item_table);
  logits_full = add_row_bias(
      tape, logits_full,
      model.head.b_out);
  // Drop the padding column; logit i scores item ID i+1.
  const Index vocab = static_cast<Index>(model.config.num_items);
  Tensor<T> logits = slice_cols(tape, logits_full, 1, vocab);
  return reshape(tape, logits, {vocab});
}

template <typename T>
Tensor<T> cross_entropy_loss(Tape<T>* tape, const Tensor<T>& logits,
                             ItemId target) {
  if (target == kPadItem) {
    throw DataError("cross_entropy_loss: target is the padding item");
  }
  if (target < 1 || static_cast<Index>(target) > logits.numel()) {
    throw DataError("cross_entropy_loss: target " + std::to_string(target) +
                    " outside [1, " + std::to_string(logits.numel()) + "]");
  }
  return cross_entropy(tape, logits, static_cast<Index>(target) - 1);
}

std::string ParamCountReport::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  nlohmann::json rows = nlohmann::json::array();
  for (const ParamCount& p : tensors) {
    rows.push_back({{"name", p.name}, {"count", p.count}});
  }
  j["tensors"] = rows;
  return j.dump(2);
}

template <typename T>
ParamCountReport count_parameters(const AdaMCTModel<T>& model) {
  ParamCountReport report;
  for (const NamedParam<T>& p : model.parameters()) {
    report.tensors.push_back({p.name, p.tensor.numel()});
    report.total += p.tensor.numel();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define ADAMCT_INSTANTIATE_MODEL(T)                                           \
  template struct AdaMCTModel<T>;                                             \
  template AdaMCTModel<T> init_model(const ModelConfig&, RngState&);          \
  template Tensor<T> embed_sequence(Tape<T>*, const AdaMCTModel<T>&,          \
                                    std::span<const ItemId>);                 \
  template Tensor<T> model_forward(Tape<T>*, const AdaMCTModel<T>&,           \
                                   std::span<const ItemId>,                   \
                                   std::span<const std::uint8_t>, Mode,       \
                                   RngState*, ForwardTrace<T>*);              \
  template Tensor<T> cross_entropy_loss(Tape<T>*, const Tensor<T>&, ItemId);  \
  template ParamCountReport count_parameters(const AdaMCTModel<T>&);

ADAMCT_INSTANTIATE_MODEL(float)
ADAMCT_INSTANTIATE_MODEL(double)

#undef ADAMCT_INSTANTIATE_MODEL

}  // namespace adamct
