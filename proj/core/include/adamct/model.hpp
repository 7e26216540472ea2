#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adamct/blocks.hpp"
#include "adamct/tensor.hpp"

namespace adamct {

// Item IDs are 1-based; 0 is the padding slot.
using ItemId = std::int32_t;
inline constexpr ItemId kPadItem = 0;

struct ModelConfig {
  std::int64_t num_items = 0;  // |V|, excludes padding
  Index d_model = 32;
  Index num_layers = 2;  // L
  Index num_heads = 2;   // h
  Index kernel_size = 3;
  Index reduction = 2;  // r
  ActKind conv_activation = ActKind::kRelu;
  Index max_len = 50;  // N
  double dropout_hidden = 0.1;  // d1
  double dropout_attn = 0.1;    // d2
  SeattScore seatt_local = SeattScore::kSigmoid;
  SeattScore seatt_global = SeattScore::kSigmoid;
  MixtureMode mixture_mode = MixtureMode::kAdaptive;
  double alpha0 = 0.5;  // fixed-mode weight of the local branch
  ConvPadding conv_padding = ConvPadding::kSame;
  bool seatt_enabled = true;

  // Returns every violated constraint; empty means valid.
  std::vector<std::string> validate() const;
};

template <typename T>
struct EmbeddingTables {
  Tensor<T> item_table;  // [(|V|+1) x d], row 0 is padding
  Tensor<T> pos_table;   // [N x d], learnable
};

template <typename T>
struct OutputHead {
  Tensor<T> w_pred;  // [d x d]
  Tensor<T> b_pred;  // [d]
  Tensor<T> b_out;   // [|V|+1]; the padding logit is excluded from ranking
  Tensor<T> item_table;  // same storage as EmbeddingTables::item_table
};

template <typename T>
struct AdaMCTModel {
  ModelConfig config;
  EmbeddingTables<T> embeddings;
  std::vector<LayerWeights<T>> layers;
  OutputHead<T> head;

  // All learnable tensors in checkpoint declaration order. The shared item
  // table appears once, under the embedding module.
  std::vector<NamedParam<T>> parameters() const;

  void zero_grad() const;

  // Deep copy; the clone's head shares the clone's item table, not the
  // original's.
  AdaMCTModel clone() const;
};

template <typename T>
AdaMCTModel<T> init_model(const ModelConfig& config, RngState& rng);

// Row t of the result is item_table[id_t] + pos_table[N - n + t]: inputs of
// n < N rows take the positional rows they would occupy after left-padding
// to N. Padding IDs embed row 0; downstream masking keeps them inert.
template <typename T>
Tensor<T> embed_sequence(Tape<T>* tape, const AdaMCTModel<T>& model,
                         std::span<const ItemId> items);

// Per-layer observations from one forward pass.
template <typename T>
struct ForwardTrace {
  std::vector<T> alpha;  // mixture coefficient per layer
};

// Pre-softmax logits over the |V| real items (padding excluded) for the next
// item after the last valid position.
template <typename T>
Tensor<T> model_forward(Tape<T>* tape, const AdaMCTModel<T>& model,
                        std::span<const ItemId> items,
                        std::span<const std::uint8_t> valid_mask, Mode mode,
                        RngState* rng = nullptr,
                        ForwardTrace<T>* trace = nullptr);

// -log softmax(logits)[target] for a 1-based item target.
template <typename T>
Tensor<T> cross_entropy_loss(Tape<T>* tape, const Tensor<T>& logits,
                             ItemId target);

struct ParamCount {
  std::string name;
  Index count = 0;
};

struct ParamCountReport {
  std::vector<ParamCount> tensors;
  Index total = 0;

  std::string to_json() const;
};

template <typename T>
ParamCountReport count_parameters(const AdaMCTModel<T>& model);

}  // namespace adamct
