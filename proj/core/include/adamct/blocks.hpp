#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adamct/tensor.hpp"

namespace adamct {

enum class ConvPadding { kSame, kCausal };
enum class MixtureMode { kAdaptive, kFixed };
enum class SeattScore { kSigmoid, kSoftmax };

std::string to_string(ConvPadding p);
std::string to_string(MixtureMode m);
std::string to_string(SeattScore s);
ConvPadding conv_padding_from_string(const std::string& s);
MixtureMode mixture_mode_from_string(const std::string& s);
SeattScore seatt_score_from_string(const std::string& s);

inline constexpr double kLayerNormEps = 1e-5;

// Linear + dropout + layer norm front of each branch. Global and local
// branches own distinct instances.
template <typename T>
struct BranchEncoderWeights {
  Tensor<T> weight;  // [d x d]
  Tensor<T> bias;    // [d]
  Tensor<T> ln_gamma;
  Tensor<T> ln_beta;

  static BranchEncoderWeights init(Index d_model, RngState& rng);
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct AttentionWeights {
  std::vector<Tensor<T>> wq;  // per head, [d x d/h]
  std::vector<Tensor<T>> wk;
  std::vector<Tensor<T>> wv;
  Tensor<T> wo;  // [d x d]
  Tensor<T> ln_gamma;
  Tensor<T> ln_beta;

  Index num_heads() const { return wq.size(); }

  static AttentionWeights init(Index d_model, Index heads, RngState& rng);
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct ConvWeights {
  Tensor<T> filters;  // [m x (k*d)], m == d_model
  Tensor<T> bias;     // [m]
  Tensor<T> ln_gamma;
  Tensor<T> ln_beta;
  Index kernel = 3;
  ActKind act = ActKind::kRelu;

  static ConvWeights init(Index d_model, Index kernel, ActKind act, RngState& rng);
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

// Squeeze-excitation gate over positions. The bottleneck is ceil(N/r) wide;
// weights are sized to the fixed reference length N.
template <typename T>
struct SEAttWeights {
  Tensor<T> w1;  // [ceil(N/r) x N]
  Tensor<T> b1;
  Tensor<T> w2;  // [N x ceil(N/r)]
  Tensor<T> b2;
  Index max_len = 0;  // N
  Index reduction = 1;
  SeattScore score = SeattScore::kSigmoid;

  static SEAttWeights init(Index max_len, Index reduction, SeattScore score,
                           RngState& rng);
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct MixtureWeights {
  Tensor<T> mid_weight;  // [d x 1]
  Tensor<T> mid_bias;    // [1]
  Tensor<T> out_weight;  // [d x d]
  Tensor<T> out_bias;    // [d]
  Tensor<T> ln_gamma;
  Tensor<T> ln_beta;
  MixtureMode mode = MixtureMode::kAdaptive;
  T alpha0 = T(0.5);  // fixed-mode constant, weight of the local branch

  static MixtureWeights init(Index d_model, MixtureMode mode, T alpha0,
                             RngState& rng);
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
struct LayerWeights {
  BranchEncoderWeights<T> global_encoder;
  BranchEncoderWeights<T> local_encoder;
  AttentionWeights<T> attention;
  ConvWeights<T> conv;
  SEAttWeights<T> seatt_global;
  SEAttWeights<T> seatt_local;
  MixtureWeights<T> mixture;

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

// Runtime knobs shared by every layer of a forward pass.
template <typename T>
struct LayerRuntime {
  T dropout_hidden = T(0);  // d1
  T dropout_attn = T(0);    // d2
  Mode mode = Mode::kEval;
  RngState* rng = nullptr;
  ConvPadding conv_padding = ConvPadding::kSame;
  bool seatt_enabled = true;
};

// LN(Dpt(x W + b))
template <typename T>
Tensor<T> branch_encode(Tape<T>* tape, const Tensor<T>& x,
                        const BranchEncoderWeights<T>& w, T dropout_rate,
                        Mode mode, RngState* rng);

// Additive causal mask: 0 on and below the diagonal, kMaskedOut above.
template <typename T>
Tensor<T> causal_mask(Index n);

// LN(Dpt(Concat(head_1..head_h) W_O)) with per-head
// softmax(q k^T / sqrt(d/h) + mask) v over valid keys.
template <typename T>
Tensor<T> multi_head_self_attention(Tape<T>* tape, const Tensor<T>& x,
                                    const AttentionWeights<T>& w,
                                    const Tensor<T>& add_mask,
                                    std::span<const std::uint8_t> key_valid,
                                    T attn_dropout, Mode mode, RngState* rng);

// LN(Dpt(act(conv1d(x)))), length-preserving zero padding.
template <typename T>
Tensor<T> local_conv(Tape<T>* tape, const Tensor<T>& x, const ConvWeights<T>& w,
                     T dropout_rate, Mode mode, RngState* rng,
                     ConvPadding padding = ConvPadding::kSame);

template <typename T>
struct SeattOutput {
  Tensor<T> scores;  // [n]
  Tensor<T> scaled;  // [n x d]
};

// Squeeze to per-position means, excite through the w1/w2 bottleneck, and
// rescale rows. An input of n < max_len rows occupies the last n slots of the
// squeeze vector so that results match the same content left-padded to N.
template <typename T>
SeattOutput<T> seatt(Tape<T>* tape, const Tensor<T>& x, const SEAttWeights<T>& w,
                     std::span<const std::uint8_t> valid_mask);

// sigmoid(linear_mid(mean over valid rows of h_prev)); fixed mode returns the
// stored constant. Scalar tensor either way.
template <typename T>
Tensor<T> adaptive_coefficient(Tape<T>* tape, const Tensor<T>& h_prev,
                               const MixtureWeights<T>& w,
                               std::span<const std::uint8_t> valid_mask);

// alpha * local + (1 - alpha) * global
template <typename T>
Tensor<T> mix_branches(Tape<T>* tape, const Tensor<T>& local_branch,
                       const Tensor<T>& global_branch, const Tensor<T>& alpha);

// One full layer: both branch encoders, attention and conv branches each
// gated by their own SEAtt, adaptive mix, output linear, residual, LN.
// There is no feed-forward network. alpha_out, when given, receives the
// mixture coefficient used for this sequence.
template <typename T>
Tensor<T> layer_forward(Tape<T>* tape, const Tensor<T>& h_prev,
                        const LayerWeights<T>& w,
                        std::span<const std::uint8_t> valid_mask,
                        const LayerRuntime<T>& rt, T* alpha_out = nullptr);

}  // namespace adamct
