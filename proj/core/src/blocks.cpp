#include "adamct/blocks.hpp"

#include <cmath>
#include <string>

namespace adamct {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kInitClipSds = 2.0;

template <typename T>
Tensor<T> init_weight(Shape shape, RngState& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), /*tracked=*/true);
  for (auto& v : t.data()) {
    v = static_cast<T>(rng.truncated_normal(kInitStd, kInitClipSds));
  }
  return t;
}

template <typename T>
Tensor<T> init_zeros(Shape shape) {
  return Tensor<T>::zeros(std::move(shape), /*tracked=*/true);
}

template <typename T>
Tensor<T> init_ones(Shape shape) {
  return Tensor<T>::full(std::move(shape), T(1), /*tracked=*/true);
}

Index bottleneck_width(Index max_len, Index reduction) {
  return (max_len + reduction - 1) / reduction;  // ceil(N/r), always >= 1
}

}  // namespace

std::string to_string(ConvPadding p) {
  return p == ConvPadding::kSame ? "same" : "causal";
}

std::string to_string(MixtureMode m) {
  return m == MixtureMode::kAdaptive ? "adaptive" : "fixed";
}

std::string to_string(SeattScore s) {
  return s == SeattScore::kSigmoid ? "sigmoid" : "softmax";
}

ConvPadding conv_padding_from_string(const std::string& s) {
  if (s == "same") return ConvPadding::kSame;
  if (s == "causal") return ConvPadding::kCausal;
  throw ConfigError("unknown conv padding: '" + s + "' (same|causal)");
}

MixtureMode mixture_mode_from_string(const std::string& s) {
  if (s == "adaptive") return MixtureMode::kAdaptive;
  if (s == "fixed") return MixtureMode::kFixed;
  throw ConfigError("unknown mixture mode: '" + s + "' (adaptive|fixed)");
}

SeattScore seatt_score_from_string(const std::string& s) {
  if (s == "sigmoid") return SeattScore::kSigmoid;
  if (s == "softmax") return SeattScore::kSoftmax;
  throw ConfigError("unknown seatt activation: '" + s + "' (sigmoid|softmax)");
}

// ---------------------------------------------------------------------------
// Weight initialization and parameter enumeration
// ---------------------------------------------------------------------------

template <typename T>
BranchEncoderWeights<T> BranchEncoderWeights<T>::init(Index d, RngState& rng) {
  BranchEncoderWeights w;
  w.weight = init_weight<T>({d, d}, rng);
  w.bias = init_zeros<T>({d});
  w.ln_gamma = init_ones<T>({d});
  w.ln_beta = init_zeros<T>({d});
  return w;
}

template <typename T>
void BranchEncoderWeights<T>::collect(const std::string& prefix,
                                      std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
  out.push_back({prefix + ".ln_gamma", ln_gamma});
  out.push_back({prefix + ".ln_beta", ln_beta});
}

template <typename T>
AttentionWeights<T> AttentionWeights<T>::init(Index d, Index heads,
                                              RngState& rng) {
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  AttentionWeights w;
  const Index dh = d / heads;
  for (Index h = 0; h < heads; ++h) {
    w.wq.push_back(init_weight<T>({d, dh}, rng));
    w.wk.push_back(init_weight<T>({d, dh}, rng));
    w.wv.push_back(init_weight<T>({d, dh}, rng));
  }
  w.wo = init_weight<T>({d, d}, rng);
  w.ln_gamma = init_ones<T>({d});
  w.ln_beta = init_zeros<T>({d});
  return w;
}

template <typename T>
void AttentionWeights<T>::collect(const std::string& prefix,
                                  std::vector<NamedParam<T>>& out) const {
  for (Index h = 0; h < wq.size(); ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    out.push_back({head + ".wq", wq[h]});
    out.push_back({head + ".wk", wk[h]});
    out.push_back({head + ".wv", wv[h]});
  }
  out.push_back({prefix + ".wo", wo});
  out.push_back({prefix + ".ln_gamma", ln_gamma});
  out.push_back({prefix + ".ln_beta", ln_beta});
}

template <typename T>
ConvWeights<T> ConvWeights<T>::init(Index d, Index kernel, ActKind act,
                                    RngState& rng) {
  if (kernel % 2 == 0 || kernel == 0) {
    throw ConfigError("conv: kernel size must be odd, got " +
                      std::to_string(kernel));
  }
  ConvWeights w;
  w.filters = init_weight<T>({d, kernel * d}, rng);  // m == d_model
  w.bias = init_zeros<T>({d});
  w.ln_gamma = init_ones<T>({d});
  w.ln_beta = init_zeros<T>({d});
  w.kernel = kernel;
  w.act = act;
  return w;
}

template <typename T>
void ConvWeights<T>::collect(const std::string& prefix,
                             std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".filters", filters});
  out.push_back({prefix + ".bias", bias});
  out.push_back({prefix + ".ln_gamma", ln_gamma});
  out.push_back({prefix + ".ln_beta", ln_beta});
}

template <typename T>
SEAttWeights<T> SEAttWeights<T>::init(Index max_len, Index reduction,
                                      SeattScore score, RngState& rng) {
  if (reduction == 0) {
    throw ConfigError("seatt: reduction ratio must be >= 1");
  }
  SEAttWeights w;
  const Index b = bottleneck_width(max_len, reduction);
  w.w1 = init_weight<T>({b, max_len}, rng);
  w.b1 = init_zeros<T>({b});
  w.w2 = init_weight<T>({max_len, b}, rng);
  w.b2 = init_zeros<T>({max_len});
  w.max_len = max_len;
  w.reduction = reduction;
  w.score = score;
  return w;
}

template <typename T>
void SEAttWeights<T>::collect(const std::string& prefix,
                              std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b2", b2});
}

template <typename T>
MixtureWeights<T> MixtureWeights<T>::init(Index d, MixtureMode mode, T alpha0,
                                          RngState& rng) {
  if (mode == MixtureMode::kFixed && (alpha0 < T(0) || alpha0 > T(1))) {
    throw ConfigError("mixture: fixed alpha must lie in [0, 1]");
  }
  MixtureWeights w;
  w.mid_weight = init_weight<T>({d, 1}, rng);
  w.mid_bias = init_zeros<T>({1});
  w.out_weight = init_weight<T>({d, d}, rng);
  w.out_bias = init_zeros<T>({d});
  w.ln_gamma = init_ones<T>({d});
  w.ln_beta = init_zeros<T>({d});
  w.mode = mode;
  w.alpha0 = alpha0;
  return w;
}

template <typename T>
void MixtureWeights<T>::collect(const std::string& prefix,
                                std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".mid_weight", mid_weight});
  out.push_back({prefix + ".mid_bias", mid_bias});
  out.push_back({prefix + ".out_weight", out_weight});
  out.push_back({prefix + ".out_bias", out_bias});
  out.push_back({prefix + ".ln_gamma", ln_gamma});
  out.push_back({prefix + ".ln_beta", ln_beta});
}

template <typename T>
void LayerWeights<T>::collect(const std::string& prefix,
                              std::vector<NamedParam<T>>& out) const {
  global_encoder.collect(prefix + ".global_encoder", out);
  local_encoder.collect(prefix + ".local_encoder", out);
  attention.collect(prefix + ".attention", out);
  conv.collect(prefix + ".conv", out);
  seatt_global.collect(prefix + ".seatt_global", out);
  seatt_local.collect(prefix + ".seatt_local", out);
  mixture.collect(prefix + ".mixture", out);
}

// ---------------------------------------------------------------------------
// Block operations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> branch_encode(Tape<T>* tape, const Tensor<T>& x,
                        const BranchEncoderWeights<T>& w, T dropout_rate,
                        Mode mode, RngState* rng) {
  Tensor<T> h = add_row_bias(tape, matmul(tape, x, w.weight), w.bias);
  h = dropout(tape, h, dropout_rate, mode, rng);
  return layer_norm(tape, h, w.ln_gamma, w.ln_beta, static_cast<T>(kLayerNormEps));
}

template <typename T>
Tensor<T> causal_mask(Index n) {
  Tensor<T> m = Tensor<T>::zeros({n, n});
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      m.at(i, j) = static_cast<T>(kMaskedOut);
    }
  }
  return m;
}

template <typename T>
Tensor<T> multi_head_self_attention(Tape<T>* tape, const Tensor<T>& x,
                                    const AttentionWeights<T>& w,
                                    const Tensor<T>& add_mask,
                                    std::span<const std::uint8_t> key_valid,
                                    T attn_dropout, Mode mode, RngState* rng) {
  const Index d = x.dim(1);
  const Index heads = w.num_heads();
  if (d % heads != 0) {
    throw ShapeError("attention: d_model not divisible by head count");
  }
  const T inv_temp = T(1) / std::sqrt(static_cast<T>(d / heads));

  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (Index h = 0; h < heads; ++h) {
    Tensor<T> q = matmul(tape, x, w.wq[h]);
    Tensor<T> k = matmul(tape, x, w.wk[h]);
    Tensor<T> v = matmul(tape, x, w.wv[h]);
    outs.push_back(
        scaled_dot_attention(tape, q, k, v, add_mask, key_valid, inv_temp));
  }
  Tensor<T> cat = concat_cols<T>(tape, outs);
  Tensor<T> proj = matmul(tape, cat, w.wo);
  proj = dropout(tape, proj, attn_dropout, mode, rng);
  return layer_norm(tape, proj, w.ln_gamma, w.ln_beta,
                    static_cast<T>(kLayerNormEps));
}

template <typename T>
Tensor<T> local_conv(Tape<T>* tape, const Tensor<T>& x, const ConvWeights<T>& w,
                     T dropout_rate, Mode mode, RngState* rng,
                     ConvPadding padding) {
  const Index pad_left =
      padding == ConvPadding::kSame ? (w.kernel - 1) / 2 : w.kernel - 1;
  Tensor<T> c = conv1d(tape, x, w.filters, w.bias, w.kernel, pad_left);
  c = activation(tape, c, w.act);
  c = dropout(tape, c, dropout_rate, mode, rng);
  return layer_norm(tape, c, w.ln_gamma, w.ln_beta, static_cast<T>(kLayerNormEps));
}

template <typename T>
SeattOutput<T> seatt(Tape<T>* tape, const Tensor<T>& x, const SEAttWeights<T>& w,
                     std::span<const std::uint8_t> valid_mask) {
  const Index n = x.dim(0);
  const Index big_n = w.max_len;
  if (n > big_n) {
    throw ShapeError("seatt: input of " + std::to_string(n) +
                     " rows exceeds reference length " + std::to_string(big_n));
  }
  const Index offset = big_n - n;

  // Squeeze: per-position feature means, masked positions contribute 0.
  Tensor<T> z = mean_pool(tape, x, /*axis=*/1, valid_mask);
  Tensor<T> z_full = reshape(tape, place_segment(tape, z, big_n, offset),
                             {Index(1), big_n});

  // Excite: sigma(w2 . relu(w1 . z)) computed in row-vector form.
  Tensor<T> hidden = add_row_bias(tape, matmul_nt(tape, z_full, w.w1), w.b1);
  hidden = activation(tape, hidden, ActKind::kRelu);
  Tensor<T> logits = add_row_bias(tape, matmul_nt(tape, hidden, w.w2), w.b2);

  Tensor<T> scores_row;
  if (w.score == SeattScore::kSigmoid) {
    scores_row = slice_cols(tape, activation(tape, logits, ActKind::kSigmoid),
                            offset, n);
  } else {
    // Softmax ablation normalizes over valid positions only.
    Tensor<T> seg = slice_cols(tape, logits, offset, n);
    scores_row = masked_softmax_lastaxis(tape, seg, valid_mask);
  }
  Tensor<T> scores = reshape(tape, scores_row, {n});
  return {scores, scale_rows(tape, x, scores)};
}

template <typename T>
Tensor<T> adaptive_coefficient(Tape<T>* tape, const Tensor<T>& h_prev,
                               const MixtureWeights<T>& w,
                               std::span<const std::uint8_t> valid_mask) {
  if (!valid_mask.empty()) {
    bool any = false;
    for (auto v : valid_mask) any |= (v != 0);
    if (!any) {
      throw DataError("adaptive_coefficient: every position is masked out");
    }
  }
  if (w.mode == MixtureMode::kFixed) {
    return Tensor<T>::scalar(w.alpha0);
  }
  const Index d = h_prev.dim(1);
  Tensor<T> pooled = reshape(tape, mean_pool(tape, h_prev, /*axis=*/0, valid_mask),
                             {Index(1), d});
  Tensor<T> mid = add_row_bias(tape, matmul(tape, pooled, w.mid_weight), w.mid_bias);
  Tensor<T> alpha = activation(tape, mid, ActKind::kSigmoid);
  return reshape(tape, alpha, {Index(1)});
}

template <typename T>
Tensor<T> mix_branches(Tape<T>* tape, const Tensor<T>& local_branch,
                       const Tensor<T>& global_branch, const Tensor<T>& alpha) {
  if (local_branch.shape() != global_branch.shape()) {
    throw ShapeError("mix_branches: branch shapes disagree");
  }
  Tensor<T> beta = one_minus(tape, alpha);
  return add(tape, scale_by_scalar(tape, local_branch, alpha),
             scale_by_scalar(tape, global_branch, beta));
}

template <typename T>
Tensor<T> layer_forward(Tape<T>* tape, const Tensor<T>& h_prev,
                        const LayerWeights<T>& w,
                        std::span<const std::uint8_t> valid_mask,
                        const LayerRuntime<T>& rt, T* alpha_out) {
  const Index n = h_prev.dim(0);

  // Global branch.
  Tensor<T> enc_g = branch_encode(tape, h_prev, w.global_encoder,
                                  rt.dropout_hidden, rt.mode, rt.rng);
  Tensor<T> mask = causal_mask<T>(n);
  Tensor<T> attn = multi_head_self_attention(tape, enc_g, w.attention, mask,
                                             valid_mask, rt.dropout_attn,
                                             rt.mode, rt.rng);
  Tensor<T> branch_g =
      rt.seatt_enabled ? seatt(tape, attn, w.seatt_global, valid_mask).scaled
                       : attn;

  // Local branch. Masked rows are zeroed before the convolution so padding
  // slots behave exactly like out-of-range zero padding.
  Tensor<T> enc_l = branch_encode(tape, h_prev, w.local_encoder,
                                  rt.dropout_hidden, rt.mode, rt.rng);
  enc_l = mask_rows(tape, enc_l, valid_mask);
  Tensor<T> conv = local_conv(tape, enc_l, w.conv, rt.dropout_hidden, rt.mode,
                              rt.rng, rt.conv_padding);
  Tensor<T> branch_l =
      rt.seatt_enabled ? seatt(tape, conv, w.seatt_local, valid_mask).scaled
                       : conv;

  // Per-user mixture coefficient from the layer input.
  Tensor<T> alpha = adaptive_coefficient(tape, h_prev, w.mixture, valid_mask);
  if (alpha_out != nullptr) {
    *alpha_out = alpha.value();
  }
  Tensor<T> mixed = mix_branches(tape, branch_l, branch_g, alpha);

  Tensor<T> out = add_row_bias(tape, matmul(tape, mixed, w.mixture.out_weight),
                               w.mixture.out_bias);
  out = dropout(tape, out, rt.dropout_hidden, rt.mode, rt.rng);
  out = add(tape, h_prev, out);
  return layer_norm(tape, out, w.mixture.ln_gamma, w.mixture.ln_beta,
                    static_cast<T>(kLayerNormEps));
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define ADAMCT_INSTANTIATE_BLOCKS(T)                                           \
  template struct BranchEncoderWeights<T>;                                     \
  template struct AttentionWeights<T>;                                         \
  template struct ConvWeights<T>;                                              \
  template struct SEAttWeights<T>;                                             \
  template struct MixtureWeights<T>;                                           \
  template struct LayerWeights<T>;                                             \
  template Tensor<T> branch_encode(Tape<T>*, const Tensor<T>&,                 \
                                   const BranchEncoderWeights<T>&, T, Mode,    \
                                   RngState*);                                 \
  template Tensor<T> causal_mask<T>(Index);                                    \
  template Tensor<T> multi_head_self_attention(                                \
      Tape<T>*, const Tensor<T>&, const AttentionWeights<T>&,                  \
      const Tensor<T>&, std::span<const std::uint8_t>, T, Mode, RngState*);    \
  template Tensor<T> local_conv(Tape<T>*, const Tensor<T>&,                    \
                                const ConvWeights<T>&, T, Mode, RngState*,     \
                                ConvPadding);                                  \
  template SeattOutput<T> seatt(Tape<T>*, const Tensor<T>&,                    \
                                const SEAttWeights<T>&,                        \
                                std::span<const std::uint8_t>);                \
  template Tensor<T> adaptive_coefficient(Tape<T>*, const Tensor<T>&,          \
                                          const MixtureWeights<T>&,            \
                                          std::span<const std::uint8_t>);      \
  template Tensor<T> mix_branches(Tape<T>*, const Tensor<T>&,                  \
                                  const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> layer_forward(Tape<T>*, const Tensor<T>&,                 \
                                   const LayerWeights<T>&,                     \
                                   std::span<const std::uint8_t>,              \
                                   const LayerRuntime<T>&, T*);

ADAMCT_INSTANTIATE_BLOCKS(float)
ADAMCT_INSTANTIATE_BLOCKS(double)

#undef ADAMCT_INSTANTIATE_BLOCKS

}  // namespace adamct
