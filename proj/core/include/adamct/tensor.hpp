#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adamct/errors.hpp"
#include "adamct/rng.hpp"

namespace adamct {

using Index = std::size_t;
using Shape = std::vector<Index>;

enum class Mode { kTrain, kEval };

enum class ActKind { kRelu, kGelu, kSwish, kTanh, kSigmoid, kSoftmaxLastAxis };

ActKind act_kind_from_string(const std::string& name);
std::string to_string(ActKind kind);

// Additive mask entries at or below this threshold are treated as exact
// exclusions (probability 0) by the masked softmax and attention kernels.
inline constexpr double kMaskedOut = -1e9;
inline constexpr double kMaskThreshold = -1e8;

namespace detail {

template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first use
  bool tracked = false;
};

}  // namespace detail

// Dense row-major tensor. Value-semantic handle: copies share storage, so a
// parameter held by a model and by an optimizer is the same buffer. clone()
// makes a deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool tracked = false);
  static Tensor full(Shape shape, T value, bool tracked = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool tracked = false);
  static Tensor scalar(T value, bool tracked = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  Index ndim() const { return s_->shape.size(); }
  Index dim(Index axis) const { return s_->shape[axis]; }
  Index numel() const { return s_->data.size(); }

  // 2-D helpers; a 1-D tensor behaves as a single row.
  Index rows() const { return ndim() >= 2 ? dim(0) : 1; }
  Index cols() const { return ndim() >= 2 ? dim(1) : dim(0); }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }

  T& at(Index i) { return s_->data[i]; }
  const T& at(Index i) const { return s_->data[i]; }
  T& at(Index i, Index j) { return s_->data[i * cols() + j]; }
  const T& at(Index i, Index j) const { return s_->data[i * cols() + j]; }

  T value() const;  // numel()==1 only

  bool tracked() const { return s_->tracked; }
  void set_tracked(bool tracked) { s_->tracked = tracked; }

  bool has_grad() const { return !s_->grad.empty(); }
  void ensure_grad();
  void zero_grad();
  std::span<T> grad();
  std::span<const T> grad() const;

  Tensor clone() const;

  // Stable identity of the underlying storage (shared-table probes).
  const void* storage_id() const { return s_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Storage<T>> s) : s_(std::move(s)) {}
  std::shared_ptr<detail::Storage<T>> s_;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

// Ordered record of executed operations. Ops append backward closures in
// execution order, which is already a topological order; backward() walks it
// once in reverse. Tapes are rebuilt per forward pass.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss)=1 and accumulates gradients into every tracked
  // tensor reachable from the loss. Gradients add across fan-out.
  void backward(const Tensor<T>& loss);

 private:
  std::vector<std::function<void()>> nodes_;
};

template <typename T>
void backward(Tape<T>& tape, const Tensor<T>& loss) {
  tape.backward(loss);
}

// ---------------------------------------------------------------------------
// Primitive differentiable operations. Every op takes the tape first; pass
// nullptr to skip recording (pure inference). Outputs are tracked whenever a
// recording tape is given and any input is tracked.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

// a [p x q] times b [s x q] transposed -> [p x s].
template <typename T>
Tensor<T> matmul_nt(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T factor);

// y[i,j] = x[i,j] + bias[j]
template <typename T>
Tensor<T> add_row_bias(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> activation(Tape<T>* tape, const Tensor<T>& x, ActKind kind);

template <typename T>
Tensor<T> layer_norm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps);

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode (and rate 0) returns the input handle
// unchanged, so evaluation is bit-identical to no-op.
template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x, T rate, Mode mode,
                  RngState* rng);

// axis=0: mean across rows -> [d]; masked rows are excluded (all-invalid is a
// DataError). axis=1: per-row mean across columns -> [n]; masked rows give 0.
template <typename T>
Tensor<T> mean_pool(Tape<T>* tape, const Tensor<T>& x, int axis,
                    std::span<const std::uint8_t> valid_mask = {});

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> concat_cols(Tape<T>* tape, std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> slice_cols(Tape<T>* tape, const Tensor<T>& x, Index start, Index len);

template <typename T>
Tensor<T> take_row(Tape<T>* tape, const Tensor<T>& x, Index row);

// Places a length-n vector into a length-out_len zero vector at `offset`.
template <typename T>
Tensor<T> place_segment(Tape<T>* tape, const Tensor<T>& x, Index out_len,
                        Index offset);

// Row gather with scatter-add backward; the embedding lookup.
template <typename T>
Tensor<T> gather_rows(Tape<T>* tape, const Tensor<T>& table,
                      std::span<const Index> row_ids);

// y[i,j] = x[i,j] * s[i]; s has numel == rows(x).
template <typename T>
Tensor<T> scale_rows(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s);

// y = s * x with a tracked scalar s.
template <typename T>
Tensor<T> scale_by_scalar(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s);

template <typename T>
Tensor<T> one_minus(Tape<T>* tape, const Tensor<T>& x);

// Zeroes rows where the mask is false (forward and backward).
template <typename T>
Tensor<T> mask_rows(Tape<T>* tape, const Tensor<T>& x,
                    std::span<const std::uint8_t> valid_mask);

// Softmax over the last axis where only `allowed` columns participate;
// disallowed columns get probability exactly 0. A row with no allowed column
// is a DataError.
template <typename T>
Tensor<T> masked_softmax_lastaxis(Tape<T>* tape, const Tensor<T>& x,
                                  std::span<const std::uint8_t> allowed);

// softmax(scale * q k^T + add_mask) v over allowed keys. A key is allowed for
// query i when key_valid[j] (empty mask = all valid) and add_mask(i,j) is
// above kMaskThreshold; excluded keys get probability exactly 0 and are
// skipped, so outputs at row t are bitwise independent of rows > t under a
// causal mask.
template <typename T>
Tensor<T> scaled_dot_attention(Tape<T>* tape, const Tensor<T>& q,
                               const Tensor<T>& k, const Tensor<T>& v,
                               const Tensor<T>& add_mask,
                               std::span<const std::uint8_t> key_valid, T scale);

// -log softmax(logits)[target], max-subtracted. target indexes logits.
template <typename T>
Tensor<T> cross_entropy(Tape<T>* tape, const Tensor<T>& logits, Index target);

// 1-D convolution along the row axis. x [n x d], filters [m x (k*d)] (one
// flattened [k x d] filter per output channel), bias [m]; rows outside the
// input count as zeros, window for output j starts at j - pad_left.
template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& filters,
                 const Tensor<T>& bias, Index kernel, Index pad_left);

}  // namespace adamct
