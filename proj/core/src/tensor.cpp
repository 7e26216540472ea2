#include "adamct/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace adamct {

namespace {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (Index i = 0; i < s.size(); ++i) {
    os << (i ? "x" : "") << s[i];
  }
  os << "]";
  return os.str();
}

Index shape_numel(const Shape& s) {
  Index n = 1;
  for (Index d : s) {
    n *= d;
  }
  return n;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
#if !defined(NDEBUG) || defined(ADAMCT_FORCE_FINITE_CHECKS)
  for (T v : t.data()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw Error(std::string("non-finite value produced by ") + op);
    }
  }
#else
  (void)t;
  (void)op;
#endif
}

template <typename T>
bool wants_grad(const Tape<T>* tape, std::initializer_list<const Tensor<T>*> ins) {
  if (tape == nullptr) {
    return false;
  }
  for (const Tensor<T>* t : ins) {
    if (t->tracked()) {
      return true;
    }
  }
  return false;
}

// Marks the output tracked and makes sure every participating buffer has a
// gradient before the closure is recorded.
template <typename T>
void prepare(Tensor<T>& out, std::initializer_list<Tensor<T>*> ins) {
  out.set_tracked(true);
  out.ensure_grad();
  for (Tensor<T>* t : ins) {
    if (t->tracked()) {
      t->ensure_grad();
    }
  }
}

}  // namespace

ActKind act_kind_from_string(const std::string& name) {
  if (name == "relu") return ActKind::kRelu;
  if (name == "gelu") return ActKind::kGelu;
  if (name == "swish") return ActKind::kSwish;
  if (name == "tanh") return ActKind::kTanh;
  if (name == "sigmoid") return ActKind::kSigmoid;
  if (name == "softmax") return ActKind::kSoftmaxLastAxis;
  throw ConfigError("unknown activation kind: '" + name + "'");
}

std::string to_string(ActKind kind) {
  switch (kind) {
    case ActKind::kRelu: return "relu";
    case ActKind::kGelu: return "gelu";
    case ActKind::kSwish: return "swish";
    case ActKind::kTanh: return "tanh";
    case ActKind::kSigmoid: return "sigmoid";
    case ActKind::kSoftmaxLastAxis: return "softmax";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool tracked) {
  auto s = std::make_shared<detail::Storage<T>>();
  s->shape = std::move(shape);
  s->data.assign(shape_numel(s->shape), T(0));
  s->tracked = tracked;
  return Tensor(std::move(s));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool tracked) {
  Tensor t = zeros(std::move(shape), tracked);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool tracked) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto s = std::make_shared<detail::Storage<T>>();
  s->shape = std::move(shape);
  s->data = std::move(data);
  s->tracked = tracked;
  return Tensor(std::move(s));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool tracked) {
  return from_data({1}, {value}, tracked);
}

template <typename T>
T Tensor<T>::value() const {
  if (numel() != 1) {
    throw ShapeError("value(): tensor " + shape_str(shape()) + " is not scalar");
  }
  return s_->data[0];
}

template <typename T>
void Tensor<T>::ensure_grad() {
  if (s_->grad.empty()) {
    s_->grad.assign(s_->data.size(), T(0));
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!s_->grad.empty()) {
    std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  ensure_grad();
  return s_->grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (s_->grad.empty()) {
    throw Error("grad(): no gradient buffer allocated");
  }
  return s_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto s = std::make_shared<detail::Storage<T>>(*s_);
  return Tensor(std::move(s));
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss has shape " + shape_str(loss.shape()) +
                     ", expected a scalar");
  }
  Tensor<T> seed = loss;
  seed.ensure_grad();
  seed.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    (*it)();
  }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void require_2d(const Tensor<T>& t, const char* op, const char* which) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": " + which + " must be 2-D, got " +
                     shape_str(t.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul", "lhs");
  require_2d(b, "matmul", "rhs");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Index p = a.dim(0), q = a.dim(1), s = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({p, s});
  for (Index i = 0; i < p; ++i) {
    for (Index k = 0; k < q; ++k) {
      const T aik = a.at(i, k);
      for (Index j = 0; j < s; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  check_finite(out, "matmul");

  if (wants_grad(tape, {&a, &b})) {
    Tensor<T> ac = a, bc = b, oc = out;
    prepare(oc, {&ac, &bc});
    tape->record([ac, bc, oc, p, q, s]() mutable {
      auto dout = oc.grad();
      if (ac.tracked()) {
        auto da = ac.grad();
        for (Index i = 0; i < p; ++i) {
          for (Index k = 0; k < q; ++k) {
            T acc = 0;
            for (Index j = 0; j < s; ++j) {
              acc += dout[i * s + j] * bc.at(k, j);
            }
            da[i * q + k] += acc;
          }
        }
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index k = 0; k < q; ++k) {
          for (Index i = 0; i < p; ++i) {
            const T aik = ac.at(i, k);
            for (Index j = 0; j < s; ++j) {
              db[k * s + j] += aik * dout[i * s + j];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul_nt(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul_nt", "lhs");
  require_2d(b, "matmul_nt", "rhs");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  }
  const Index p = a.dim(0), q = a.dim(1), s = b.dim(0);
  Tensor<T> out = Tensor<T>::zeros({p, s});
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < s; ++j) {
      T acc = 0;
      for (Index k = 0; k < q; ++k) {
        acc += a.at(i, k) * b.at(j, k);
      }
      out.at(i, j) = acc;
    }
  }
  check_finite(out, "matmul_nt");

  if (wants_grad(tape, {&a, &b})) {
    Tensor<T> ac = a, bc = b, oc = out;
    prepare(oc, {&ac, &bc});
    tape->record([ac, bc, oc, p, q, s]() mutable {
      auto dout = oc.grad();
      if (ac.tracked()) {
        auto da = ac.grad();
        for (Index i = 0; i < p; ++i) {
          for (Index j = 0; j < s; ++j) {
            const T d = dout[i * s + j];
            for (Index k = 0; k < q; ++k) {
              da[i * q + k] += d * bc.at(j, k);
            }
          }
        }
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index j = 0; j < s; ++j) {
          for (Index i = 0; i < p; ++i) {
            const T d = dout[i * s + j];
            for (Index k = 0; k < q; ++k) {
              db[j * q + k] += d * ac.at(i, k);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (Index i = 0; i < a.numel(); ++i) {
    out.at(i) = a.at(i) + b.at(i);
  }
  check_finite(out, "add");

  if (wants_grad(tape, {&a, &b})) {
    Tensor<T> ac = a, bc = b, oc = out;
    prepare(oc, {&ac, &bc});
    tape->record([ac, bc, oc]() mutable {
      auto dout = oc.grad();
      if (ac.tracked()) {
        auto da = ac.grad();
        for (Index i = 0; i < dout.size(); ++i) da[i] += dout[i];
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index i = 0; i < dout.size(); ++i) db[i] += dout[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (Index i = 0; i < a.numel(); ++i) {
    out.at(i) = a.at(i) * b.at(i);
  }
  check_finite(out, "mul");

  if (wants_grad(tape, {&a, &b})) {
    Tensor<T> ac = a, bc = b, oc = out;
    prepare(oc, {&ac, &bc});
    tape->record([ac, bc, oc]() mutable {
      auto dout = oc.grad();
      if (ac.tracked()) {
        auto da = ac.grad();
        for (Index i = 0; i < dout.size(); ++i) da[i] += dout[i] * bc.at(i);
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index i = 0; i < dout.size(); ++i) db[i] += dout[i] * ac.at(i);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T factor) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    out.at(i) = x.at(i) * factor;
  }
  check_finite(out, "scale");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, factor]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < dout.size(); ++i) dx[i] += dout[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_row_bias(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& bias) {
  require_2d(x, "add_row_bias", "input");
  if (bias.numel() != x.dim(1)) {
    throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) +
                     " does not match columns of " + shape_str(x.shape()));
  }
  const Index n = x.dim(0), d = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      out.at(i, j) = x.at(i, j) + bias.at(j);
    }
  }
  check_finite(out, "add_row_bias");

  if (wants_grad(tape, {&x, &bias})) {
    Tensor<T> xc = x, bc = bias, oc = out;
    prepare(oc, {&xc, &bc});
    tape->record([xc, bc, oc, n, d]() mutable {
      auto dout = oc.grad();
      if (xc.tracked()) {
        auto dx = xc.grad();
        for (Index i = 0; i < n * d; ++i) dx[i] += dout[i];
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < d; ++j) db[j] += dout[i * d + j];
        }
      }
    });
  }
  return out;
}

namespace {

template <typename T>
T gelu_value(T x) {
  // Exact Gaussian-CDF form.
  const double xd = static_cast<double>(x);
  return static_cast<T>(xd * 0.5 * (1.0 + std::erf(xd / 1.4142135623730951)));
}

template <typename T>
T gelu_derivative(T x) {
  const double xd = static_cast<double>(x);
  const double cdf = 0.5 * (1.0 + std::erf(xd / 1.4142135623730951));
  const double pdf = std::exp(-0.5 * xd * xd) / 2.5066282746310002;
  return static_cast<T>(cdf + xd * pdf);
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> activation(Tape<T>* tape, const Tensor<T>& x, ActKind kind) {
  if (kind == ActKind::kSoftmaxLastAxis) {
    return masked_softmax_lastaxis(tape, x, {});
  }

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    const T v = x.at(i);
    switch (kind) {
      case ActKind::kRelu: out.at(i) = v > T(0) ? v : T(0); break;
      case ActKind::kGelu: out.at(i) = gelu_value(v); break;
      case ActKind::kSwish: out.at(i) = v * sigmoid_value(v); break;
      case ActKind::kTanh: out.at(i) = std::tanh(v); break;
      case ActKind::kSigmoid: out.at(i) = sigmoid_value(v); break;
      case ActKind::kSoftmaxLastAxis: break;
    }
  }
  check_finite(out, "activation");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, kind]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < dout.size(); ++i) {
        const T v = xc.at(i);
        T d = 0;
        switch (kind) {
          case ActKind::kRelu: d = v > T(0) ? T(1) : T(0); break;
          case ActKind::kGelu: d = gelu_derivative(v); break;
          case ActKind::kSwish: {
            const T s = sigmoid_value(v);
            d = s * (T(1) + v * (T(1) - s));
            break;
          }
          case ActKind::kTanh: {
            const T y = oc.at(i);
            d = T(1) - y * y;
            break;
          }
          case ActKind::kSigmoid: {
            const T y = oc.at(i);
            d = y * (T(1) - y);
            break;
          }
          case ActKind::kSoftmaxLastAxis: break;
        }
        dx[i] += dout[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  require_2d(x, "layer_norm", "input");
  const Index n = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) +
                     "/" + shape_str(beta.shape()) + " do not match " +
                     shape_str(x.shape()));
  }
  if (eps <= T(0)) {
    throw ConfigError("layer_norm: eps must be positive");
  }

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  Tensor<T> xhat = Tensor<T>::zeros(x.shape());
  std::vector<T> inv_std(n);
  for (Index i = 0; i < n; ++i) {
    T mean = 0;
    for (Index j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= static_cast<T>(d);
    T var = 0;
    for (Index j = 0; j < d; ++j) {
      const T c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (Index j = 0; j < d; ++j) {
      const T h = (x.at(i, j) - mean) * inv;
      xhat.at(i, j) = h;
      out.at(i, j) = gamma.at(j) * h + beta.at(j);
    }
  }
  check_finite(out, "layer_norm");

  if (wants_grad(tape, {&x, &gamma, &beta})) {
    Tensor<T> xc = x, gc = gamma, bc = beta, oc = out, hc = xhat;
    prepare(oc, {&xc, &gc, &bc});
    tape->record([xc, gc, bc, oc, hc, inv_std, n, d]() mutable {
      auto dout = oc.grad();
      for (Index i = 0; i < n; ++i) {
        T sum_g = 0, sum_gh = 0;
        for (Index j = 0; j < d; ++j) {
          const T g = gc.at(j) * dout[i * d + j];
          sum_g += g;
          sum_gh += g * hc.at(i, j);
        }
        const T mean_g = sum_g / static_cast<T>(d);
        const T mean_gh = sum_gh / static_cast<T>(d);
        if (xc.tracked()) {
          auto dx = xc.grad();
          for (Index j = 0; j < d; ++j) {
            const T g = gc.at(j) * dout[i * d + j];
            dx[i * d + j] += inv_std[i] * (g - mean_g - hc.at(i, j) * mean_gh);
          }
        }
      }
      if (gc.tracked()) {
        auto dg = gc.grad();
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < d; ++j) {
            dg[j] += dout[i * d + j] * hc.at(i, j);
          }
        }
      }
      if (bc.tracked()) {
        auto db = bc.grad();
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < d; ++j) {
            db[j] += dout[i * d + j];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x, T rate, Mode mode,
                  RngState* rng) {
  if (rate < T(0) || rate >= T(1)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " +
                      std::to_string(static_cast<double>(rate)));
  }
  if (mode == Mode::kEval || rate == T(0)) {
    return x;
  }
  if (rng == nullptr) {
    throw ConfigError("dropout: train mode requires an RngState");
  }

  const T keep_scale = T(1) / (T(1) - rate);
  std::vector<std::uint8_t> kept(x.numel());
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    const bool keep = rng->uniform01() >= static_cast<double>(rate);
    kept[i] = keep ? 1 : 0;
    out.at(i) = keep ? x.at(i) * keep_scale : T(0);
  }
  check_finite(out, "dropout");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, kept = std::move(kept), keep_scale]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < dout.size(); ++i) {
        if (kept[i]) dx[i] += dout[i] * keep_scale;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_pool(Tape<T>* tape, const Tensor<T>& x, int axis,
                    std::span<const std::uint8_t> valid_mask) {
  require_2d(x, "mean_pool", "input");
  const Index n = x.dim(0), d = x.dim(1);
  if (!valid_mask.empty() && valid_mask.size() != n) {
    throw ShapeError("mean_pool: mask length " + std::to_string(valid_mask.size()) +
                     " does not match rows of " + shape_str(x.shape()));
  }
  const auto row_valid = [&](Index i) {
    return valid_mask.empty() || valid_mask[i] != 0;
  };

  if (axis == 0) {
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (row_valid(i)) ++count;
    }
    if (count == 0) {
      throw DataError("mean_pool: every position is masked out");
    }
    Tensor<T> out = Tensor<T>::zeros({d});
    for (Index i = 0; i < n; ++i) {
      if (!row_valid(i)) continue;
      for (Index j = 0; j < d; ++j) {
        out.at(j) += x.at(i, j);
      }
    }
    const T inv = T(1) / static_cast<T>(count);
    for (Index j = 0; j < d; ++j) out.at(j) *= inv;
    check_finite(out, "mean_pool");

    if (wants_grad(tape, {&x})) {
      Tensor<T> xc = x, oc = out;
      prepare(oc, {&xc});
      std::vector<std::uint8_t> mask(valid_mask.begin(), valid_mask.end());
      tape->record([xc, oc, mask = std::move(mask), n, d, inv]() mutable {
        auto dout = oc.grad();
        auto dx = xc.grad();
        for (Index i = 0; i < n; ++i) {
          if (!mask.empty() && mask[i] == 0) continue;
          for (Index j = 0; j < d; ++j) {
            dx[i * d + j] += dout[j] * inv;
          }
        }
      });
    }
    return out;
  }

  if (axis != 1) {
    throw ShapeError("mean_pool: axis must be 0 or 1");
  }
  Tensor<T> out = Tensor<T>::zeros({n});
  const T inv = T(1) / static_cast<T>(d);
  for (Index i = 0; i < n; ++i) {
    if (!row_valid(i)) continue;
    T acc = 0;
    for (Index j = 0; j < d; ++j) acc += x.at(i, j);
    out.at(i) = acc * inv;
  }
  check_finite(out, "mean_pool");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    std::vector<std::uint8_t> mask(valid_mask.begin(), valid_mask.end());
    tape->record([xc, oc, mask = std::move(mask), n, d, inv]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < n; ++i) {
        if (!mask.empty() && mask[i] == 0) continue;
        for (Index j = 0; j < d; ++j) {
          dx[i * d + j] += dout[i] * inv;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& x) {
  T acc = 0;
  for (Index i = 0; i < x.numel(); ++i) acc += x.at(i);
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc]() mutable {
      const T d = oc.grad()[0];
      auto dx = xc.grad();
      for (Index i = 0; i < dx.size(); ++i) dx[i] += d;
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " cannot become " +
                     shape_str(shape));
  }
  Tensor<T> out = Tensor<T>::from_data(std::move(shape),
                                       {x.data().begin(), x.data().end()});
  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < dout.size(); ++i) dx[i] += dout[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(Tape<T>* tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  const Index n = parts[0].rows();
  Index total = 0;
  for (const Tensor<T>& p : parts) {
    require_2d(p, "concat_cols", "input");
    if (p.dim(0) != n) {
      throw ShapeError("concat_cols: row counts disagree");
    }
    total += p.dim(1);
  }
  Tensor<T> out = Tensor<T>::zeros({n, total});
  Index col = 0;
  for (const Tensor<T>& p : parts) {
    const Index d = p.dim(1);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) {
        out.at(i, col + j) = p.at(i, j);
      }
    }
    col += d;
  }

  bool any_tracked = false;
  for (const Tensor<T>& p : parts) any_tracked |= p.tracked();
  if (tape != nullptr && any_tracked) {
    std::vector<Tensor<T>> pc(parts.begin(), parts.end());
    Tensor<T> oc = out;
    oc.set_tracked(true);
    oc.ensure_grad();
    for (Tensor<T>& p : pc) {
      if (p.tracked()) p.ensure_grad();
    }
    tape->record([pc = std::move(pc), oc, n, total]() mutable {
      auto dout = oc.grad();
      Index col = 0;
      for (Tensor<T>& p : pc) {
        const Index d = p.dim(1);
        if (p.tracked()) {
          auto dp = p.grad();
          for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < d; ++j) {
              dp[i * d + j] += dout[i * total + col + j];
            }
          }
        }
        col += d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(Tape<T>* tape, const Tensor<T>& x, Index start, Index len) {
  require_2d(x, "slice_cols", "input");
  const Index n = x.dim(0), d = x.dim(1);
  if (start + len > d) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds " +
                     shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({n, len});
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < len; ++j) {
      out.at(i, j) = x.at(i, start + j);
    }
  }
  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, start, len, n, d]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < len; ++j) {
          dx[i * d + start + j] += dout[i * len + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> take_row(Tape<T>* tape, const Tensor<T>& x, Index row) {
  require_2d(x, "take_row", "input");
  const Index n = x.dim(0), d = x.dim(1);
  if (row >= n) {
    throw ShapeError("take_row: row " + std::to_string(row) + " out of " +
                     shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({1, d});
  for (Index j = 0; j < d; ++j) out.at(0, j) = x.at(row, j);

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, row, d]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index j = 0; j < d; ++j) dx[row * d + j] += dout[j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> place_segment(Tape<T>* tape, const Tensor<T>& x, Index out_len,
                        Index offset) {
  const Index n = x.numel();
  if (offset + n > out_len) {
    throw ShapeError("place_segment: segment of " + std::to_string(n) +
                     " at offset " + std::to_string(offset) +
                     " exceeds length " + std::to_string(out_len));
  }
  Tensor<T> out = Tensor<T>::zeros({out_len});
  for (Index i = 0; i < n; ++i) out.at(offset + i) = x.at(i);

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc, offset, n]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < n; ++i) dx[i] += dout[offset + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(Tape<T>* tape, const Tensor<T>& table,
                      std::span<const Index> row_ids) {
  require_2d(table, "gather_rows", "table");
  const Index rows = table.dim(0), d = table.dim(1);
  for (Index i = 0; i < row_ids.size(); ++i) {
    if (row_ids[i] >= rows) {
      throw DataError("gather_rows: id " + std::to_string(row_ids[i]) +
                      " at position " + std::to_string(i) + " exceeds table of " +
                      std::to_string(rows) + " rows");
    }
  }
  const Index n = row_ids.size();
  Tensor<T> out = Tensor<T>::zeros({n, d});
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      out.at(i, j) = table.at(row_ids[i], j);
    }
  }

  if (wants_grad(tape, {&table})) {
    Tensor<T> tc = table, oc = out;
    prepare(oc, {&tc});
    std::vector<Index> ids(row_ids.begin(), row_ids.end());
    tape->record([tc, oc, ids = std::move(ids), d]() mutable {
      auto dout = oc.grad();
      auto dt = tc.grad();
      for (Index i = 0; i < ids.size(); ++i) {
        for (Index j = 0; j < d; ++j) {
          dt[ids[i] * d + j] += dout[i * d + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_rows(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s) {
  require_2d(x, "scale_rows", "input");
  const Index n = x.dim(0), d = x.dim(1);
  if (s.numel() != n) {
    throw ShapeError("scale_rows: weights " + shape_str(s.shape()) +
                     " do not match rows of " + shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < n; ++i) {
    const T w = s.at(i);
    for (Index j = 0; j < d; ++j) {
      out.at(i, j) = x.at(i, j) * w;
    }
  }
  check_finite(out, "scale_rows");

  if (wants_grad(tape, {&x, &s})) {
    Tensor<T> xc = x, sc = s, oc = out;
    prepare(oc, {&xc, &sc});
    tape->record([xc, sc, oc, n, d]() mutable {
      auto dout = oc.grad();
      if (xc.tracked()) {
        auto dx = xc.grad();
        for (Index i = 0; i < n; ++i) {
          const T w = sc.at(i);
          for (Index j = 0; j < d; ++j) {
            dx[i * d + j] += dout[i * d + j] * w;
          }
        }
      }
      if (sc.tracked()) {
        auto ds = sc.grad();
        for (Index i = 0; i < n; ++i) {
          T acc = 0;
          for (Index j = 0; j < d; ++j) {
            acc += dout[i * d + j] * xc.at(i, j);
          }
          ds[i] += acc;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_by_scalar(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s) {
  if (s.numel() != 1) {
    throw ShapeError("scale_by_scalar: scale has shape " + shape_str(s.shape()));
  }
  const T w = s.at(0);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    out.at(i) = x.at(i) * w;
  }
  check_finite(out, "scale_by_scalar");

  if (wants_grad(tape, {&x, &s})) {
    Tensor<T> xc = x, sc = s, oc = out;
    prepare(oc, {&xc, &sc});
    tape->record([xc, sc, oc, w]() mutable {
      auto dout = oc.grad();
      if (xc.tracked()) {
        auto dx = xc.grad();
        for (Index i = 0; i < dout.size(); ++i) dx[i] += dout[i] * w;
      }
      if (sc.tracked()) {
        T acc = 0;
        for (Index i = 0; i < dout.size(); ++i) acc += dout[i] * xc.at(i);
        sc.grad()[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> one_minus(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < x.numel(); ++i) out.at(i) = T(1) - x.at(i);

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    tape->record([xc, oc]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < dout.size(); ++i) dx[i] -= dout[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mask_rows(Tape<T>* tape, const Tensor<T>& x,
                    std::span<const std::uint8_t> valid_mask) {
  require_2d(x, "mask_rows", "input");
  if (valid_mask.empty()) {
    return x;  // no mask, nothing to zero
  }
  const Index n = x.dim(0), d = x.dim(1);
  if (valid_mask.size() != n) {
    throw ShapeError("mask_rows: mask length " + std::to_string(valid_mask.size()) +
                     " does not match " + shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < n; ++i) {
    if (valid_mask[i] == 0) continue;
    for (Index j = 0; j < d; ++j) out.at(i, j) = x.at(i, j);
  }

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    std::vector<std::uint8_t> mask(valid_mask.begin(), valid_mask.end());
    tape->record([xc, oc, mask = std::move(mask), n, d]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < n; ++i) {
        if (mask[i] == 0) continue;
        for (Index j = 0; j < d; ++j) dx[i * d + j] += dout[i * d + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> masked_softmax_lastaxis(Tape<T>* tape, const Tensor<T>& x,
                                  std::span<const std::uint8_t> allowed) {
  const Index n = x.rows(), d = x.cols();
  if (!allowed.empty() && allowed.size() != d) {
    throw ShapeError("masked_softmax: mask length " + std::to_string(allowed.size()) +
                     " does not match last axis of " + shape_str(x.shape()));
  }
  const auto col_ok = [&](Index j) { return allowed.empty() || allowed[j] != 0; };

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (Index i = 0; i < n; ++i) {
    T maxv = 0;
    bool any = false;
    for (Index j = 0; j < d; ++j) {
      if (!col_ok(j)) continue;
      const T v = x.at(i * d + j);
      if (!any || v > maxv) maxv = v;
      any = true;
    }
    if (!any) {
      throw DataError("masked_softmax: row " + std::to_string(i) +
                      " has no allowed column");
    }
    T z = 0;
    for (Index j = 0; j < d; ++j) {
      if (!col_ok(j)) continue;
      const T e = std::exp(x.at(i * d + j) - maxv);
      out.at(i * d + j) = e;
      z += e;
    }
    const T inv = T(1) / z;
    for (Index j = 0; j < d; ++j) {
      if (!col_ok(j)) continue;
      out.at(i * d + j) *= inv;
    }
  }
  check_finite(out, "masked_softmax");

  if (wants_grad(tape, {&x})) {
    Tensor<T> xc = x, oc = out;
    prepare(oc, {&xc});
    std::vector<std::uint8_t> mask(allowed.begin(), allowed.end());
    tape->record([xc, oc, mask = std::move(mask), n, d]() mutable {
      auto dout = oc.grad();
      auto dx = xc.grad();
      for (Index i = 0; i < n; ++i) {
        T dot = 0;
        for (Index j = 0; j < d; ++j) {
          if (!mask.empty() && mask[j] == 0) continue;
          dot += dout[i * d + j] * oc.at(i * d + j);
        }
        for (Index j = 0; j < d; ++j) {
          if (!mask.empty() && mask[j] == 0) continue;
          dx[i * d + j] += oc.at(i * d + j) * (dout[i * d + j] - dot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scaled_dot_attention(Tape<T>* tape, const Tensor<T>& q,
                               const Tensor<T>& k, const Tensor<T>& v,
                               const Tensor<T>& add_mask,
                               std::span<const std::uint8_t> key_valid, T s) {
  require_2d(q, "attention", "q");
  require_2d(k, "attention", "k");
  require_2d(v, "attention", "v");
  const Index n = q.dim(0), dh = q.dim(1);
  if (k.dim(0) != n || k.dim(1) != dh || v.dim(0) != n) {
    throw ShapeError("attention: q " + shape_str(q.shape()) + ", k " +
                     shape_str(k.shape()) + ", v " + shape_str(v.shape()) +
                     " disagree");
  }
  if (add_mask.rows() != n || add_mask.cols() != n) {
    throw ShapeError("attention: mask " + shape_str(add_mask.shape()) +
                     " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!key_valid.empty() && key_valid.size() != n) {
    throw ShapeError("attention: key mask length mismatch");
  }
  const Index dv = v.dim(1);
  const auto key_ok = [&](Index i, Index j) {
    if (!key_valid.empty() && key_valid[j] == 0) return false;
    return static_cast<double>(add_mask.at(i, j)) > kMaskThreshold;
  };

  // probs rows hold exact zeros at excluded keys; excluded terms are skipped
  // in the value mix, which keeps causal outputs bitwise independent of
  // future rows.
  Tensor<T> probs = Tensor<T>::zeros({n, n});
  Tensor<T> out = Tensor<T>::zeros({n, dv});
  for (Index i = 0; i < n; ++i) {
    T maxv = 0;
    bool any = false;
    for (Index j = 0; j < n; ++j) {
      if (!key_ok(i, j)) continue;
      T score = 0;
      for (Index c = 0; c < dh; ++c) score += q.at(i, c) * k.at(j, c);
      score = score * s + add_mask.at(i, j);
      probs.at(i, j) = score;  // staging raw scores
      if (!any || score > maxv) maxv = score;
      any = true;
    }
    if (!any) {
      throw DataError("attention: every key is masked for query " +
                      std::to_string(i));
    }
    T z = 0;
    for (Index j = 0; j < n; ++j) {
      if (!key_ok(i, j)) {
        probs.at(i, j) = T(0);
        continue;
      }
      const T e = std::exp(probs.at(i, j) - maxv);
      probs.at(i, j) = e;
      z += e;
    }
    const T inv = T(1) / z;
    for (Index j = 0; j < n; ++j) {
      const T p = probs.at(i, j) * inv;
      probs.at(i, j) = p;
      if (p == T(0)) continue;
      for (Index c = 0; c < dv; ++c) {
        out.at(i, c) += p * v.at(j, c);
      }
    }
  }
  check_finite(out, "attention");

  if (wants_grad(tape, {&q, &k, &v})) {
    Tensor<T> qc = q, kc = k, vc = v, oc = out, pc = probs;
    prepare(oc, {&qc, &kc, &vc});
    tape->record([qc, kc, vc, oc, pc, n, dh, dv, s]() mutable {
      auto dout = oc.grad();
      std::vector<T> dscore(n);
      for (Index i = 0; i < n; ++i) {
        // r = dP . P restricted to row i equals dout_i . out_i.
        T r = 0;
        for (Index c = 0; c < dv; ++c) r += dout[i * dv + c] * oc.at(i, c);
        for (Index j = 0; j < n; ++j) {
          const T p = pc.at(i, j);
          if (p == T(0)) {
            dscore[j] = T(0);
            continue;
          }
          T dp = 0;
          for (Index c = 0; c < dv; ++c) dp += dout[i * dv + c] * vc.at(j, c);
          dscore[j] = p * (dp - r);
        }
        if (vc.tracked()) {
          auto dv_g = vc.grad();
          for (Index j = 0; j < n; ++j) {
            const T p = pc.at(i, j);
            if (p == T(0)) continue;
            for (Index c = 0; c < dv; ++c) {
              dv_g[j * dv + c] += p * dout[i * dv + c];
            }
          }
        }
        if (qc.tracked()) {
          auto dq = qc.grad();
          for (Index j = 0; j < n; ++j) {
            const T dsj = dscore[j] * s;
            if (dsj == T(0)) continue;
            for (Index c = 0; c < dh; ++c) {
              dq[i * dh + c] += dsj * kc.at(j, c);
            }
          }
        }
        if (kc.tracked()) {
          auto dk = kc.grad();
          for (Index j = 0; j < n; ++j) {
            const T dsj = dscore[j] * s;
            if (dsj == T(0)) continue;
            for (Index c = 0; c < dh; ++c) {
              dk[j * dh + c] += dsj * qc.at(i, c);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(Tape<T>* tape, const Tensor<T>& logits, Index target) {
  const Index n = logits.numel();
  if (target >= n) {
    throw DataError("cross_entropy: target " + std::to_string(target) +
                    " out of " + std::to_string(n) + " logits");
  }
  T maxv = logits.at(0);
  for (Index i = 1; i < n; ++i) maxv = std::max(maxv, logits.at(i));
  T z = 0;
  for (Index i = 0; i < n; ++i) z += std::exp(logits.at(i) - maxv);
  const T loss = std::log(z) + maxv - logits.at(target);
  Tensor<T> out = Tensor<T>::scalar(loss);
  check_finite(out, "cross_entropy");

  if (wants_grad(tape, {&logits})) {
    Tensor<T> lc = logits, oc = out;
    prepare(oc, {&lc});
    tape->record([lc, oc, target, maxv, z, n]() mutable {
      const T d = oc.grad()[0];
      auto dl = lc.grad();
      for (Index i = 0; i < n; ++i) {
        const T p = std::exp(lc.at(i) - maxv) / z;
        dl[i] += d * (p - (i == target ? T(1) : T(0)));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& filters,
                 const Tensor<T>& bias, Index kernel, Index pad_left) {
  require_2d(x, "conv1d", "input");
  require_2d(filters, "conv1d", "filters");
  const Index n = x.dim(0), d = x.dim(1);
  const Index m = filters.dim(0);
  if (filters.dim(1) != kernel * d) {
    throw ShapeError("conv1d: filters " + shape_str(filters.shape()) +
                     " do not match kernel " + std::to_string(kernel) +
                     " x channels " + std::to_string(d));
  }
  if (bias.numel() != m) {
    throw ShapeError("conv1d: bias " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(m) + " filters");
  }

  Tensor<T> out = Tensor<T>::zeros({n, m});
  const auto in_range = [&](std::int64_t r) {
    return r >= 0 && r < static_cast<std::int64_t>(n);
  };
  for (Index j = 0; j < n; ++j) {
    for (Index f = 0; f < m; ++f) {
      T acc = bias.at(f);
      for (Index a = 0; a < kernel; ++a) {
        const std::int64_t r = static_cast<std::int64_t>(j + a) -
                               static_cast<std::int64_t>(pad_left);
        if (!in_range(r)) continue;  // zero padding
        for (Index c = 0; c < d; ++c) {
          acc += x.at(static_cast<Index>(r), c) * filters.at(f, a * d + c);
        }
      }
      out.at(j, f) = acc;
    }
  }
  check_finite(out, "conv1d");

  if (wants_grad(tape, {&x, &filters, &bias})) {
    Tensor<T> xc = x, fc = filters, bc = bias, oc = out;
    prepare(oc, {&xc, &fc, &bc});
    tape->record([xc, fc, bc, oc, n, d, m, kernel, pad_left]() mutable {
      auto dout = oc.grad();
      for (Index j = 0; j < n; ++j) {
        for (Index f = 0; f < m; ++f) {
          const T g = dout[j * m + f];
          if (g == T(0)) continue;
          if (bc.tracked()) bc.grad()[f] += g;
          for (Index a = 0; a < kernel; ++a) {
            const std::int64_t r = static_cast<std::int64_t>(j + a) -
                                   static_cast<std::int64_t>(pad_left);
            if (r < 0 || r >= static_cast<std::int64_t>(n)) continue;
            const Index ri = static_cast<Index>(r);
            for (Index c = 0; c < d; ++c) {
              if (xc.tracked()) {
                xc.grad()[ri * d + c] += g * fc.at(f, a * d + c);
              }
              if (fc.tracked()) {
                fc.grad()[f * kernel * d + a * d + c] += g * xc.at(ri, c);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

#define ADAMCT_INSTANTIATE_OPS(T)                                              \
  template Tensor<T> matmul(Tape<T>*, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> matmul_nt(Tape<T>*, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> add(Tape<T>*, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> mul(Tape<T>*, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> scale(Tape<T>*, const Tensor<T>&, T);                     \
  template Tensor<T> add_row_bias(Tape<T>*, const Tensor<T>&,                  \
                                  const Tensor<T>&);                           \
  template Tensor<T> activation(Tape<T>*, const Tensor<T>&, ActKind);          \
  template Tensor<T> layer_norm(Tape<T>*, const Tensor<T>&, const Tensor<T>&,  \
                                const Tensor<T>&, T);                          \
  template Tensor<T> dropout(Tape<T>*, const Tensor<T>&, T, Mode, RngState*);  \
  template Tensor<T> mean_pool(Tape<T>*, const Tensor<T>&, int,                \
                               std::span<const std::uint8_t>);                 \
  template Tensor<T> sum(Tape<T>*, const Tensor<T>&);                          \
  template Tensor<T> reshape(Tape<T>*, const Tensor<T>&, Shape);               \
  template Tensor<T> concat_cols(Tape<T>*, std::span<const Tensor<T>>);        \
  template Tensor<T> slice_cols(Tape<T>*, const Tensor<T>&, Index, Index);     \
  template Tensor<T> take_row(Tape<T>*, const Tensor<T>&, Index);              \
  template Tensor<T> place_segment(Tape<T>*, const Tensor<T>&, Index, Index);  \
  template Tensor<T> gather_rows(Tape<T>*, const Tensor<T>&,                   \
                                 std::span<const Index>);                      \
  template Tensor<T> scale_rows(Tape<T>*, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> scale_by_scalar(Tape<T>*, const Tensor<T>&,               \
                                     const Tensor<T>&);                        \
  template Tensor<T> one_minus(Tape<T>*, const Tensor<T>&);                    \
  template Tensor<T> mask_rows(Tape<T>*, const Tensor<T>&,                     \
                               std::span<const std::uint8_t>);                 \
  template Tensor<T> masked_softmax_lastaxis(Tape<T>*, const Tensor<T>&,       \
                                             std::span<const std::uint8_t>);   \
  template Tensor<T> scaled_dot_attention(Tape<T>*, const Tensor<T>&,          \
                                          const Tensor<T>&, const Tensor<T>&,  \
                                          const Tensor<T>&,                    \
                                          std::span<const std::uint8_t>, T);   \
  template Tensor<T> cross_entropy(Tape<T>*, const Tensor<T>&, Index);         \
  template Tensor<T> conv1d(Tape<T>*, const Tensor<T>&, const Tensor<T>&,      \
                            const Tensor<T>&, Index, Index);

ADAMCT_INSTANTIATE_OPS(float)
ADAMCT_INSTANTIATE_OPS(double)

#undef ADAMCT_INSTANTIATE_OPS

}  // namespace adamct
