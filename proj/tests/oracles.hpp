// Test-only reference implementations, deliberately written as direct loops
// independent of the library's computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adamct/rng.hpp"
#include "adamct/tensor.hpp"

namespace oracles {

using adamct::Index;

// Plain triple-loop matrix product.
template <typename T>
std::vector<T> matmul_ref(const std::vector<T>& a, const std::vector<T>& b,
                          Index p, Index q, Index s) {
  std::vector<T> c(p * s, T(0));
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < s; ++j) {
      T acc = 0;
      for (Index k = 0; k < q; ++k) {
        acc += a[i * q + k] * b[k * s + j];
      }
      c[i * s + j] = acc;
    }
  }
  return c;
}

// Standard normal CDF by composite Simpson quadrature of the density; no erf.
inline double gauss_cdf_quadrature(double x) {
  const double lo = 0.0;
  const double hi = std::abs(x);
  const int intervals = 20000;  // even
  const double h = (hi - lo) / intervals;
  auto density = [](double t) {
    return std::exp(-0.5 * t * t) / 2.506628274631000502;
  };
  double acc = density(lo) + density(hi);
  for (int i = 1; i < intervals; ++i) {
    acc += density(lo + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  const double integral = acc * h / 3.0;
  return x >= 0.0 ? 0.5 + integral : 0.5 - integral;
}

inline double gelu_quadrature(double x) { return x * gauss_cdf_quadrature(x); }

// Masked column means: sum over valid rows / count.
template <typename T>
std::vector<T> masked_col_mean_ref(const std::vector<T>& x, Index n, Index d,
                                   const std::vector<std::uint8_t>& mask) {
  std::vector<T> out(d, T(0));
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    ++count;
    for (Index j = 0; j < d; ++j) out[j] += x[i * d + j];
  }
  for (Index j = 0; j < d; ++j) out[j] /= static_cast<T>(count);
  return out;
}

// Single-query reference attention: per query, explicit softmax over the
// allowed keys, then the weighted value sum.
template <typename T>
std::vector<T> attention_ref(const std::vector<T>& q, const std::vector<T>& k,
                             const std::vector<T>& v, Index n, Index dh,
                             Index dv, const std::vector<std::uint8_t>& key_ok_ij,
                             T scale) {
  std::vector<T> out(n * dv, T(0));
  for (Index i = 0; i < n; ++i) {
    std::vector<double> scores(n, 0.0);
    double maxv = -1e300;
    for (Index j = 0; j < n; ++j) {
      if (!key_ok_ij[i * n + j]) continue;
      double s = 0.0;
      for (Index c = 0; c < dh; ++c) {
        s += static_cast<double>(q[i * dh + c]) * static_cast<double>(k[j * dh + c]);
      }
      scores[j] = s * static_cast<double>(scale);
      maxv = std::max(maxv, scores[j]);
    }
    double z = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (!key_ok_ij[i * n + j]) continue;
      z += std::exp(scores[j] - maxv);
    }
    for (Index j = 0; j < n; ++j) {
      if (!key_ok_ij[i * n + j]) continue;
      const double p = std::exp(scores[j] - maxv) / z;
      for (Index c = 0; c < dv; ++c) {
        out[i * dv + c] += static_cast<T>(p * static_cast<double>(v[j * dv + c]));
      }
    }
  }
  return out;
}

// Sliding-window convolution with zero padding, double loop over positions
// and taps.
template <typename T>
std::vector<T> conv1d_ref(const std::vector<T>& x, Index n, Index d,
                          const std::vector<T>& filters, Index m, Index kernel,
                          const std::vector<T>& bias, Index pad_left) {
  std::vector<T> out(n * m, T(0));
  for (Index j = 0; j < n; ++j) {
    for (Index f = 0; f < m; ++f) {
      double acc = static_cast<double>(bias[f]);
      for (Index a = 0; a < kernel; ++a) {
        const std::int64_t r = static_cast<std::int64_t>(j + a) -
                               static_cast<std::int64_t>(pad_left);
        if (r < 0 || r >= static_cast<std::int64_t>(n)) continue;
        for (Index c = 0; c < d; ++c) {
          acc += static_cast<double>(x[static_cast<Index>(r) * d + c]) *
                 static_cast<double>(filters[f * kernel * d + a * d + c]);
        }
      }
      out[j * m + f] = static_cast<T>(acc);
    }
  }
  return out;
}

// Rank by sorting all 1 + #negatives scores descending with the ground truth
// losing every tie, then scanning for its position.
inline int rank_by_sorting(double gt, const std::vector<double>& negatives) {
  struct Entry {
    double score;
    bool is_gt;
  };
  std::vector<Entry> entries;
  entries.push_back({gt, true});
  for (double s : negatives) entries.push_back({s, false});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.is_gt < b.is_gt;  // ties: negatives first
  });
  for (Index i = 0; i < entries.size(); ++i) {
    if (entries[i].is_gt) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(entries.size());
}

// Metrics from the sorted top-k list itself.
inline int recall_from_sorted(double gt, const std::vector<double>& negatives, int k) {
  return rank_by_sorting(gt, negatives) <= k ? 1 : 0;
}

inline double ndcg_from_sorted(double gt, const std::vector<double>& negatives, int k) {
  const int rank = rank_by_sorting(gt, negatives);
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

template <typename T>
adamct::Tensor<T> random_tensor(adamct::Shape shape, adamct::RngState& rng,
                                double lo = -1.0, double hi = 1.0,
                                bool tracked = false) {
  adamct::Tensor<T> t = adamct::Tensor<T>::zeros(std::move(shape), tracked);
  for (auto& v : t.data()) {
    v = static_cast<T>(lo + (hi - lo) * rng.uniform01());
  }
  return t;
}

}  // namespace oracles
