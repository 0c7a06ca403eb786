/*
 * Copyright (c) 2026, The frnet-cpp Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frnet/error.hpp"
#include "frnet/metrics.hpp"
#include "frnet/tensor.hpp"

namespace frnet {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// b is either the same shape as a, or a row that broadcasts over the
// second-to-last axis of a ([..., 1, n] against [..., m, n]).
inline bool is_row_broadcast(const Shape& a, const Shape& b) {
  if (a.size() != b.size() || a.size() < 2) return false;
  const std::size_t r = a.size();
  if (b[r - 2] != 1 || a[r - 2] == 1) return false;
  for (std::size_t i = 0; i < r; ++i) {
    if (i != r - 2 && a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace detail

/**
 * Tape of executed operations.
 *
 * Every op appends its adjoint closure when recording is on and at least one
 * input requires a gradient. backward() replays the tape once in reverse
 * execution order, which is a valid reverse topological order because inputs
 * always exist before the ops consuming them.
 */
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }

  /// Smallest |x| seen by prelu on this graph (infinity if none).
  double kink_margin() const noexcept { return kink_margin_; }
  std::size_t num_ops() const noexcept { return tape_.size(); }

  void backward(const Var<T>& loss) {
    if (loss->size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss->shape()));
    }
    if (consumed_) throw ContractError("backward already ran on this graph");
    consumed_ = true;
    if (!loss->requires_grad()) return;
    loss->grad()[0] += T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    tape_.clear();
  }

  // ---------------------------------------------------------------- linear algebra

  /// [..., k] x [k, n] -> [..., n]; with transpose_b, b is [n, k].
  Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_b = false) {
    const auto& as = a->shape();
    const auto& bs = b->shape();
    if (as.size() < 2 || bs.size() != 2) {
      throw ContractError("matmul expects [..., k] x [k, n], got " + shape_str(as) + " and " + shape_str(bs));
    }
    const std::size_t k = as.back();
    const std::size_t bk = transpose_b ? bs[1] : bs[0];
    const std::size_t n = transpose_b ? bs[0] : bs[1];
    if (k != bk) {
      throw ContractError("matmul inner dimension mismatch: " + shape_str(as) + " and " +
                          shape_str(bs) + (transpose_b ? " (transposed)" : ""));
    }
    const std::size_t m = a->size() / k;
    Shape os = as;
    os.back() = n;
    auto out = make_output(std::move(os), a, b);

    using detail::ConstMatMap;
    using detail::MatMap;
    ConstMatMap<T> A(a->data().data(), m, k);
    ConstMatMap<T> B(b->data().data(), bs[0], bs[1]);
    MatMap<T> C(out->data().data(), m, n);
    if (transpose_b) {
      C.noalias() = A * B.transpose();
    } else {
      C.noalias() = A * B;
    }

    if (out->requires_grad()) {
      record([a, b, out, m, k, n, transpose_b] {
        ConstMatMap<T> A(a->data().data(), m, k);
        ConstMatMap<T> B(b->data().data(), b->dim(0), b->dim(1));
        ConstMatMap<T> dC(out->grad().data(), m, n);
        if (a->requires_grad()) {
          MatMap<T> dA(a->grad().data(), m, k);
          if (transpose_b) {
            dA.noalias() += dC * B;
          } else {
            dA.noalias() += dC * B.transpose();
          }
        }
        if (b->requires_grad()) {
          MatMap<T> dB(b->grad().data(), b->dim(0), b->dim(1));
          if (transpose_b) {
            dB.noalias() += dC.transpose() * A;
          } else {
            dB.noalias() += A.transpose() * dC;
          }
        }
      });
    }
    return out;
  }

  /// Batched [B, m, k] x [B, k, n] -> [B, m, n]; with transpose_b, b is [B, n, k].
  Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_b = false) {
    const auto& as = a->shape();
    const auto& bs = b->shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0]) {
      throw ContractError("bmm expects [B, m, k] x [B, k, n], got " + shape_str(as) + " and " + shape_str(bs));
    }
    const std::size_t batch = as[0], m = as[1], k = as[2];
    const std::size_t bk = transpose_b ? bs[2] : bs[1];
    const std::size_t n = transpose_b ? bs[1] : bs[2];
    if (k != bk) {
      throw ContractError("bmm inner dimension mismatch: " + shape_str(as) + " and " + shape_str(bs));
    }
    auto out = make_output({batch, m, n}, a, b);

    using detail::ConstMatMap;
    using detail::MatMap;
    const std::size_t b_rows = bs[1], b_cols = bs[2];
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMatMap<T> A(a->data().data() + i * m * k, m, k);
      ConstMatMap<T> B(b->data().data() + i * b_rows * b_cols, b_rows, b_cols);
      MatMap<T> C(out->data().data() + i * m * n, m, n);
      if (transpose_b) {
        C.noalias() = A * B.transpose();
      } else {
        C.noalias() = A * B;
      }
    }

    if (out->requires_grad()) {
      record([a, b, out, batch, m, k, n, b_rows, b_cols, transpose_b] {
        const bool ga = a->requires_grad(), gb = b->requires_grad();
        T* da = ga ? a->grad().data() : nullptr;
        T* db = gb ? b->grad().data() : nullptr;
        for (std::size_t i = 0; i < batch; ++i) {
          ConstMatMap<T> A(a->data().data() + i * m * k, m, k);
          ConstMatMap<T> B(b->data().data() + i * b_rows * b_cols, b_rows, b_cols);
          ConstMatMap<T> dC(out->grad().data() + i * m * n, m, n);
          if (ga) {
            MatMap<T> dA(da + i * m * k, m, k);
            if (transpose_b) {
              dA.noalias() += dC * B;
            } else {
              dA.noalias() += dC * B.transpose();
            }
          }
          if (gb) {
            MatMap<T> dB(db + i * b_rows * b_cols, b_rows, b_cols);
            if (transpose_b) {
              dB.noalias() += dC.transpose() * A;
            } else {
              dB.noalias() += A.transpose() * dC;
            }
          }
        }
      });
    }
    return out;
  }

  // ---------------------------------------------------------------- pointwise

  /// Softmax over the last axis with per-row max subtraction.
  Var<T> row_softmax(const Var<T>& a) {
    const std::size_t n = a->shape().back();
    const std::size_t rows = a->size() / n;
    auto out = make_output(a->shape(), a);
    const T* x = a->data().data();
    T* y = out->data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = x + r * n;
      T* yr = y + r * n;
      T mx = xr[0];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
      T total = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        yr[j] = std::exp(xr[j] - mx);
        total += yr[j];
      }
      for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
    }
    if (out->requires_grad()) {
      record([a, out, rows, n] {
        const T* y = out->data().data();
        const T* dy = out->grad().data();
        T* dx = a->grad().data();
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) dot += dy[r * n + j] * y[r * n + j];
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += y[r * n + j] * (dy[r * n + j] - dot);
        }
      });
    }
    return out;
  }

  Var<T> sigmoid(const Var<T>& a) {
    auto out = make_output(a->shape(), a);
    auto x = a->data();
    auto y = out->data();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = detail::stable_sigmoid(x[i]);
    if (out->requires_grad()) {
      record([a, out] {
        auto y = out->data();
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
      });
    }
    return out;
  }

  /// x for x >= 0, slope * x otherwise; slope is a learnable scalar tensor.
  Var<T> prelu(const Var<T>& a, const Var<T>& slope) {
    if (slope->size() != 1) throw ContractError("prelu slope must be a scalar, got " + shape_str(slope->shape()));
    auto out = make_output(a->shape(), a, slope);
    const T s = (*slope)[0];
    auto x = a->data();
    auto y = out->data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = x[i] >= T(0) ? x[i] : s * x[i];
      kink_margin_ = std::min(kink_margin_, static_cast<double>(std::abs(x[i])));
    }
    if (out->requires_grad()) {
      record([a, slope, out] {
        const T s = (*slope)[0];
        auto x = a->data();
        auto dy = out->grad();
        if (a->requires_grad()) {
          auto dx = a->grad();
          for (std::size_t i = 0; i < x.size(); ++i) dx[i] += x[i] >= T(0) ? dy[i] : s * dy[i];
        }
        if (slope->requires_grad()) {
          T acc = T(0);
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < T(0)) acc += dy[i] * x[i];
          }
          slope->grad()[0] += acc;
        }
      });
    }
    return out;
  }

  /// Element-wise product; b may be a [..., 1, n] row broadcast over [..., m, n].
  Var<T> mul(const Var<T>& a, const Var<T>& b) { return binary(a, b, BinaryKind::kMul); }

  /// Element-wise sum; b may be a [..., 1, n] row broadcast over [..., m, n].
  Var<T> add(const Var<T>& a, const Var<T>& b) { return binary(a, b, BinaryKind::kAdd); }

  /// Element-wise difference of same-shape tensors.
  Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (a->shape() != b->shape()) {
      throw ContractError("sub requires equal shapes, got " + shape_str(a->shape()) + " and " + shape_str(b->shape()));
    }
    return binary(a, b, BinaryKind::kSub);
  }

  /// alpha * a + beta.
  Var<T> affine(const Var<T>& a, T alpha, T beta) {
    auto out = make_output(a->shape(), a);
    auto x = a->data();
    auto y = out->data();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] + beta;
    if (out->requires_grad()) {
      record([a, out, alpha] {
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += alpha * dy[i];
      });
    }
    return out;
  }

  Var<T> scale(const Var<T>& a, T alpha) { return affine(a, alpha, T(0)); }

  /// a + s where s is a single-element tensor.
  Var<T> add_scalar(const Var<T>& a, const Var<T>& s) {
    if (s->size() != 1) throw ContractError("add_scalar expects a scalar, got " + shape_str(s->shape()));
    auto out = make_output(a->shape(), a, s);
    const T v = (*s)[0];
    auto x = a->data();
    auto y = out->data();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + v;
    if (out->requires_grad()) {
      record([a, s, out] {
        auto dy = out->grad();
        if (a->requires_grad()) {
          auto dx = a->grad();
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
        if (s->requires_grad()) {
          T acc = T(0);
          for (auto g : dy) acc += g;
          s->grad()[0] += acc;
        }
      });
    }
    return out;
  }

  /// Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate).
  template <typename Rng>
  Var<T> dropout(const Var<T>& a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
    if (rate == 0.0) return a;
    auto out = make_output(a->shape(), a);
    std::vector<T> mask(a->size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto x = a->data();
    auto y = out->data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask[i] = unif(rng) >= rate ? keep_scale : T(0);
      y[i] = x[i] * mask[i];
    }
    if (out->requires_grad()) {
      record([a, out, mask = std::move(mask)] {
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
      });
    }
    return out;
  }

  // ---------------------------------------------------------------- shape

  Var<T> reshape(const Var<T>& a, Shape shape) {
    if (shape_numel(shape) != a->size()) {
      throw ContractError("cannot reshape " + shape_str(a->shape()) + " to " + shape_str(shape));
    }
    auto out = make_output(std::move(shape), a);
    std::copy(a->data().begin(), a->data().end(), out->data().begin());
    if (out->requires_grad()) {
      record([a, out] {
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      });
    }
    return out;
  }

  /// [..., 1] -> [..., n] by repeating the single trailing column.
  Var<T> expand_last(const Var<T>& a, std::size_t n) {
    if (a->rank() < 1 || a->shape().back() != 1 || n == 0) {
      throw ContractError("expand_last expects a trailing extent of 1, got " + shape_str(a->shape()));
    }
    Shape os = a->shape();
    os.back() = n;
    auto out = make_output(std::move(os), a);
    auto x = a->data();
    auto y = out->data();
    for (std::size_t r = 0; r < x.size(); ++r) std::fill_n(y.begin() + r * n, n, x[r]);
    if (out->requires_grad()) {
      record([a, out, n] {
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t r = 0; r < dx.size(); ++r) {
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += dy[r * n + j];
          dx[r] += acc;
        }
      });
    }
    return out;
  }

  /// Stack along the leading axis; trailing extents must agree.
  Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
    const auto& as = a->shape();
    const auto& bs = b->shape();
    if (as.size() != bs.size() || !std::equal(as.begin() + 1, as.end(), bs.begin() + 1)) {
      throw ContractError("concat_rows trailing extents differ: " + shape_str(as) + " and " + shape_str(bs));
    }
    Shape os = as;
    os[0] += bs[0];
    auto out = make_output(std::move(os), a, b);
    std::copy(a->data().begin(), a->data().end(), out->data().begin());
    std::copy(b->data().begin(), b->data().end(), out->data().begin() + a->size());
    if (out->requires_grad()) {
      record([a, b, out] {
        auto dy = out->grad();
        if (a->requires_grad()) {
          auto da = a->grad();
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
        }
        if (b->requires_grad()) {
          auto db = b->grad();
          const std::size_t off = a->size();
          for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[off + i];
        }
      });
    }
    return out;
  }

  // ---------------------------------------------------------------- reductions

  /// Sum of every element, shape [1].
  Var<T> sum(const Var<T>& a) {
    auto out = make_output({1}, a);
    T acc = T(0);
    for (auto v : a->data()) acc += v;
    (*out)[0] = acc;
    if (out->requires_grad()) {
      record([a, out] {
        const T g = out->grad()[0];
        for (auto& d : a->grad()) d += g;
      });
    }
    return out;
  }

  /// Sum over the trailing axis: [..., n] -> [...] ([n] -> [1]).
  Var<T> sum_last(const Var<T>& a) {
    const std::size_t n = a->shape().back();
    Shape os(a->shape().begin(), a->shape().end() - 1);
    if (os.empty()) os = {1};
    auto out = make_output(std::move(os), a);
    auto x = a->data();
    auto y = out->data();
    for (std::size_t r = 0; r < y.size(); ++r) {
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += x[r * n + j];
      y[r] = acc;
    }
    if (out->requires_grad()) {
      record([a, out, n] {
        auto dy = out->grad();
        auto dx = a->grad();
        for (std::size_t r = 0; r < dy.size(); ++r) {
          for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += dy[r];
        }
      });
    }
    return out;
  }

  // ---------------------------------------------------------------- model-specific kernels

  /**
   * Row lookup: out[p, :] = table[indices[p], :], with `prefix` giving the
   * leading extents of the output (product must equal indices.size()).
   * The adjoint scatter-adds into the table gradient in index order.
   */
  Var<T> gather_rows(const Var<T>& table, std::span<const std::uint32_t> indices, Shape prefix) {
    if (table->rank() != 2) throw ContractError("gather_rows expects a 2-d table, got " + shape_str(table->shape()));
    if (shape_numel(prefix) != indices.size()) {
      throw ContractError("gather_rows prefix " + shape_str(prefix) + " does not cover " +
                          std::to_string(indices.size()) + " indices");
    }
    const std::size_t rows = table->dim(0), width = table->dim(1);
    for (auto idx : indices) {
      if (idx >= rows) {
        throw ContractError("feature index " + std::to_string(idx) + " out of range for table with " +
                            std::to_string(rows) + " rows");
      }
    }
    prefix.push_back(width);
    auto out = make_output(std::move(prefix), table);
    const T* src = table->data().data();
    T* dst = out->data().data();
    for (std::size_t p = 0; p < indices.size(); ++p) {
      std::copy_n(src + std::size_t{indices[p]} * width, width, dst + p * width);
    }
    if (out->requires_grad()) {
      std::vector<std::uint32_t> idx(indices.begin(), indices.end());
      record([table, out, idx = std::move(idx), width] {
        const T* dy = out->grad().data();
        T* dt = table->grad().data();
        for (std::size_t p = 0; p < idx.size(); ++p) {
          T* row = dt + std::size_t{idx[p]} * width;
          for (std::size_t j = 0; j < width; ++j) row[j] += dy[p * width + j];
        }
      });
    }
    return out;
  }

  /**
   * Second-order factorization-machine term for each instance of a [B, f, d]
   * batch, using 0.5 * sum_k [(sum_i e_ik)^2 - sum_i e_ik^2]. Output is [B].
   */
  Var<T> fm_pairwise(const Var<T>& e) {
    if (e->rank() != 3) throw ContractError("fm_pairwise expects [B, f, d], got " + shape_str(e->shape()));
    const std::size_t batch = e->dim(0), f = e->dim(1), d = e->dim(2);
    auto out = make_output({batch}, e);
    const T* x = e->data().data();
    std::vector<T> sums(batch * d, T(0));
    for (std::size_t b = 0; b < batch; ++b) {
      T* s = sums.data() + b * d;
      T sq = T(0);
      for (std::size_t i = 0; i < f; ++i) {
        const T* row = x + (b * f + i) * d;
        for (std::size_t k = 0; k < d; ++k) {
          s[k] += row[k];
          sq += row[k] * row[k];
        }
      }
      T ss = T(0);
      for (std::size_t k = 0; k < d; ++k) ss += s[k] * s[k];
      (*out)[b] = T(0.5) * (ss - sq);
    }
    if (out->requires_grad()) {
      record([e, out, sums = std::move(sums), batch, f, d] {
        const T* x = e->data().data();
        const T* dy = out->grad().data();
        T* dx = e->grad().data();
        for (std::size_t b = 0; b < batch; ++b) {
          const T* s = sums.data() + b * d;
          for (std::size_t i = 0; i < f; ++i) {
            const std::size_t off = (b * f + i) * d;
            for (std::size_t k = 0; k < d; ++k) dx[off + k] += dy[b] * (s[k] - x[off + k]);
          }
        }
      });
    }
    return out;
  }

  /**
   * Mean binary cross-entropy of probabilities against {0,1} labels, with the
   * probabilities clamped to [eps, 1 - eps] before the log. Output is [1].
   */
  Var<T> bce(const Var<T>& p, std::span<const T> labels, T eps = T(metrics::kProbEps)) {
    if (p->size() != labels.size()) {
      throw ContractError("bce: " + std::to_string(p->size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
    }
    auto out = make_output({1}, p);
    const auto x = p->data();
    const T n = T(x.size());
    T acc = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += metrics::bce_term(x[i], labels[i], eps);
    (*out)[0] = acc / n;
    if (out->requires_grad()) {
      std::vector<T> y(labels.begin(), labels.end());
      record([p, out, y = std::move(y), eps, n] {
        const T g = out->grad()[0];
        const auto x = p->data();
        auto dx = p->grad();
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] < eps || x[i] > T(1) - eps) continue;
          dx[i] += g * (-(y[i] / x[i]) + (T(1) - y[i]) / (T(1) - x[i])) / n;
        }
      });
    }
    return out;
  }

 private:
  enum class BinaryKind { kAdd, kSub, kMul };

  Var<T> binary(const Var<T>& a, const Var<T>& b, BinaryKind kind) {
    const auto& as = a->shape();
    const auto& bs = b->shape();
    const bool same = as == bs;
    if (!same && !detail::is_row_broadcast(as, bs)) {
      throw ContractError("incompatible shapes for element-wise op: " + shape_str(as) + " and " + shape_str(bs) +
                          " (only a [..., 1, n] row may broadcast over [..., m, n])");
    }
    auto out = make_output(as, a, b);
    const std::size_t n = as.back();
    const std::size_t m = same ? 1 : as[as.size() - 2];
    const std::size_t outer = a->size() / (m * n);
    const T* x = a->data().data();
    const T* z = b->data().data();
    T* y = out->data().data();
    // With broadcasting, element (o, r, j) of a pairs with element (o, j) of b.
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t ai = (o * m + r) * n;
        const std::size_t bi = same ? ai : o * n;
        for (std::size_t j = 0; j < n; ++j) {
          switch (kind) {
            case BinaryKind::kAdd: y[ai + j] = x[ai + j] + z[bi + j]; break;
            case BinaryKind::kSub: y[ai + j] = x[ai + j] - z[bi + j]; break;
            case BinaryKind::kMul: y[ai + j] = x[ai + j] * z[bi + j]; break;
          }
        }
      }
    }
    if (out->requires_grad()) {
      record([a, b, out, kind, same, outer, m, n] {
        const T* x = a->data().data();
        const T* z = b->data().data();
        const T* dy = out->grad().data();
        T* da = a->requires_grad() ? a->grad().data() : nullptr;
        T* db = b->requires_grad() ? b->grad().data() : nullptr;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t r = 0; r < m; ++r) {
            const std::size_t ai = (o * m + r) * n;
            const std::size_t bi = same ? ai : o * n;
            for (std::size_t j = 0; j < n; ++j) {
              const T g = dy[ai + j];
              switch (kind) {
                case BinaryKind::kAdd:
                  if (da) da[ai + j] += g;
                  if (db) db[bi + j] += g;
                  break;
                case BinaryKind::kSub:
                  if (da) da[ai + j] += g;
                  if (db) db[bi + j] -= g;
                  break;
                case BinaryKind::kMul:
                  if (da) da[ai + j] += g * z[bi + j];
                  if (db) db[bi + j] += g * x[ai + j];
                  break;
              }
            }
          }
        }
      });
    }
    return out;
  }

  template <typename... Inputs>
  Var<T> make_output(Shape shape, const Inputs&... inputs) {
    auto out = std::make_shared<Tensor<T>>(std::move(shape));
    out->set_requires_grad(record_ && (inputs->requires_grad() || ...));
    return out;
  }

  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  bool record_;
  bool consumed_ = false;
  double kink_margin_ = std::numeric_limits<double>::infinity();
  std::vector<std::function<void()>> tape_;
};

}  // namespace frnet
