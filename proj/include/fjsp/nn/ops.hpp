#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fjsp/nn/tensor.hpp"

namespace fjsp::nn {

namespace kernel {

// c[n x m] += a[n x k] * b[k x m]
template <class T>
void gemm_nn(int n, int k, int m, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (int i = 0; i < n; ++i) {
    T* ci = c + static_cast<std::size_t>(i) * m;
    const T* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      const T* bp = b + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[n x m] += a[n x k] * b[m x k]^T
template <class T>
void gemm_nt(int n, int k, int m, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (int i = 0; i < n; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * k;
    T* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const T* bj = b + static_cast<std::size_t>(j) * k;
      // Eight independent partial sums so the loop vectorizes without
      // reassociation flags; the summation order is still fixed.
      T acc[8] = {};
      int p = 0;
      for (; p + 8 <= k; p += 8)
        for (int l = 0; l < 8; ++l) acc[l] += ai[p + l] * bj[p + l];
      T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c[k x m] += a[n x k]^T * b[n x m]
template <class T>
void gemm_tn(int n, int k, int m, const T* __restrict a, const T* __restrict b, T* __restrict c) {
  for (int i = 0; i < n; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * k;
    const T* bi = b + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      T* cp = c + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace kernel

namespace detail {
template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

template <class T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <class T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

// Elementwise unary op given f(x) and f'(x) from (x, y).
template <class T, class F, class DF>
Tensor<T> unary(const Tensor<T>& x, F f, DF df) {
  std::vector<T> y(x.size());
  const T* xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_op<T>(x.rows(), x.cols(), std::move(y), {x}, [df](Node<T>& out) {
    auto& xp = *out.parents[0];
    if (!xp.requires_grad) return;
    T* gx = xp.g();
    for (std::size_t i = 0; i < out.size(); ++i) gx[i] += out.grad[i] * df(xp.value[i], out.value[i]);
  });
}
}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  const int n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<T> c(static_cast<std::size_t>(n) * m, T(0));
  kernel::gemm_nn(n, k, m, a.data(), b.data(), c.data());
  return make_op<T>(n, m, std::move(c), {a, b}, [n, k, m](Node<T>& out) {
    auto& A = *out.parents[0];
    auto& B = *out.parents[1];
    if (A.requires_grad) kernel::gemm_nt(n, m, k, out.grad.data(), B.value.data(), A.g());
    if (B.requires_grad) kernel::gemm_tn(n, k, m, A.value.data(), out.grad.data(), B.g());
  });
}

/// a * b^T
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  const int n = a.rows(), k = a.cols(), m = b.rows();
  std::vector<T> c(static_cast<std::size_t>(n) * m, T(0));
  kernel::gemm_nt(n, k, m, a.data(), b.data(), c.data());
  return make_op<T>(n, m, std::move(c), {a, b}, [n, k, m](Node<T>& out) {
    auto& A = *out.parents[0];
    auto& B = *out.parents[1];
    if (A.requires_grad) kernel::gemm_nn(n, m, k, out.grad.data(), B.value.data(), A.g());
    if (B.requires_grad) kernel::gemm_tn(n, m, k, out.grad.data(), A.value.data(), B.g());
  });
}

/// x[n x in] * W[in x out] + b[1 x out]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.cols() != w.rows()) throw ShapeError("linear: input width " + std::to_string(x.cols()) + " vs weight rows " + std::to_string(w.rows()));
  if (b.rows() != 1 || b.cols() != w.cols()) throw ShapeError("linear: bias shape");
  const int n = x.rows(), k = x.cols(), m = w.cols();
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) std::copy(b.data(), b.data() + m, y.data() + static_cast<std::size_t>(i) * m);
  kernel::gemm_nn(n, k, m, x.data(), w.data(), y.data());
  return make_op<T>(n, m, std::move(y), {x, w, b}, [n, k, m](Node<T>& out) {
    auto& X = *out.parents[0];
    auto& W = *out.parents[1];
    auto& B = *out.parents[2];
    if (X.requires_grad) kernel::gemm_nt(n, m, k, out.grad.data(), W.value.data(), X.g());
    if (W.requires_grad) kernel::gemm_tn(n, k, m, X.value.data(), out.grad.data(), W.g());
    if (B.requires_grad) {
      T* gb = B.g();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) gb[j] += out.grad[static_cast<std::size_t>(i) * m + j];
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> y(a.values());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.data()[i];
  return make_op<T>(a.rows(), a.cols(), std::move(y), {a, b}, [](Node<T>& out) {
    for (auto& p : out.parents)
      if (p->requires_grad) {
        T* g = p->g();
        for (std::size_t i = 0; i < out.size(); ++i) g[i] += out.grad[i];
      }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> y(a.values());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.data()[i];
  return make_op<T>(a.rows(), a.cols(), std::move(y), {a, b}, [](Node<T>& out) {
    if (out.parents[0]->requires_grad) {
      T* g = out.parents[0]->g();
      for (std::size_t i = 0; i < out.size(); ++i) g[i] += out.grad[i];
    }
    if (out.parents[1]->requires_grad) {
      T* g = out.parents[1]->g();
      for (std::size_t i = 0; i < out.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

/// Elementwise product.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> y(a.values());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.data()[i];
  return make_op<T>(a.rows(), a.cols(), std::move(y), {a, b}, [](Node<T>& out) {
    auto& A = *out.parents[0];
    auto& B = *out.parents[1];
    if (A.requires_grad) {
      T* g = A.g();
      for (std::size_t i = 0; i < out.size(); ++i) g[i] += out.grad[i] * B.value[i];
    }
    if (B.requires_grad) {
      T* g = B.g();
      for (std::size_t i = 0; i < out.size(); ++i) g[i] += out.grad[i] * A.value[i];
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return detail::unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return detail::unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  return detail::unary(
      x, [](T v) { return v * detail::sigmoid(v); },
      [](T v, T) {
        const T s = detail::sigmoid(v);
        return s * (T(1) + v * (T(1) - s));
      });
}

template <class T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return detail::softplus(v); }, [](T v, T) { return detail::sigmoid(v); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> square(const Tensor<T>& x) {
  return detail::unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

/// Clamps elementwise; the gradient is zero outside [lo, hi].
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return detail::unary(
      x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
      [lo, hi](T v, T) { return (v < lo || v > hi) ? T(0) : T(1); });
}

/// Elementwise minimum; ties route the gradient to `a`.
template <class T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "minimum");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(a.data()[i], b.data()[i]);
  return make_op<T>(a.rows(), a.cols(), std::move(y), {a, b}, [](Node<T>& out) {
    auto& A = *out.parents[0];
    auto& B = *out.parents[1];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool take_a = A.value[i] <= B.value[i];
      if (take_a && A.requires_grad) A.g()[i] += out.grad[i];
      if (!take_a && B.requires_grad) B.g()[i] += out.grad[i];
    }
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.values()) s += v;
  return make_op<T>(1, 1, {s}, {x}, [](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (std::size_t i = 0; i < X.size(); ++i) g[i] += out.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Adds a 1 x cols row to every row of x.
template <class T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) throw ShapeError("add_row: row shape");
  const int n = x.rows(), m = x.cols();
  std::vector<T> y(x.values());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) y[static_cast<std::size_t>(i) * m + j] += row.data()[j];
  return make_op<T>(n, m, std::move(y), {x, row}, [n, m](Node<T>& out) {
    auto& X = *out.parents[0];
    auto& R = *out.parents[1];
    if (X.requires_grad) {
      T* g = X.g();
      for (std::size_t i = 0; i < out.size(); ++i) g[i] += out.grad[i];
    }
    if (R.requires_grad) {
      T* g = R.g();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) g[j] += out.grad[static_cast<std::size_t>(i) * m + j];
    }
  });
}

/// Repeats a 1 x cols row n times.
template <class T>
Tensor<T> broadcast_rows(const Tensor<T>& row, int n) {
  if (row.rows() != 1) throw ShapeError("broadcast_rows: expects a row vector");
  const int m = row.cols();
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) std::copy(row.data(), row.data() + m, y.data() + static_cast<std::size_t>(i) * m);
  return make_op<T>(n, m, std::move(y), {row}, [n, m](Node<T>& out) {
    auto& R = *out.parents[0];
    if (!R.requires_grad) return;
    T* g = R.g();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) g[j] += out.grad[static_cast<std::size_t>(i) * m + j];
  });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& x) {
  const int n = x.rows(), m = x.cols();
  std::vector<T> y(x.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) y[static_cast<std::size_t>(j) * n + i] = x.data()[static_cast<std::size_t>(i) * m + j];
  return make_op<T>(m, n, std::move(y), {x}, [n, m](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(i) * m + j] += out.grad[static_cast<std::size_t>(j) * n + i];
  });
}

/// Columns [c0, c1).
template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 > c1) throw ShapeError("slice_cols: bad range");
  const int n = x.rows(), m = x.cols(), w = c1 - c0;
  std::vector<T> y(static_cast<std::size_t>(n) * w);
  for (int i = 0; i < n; ++i)
    std::copy(x.data() + static_cast<std::size_t>(i) * m + c0, x.data() + static_cast<std::size_t>(i) * m + c1,
              y.data() + static_cast<std::size_t>(i) * w);
  return make_op<T>(n, w, std::move(y), {x}, [n, m, w, c0](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) g[static_cast<std::size_t>(i) * m + c0 + j] += out.grad[static_cast<std::size_t>(i) * w + j];
  });
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int n = parts[0].rows();
  int m = 0;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
    offsets.push_back(m);
    m += p.cols();
  }
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const int w = parts[q].cols();
    for (int i = 0; i < n; ++i)
      std::copy(parts[q].data() + static_cast<std::size_t>(i) * w, parts[q].data() + static_cast<std::size_t>(i + 1) * w,
                y.data() + static_cast<std::size_t>(i) * m + offsets[q]);
  }
  return make_op<T>(n, m, std::move(y), parts, [n, m, offsets](Node<T>& out) {
    for (std::size_t q = 0; q < out.parents.size(); ++q) {
      auto& P = *out.parents[q];
      if (!P.requires_grad) continue;
      T* g = P.g();
      const int w = P.cols;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) g[static_cast<std::size_t>(i) * w + j] += out.grad[static_cast<std::size_t>(i) * m + offsets[q] + j];
    }
  });
}

/// Stacks rows out of x by index (indices may repeat).
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<int> idx) {
  const int m = x.cols();
  const int n = static_cast<int>(idx.size());
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(x.data() + static_cast<std::size_t>(idx[i]) * m, x.data() + static_cast<std::size_t>(idx[i] + 1) * m,
              y.data() + static_cast<std::size_t>(i) * m);
  }
  return make_op<T>(n, m, std::move(y), {x}, [m, idx = std::move(idx)](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(idx[i]) * m + j] += out.grad[i * m + j];
  });
}

/// Mean over the rows whose mask entry is nonzero; result is 1 x cols.
template <class T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, std::vector<std::uint8_t> mask) {
  if (static_cast<int>(mask.size()) != x.rows()) throw ShapeError("masked_mean_rows: mask length");
  int active = 0;
  for (auto v : mask) active += v ? 1 : 0;
  if (active == 0) throw std::invalid_argument("masked_mean_rows: no active rows");
  const int m = x.cols();
  const T inv = T(1) / static_cast<T>(active);
  std::vector<T> y(m, T(0));
  for (int i = 0; i < x.rows(); ++i)
    if (mask[i])
      for (int j = 0; j < m; ++j) y[j] += x.data()[static_cast<std::size_t>(i) * m + j];
  for (auto& v : y) v *= inv;
  return make_op<T>(1, m, std::move(y), {x}, [m, inv, mask = std::move(mask)](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i])
        for (int j = 0; j < m; ++j) g[i * m + j] += out.grad[j] * inv;
  });
}

/// Softmax over each row. Entries with mask 0 get probability exactly 0.
/// An empty mask means all entries are active.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x, const std::vector<std::uint8_t>& mask = {}) {
  const int n = x.rows(), m = x.cols();
  if (!mask.empty() && static_cast<int>(mask.size()) != m) throw ShapeError("softmax_rows: mask length");
  std::vector<T> y(x.size(), T(0));
  for (int i = 0; i < n; ++i) {
    const T* xi = x.data() + static_cast<std::size_t>(i) * m;
    T* yi = y.data() + static_cast<std::size_t>(i) * m;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < m; ++j)
      if (mask.empty() || mask[j]) mx = std::max(mx, xi[j]);
    if (mx == -std::numeric_limits<T>::infinity()) throw std::invalid_argument("softmax: all entries masked");
    T s = T(0);
    for (int j = 0; j < m; ++j)
      if (mask.empty() || mask[j]) {
        yi[j] = std::exp(xi[j] - mx);
        s += yi[j];
      }
    for (int j = 0; j < m; ++j) yi[j] /= s;
  }
  return make_op<T>(n, m, std::move(y), {x}, [n, m](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (int i = 0; i < n; ++i) {
      const T* yi = out.value.data() + static_cast<std::size_t>(i) * m;
      const T* gy = out.grad.data() + static_cast<std::size_t>(i) * m;
      T dot = T(0);
      for (int j = 0; j < m; ++j) dot += yi[j] * gy[j];
      for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(i) * m + j] += yi[j] * (gy[j] - dot);
    }
  });
}

/// Masked softmax of a logit vector (1 x n).
template <class T>
Tensor<T> masked_softmax(const Tensor<T>& logits, const std::vector<std::uint8_t>& mask) {
  if (logits.rows() != 1) throw ShapeError("masked_softmax: expects a row vector");
  return softmax_rows(logits, mask);
}

/// Log-softmax over each row (no masking).
template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
  const int n = x.rows(), m = x.cols();
  std::vector<T> y(x.size());
  for (int i = 0; i < n; ++i) {
    const T* xi = x.data() + static_cast<std::size_t>(i) * m;
    T* yi = y.data() + static_cast<std::size_t>(i) * m;
    T mx = xi[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, xi[j]);
    T s = T(0);
    for (int j = 0; j < m; ++j) s += std::exp(xi[j] - mx);
    const T lse = mx + std::log(s);
    for (int j = 0; j < m; ++j) yi[j] = xi[j] - lse;
  }
  return make_op<T>(n, m, std::move(y), {x}, [n, m](Node<T>& out) {
    auto& X = *out.parents[0];
    if (!X.requires_grad) return;
    T* g = X.g();
    for (int i = 0; i < n; ++i) {
      const T* yi = out.value.data() + static_cast<std::size_t>(i) * m;
      const T* gy = out.grad.data() + static_cast<std::size_t>(i) * m;
      T gs = T(0);
      for (int j = 0; j < m; ++j) gs += gy[j];
      for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(i) * m + j] += gy[j] - std::exp(yi[j]) * gs;
    }
  });
}

/// Single element as a 1 x 1 tensor.
template <class T>
Tensor<T> pick(const Tensor<T>& x, int r, int c) {
  const std::size_t at = static_cast<std::size_t>(r) * x.cols() + c;
  if (r < 0 || r >= x.rows() || c < 0 || c >= x.cols()) throw ShapeError("pick: index out of range");
  return make_op<T>(1, 1, {x.data()[at]}, {x}, [at](Node<T>& out) {
    auto& X = *out.parents[0];
    if (X.requires_grad) X.g()[at] += out.grad[0];
  });
}

/// Depthwise causal convolution over time: x[L x D], weight[D x W], bias[1 x D].
/// y[t,d] = bias[d] + sum_{w < W, t-w >= 0} x[t-w, d] * weight[d, w]
template <class T>
Tensor<T> causal_conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const int L = x.rows(), D = x.cols(), W = weight.cols();
  if (W < 1) throw ShapeError("causal_conv1d: window must be >= 1");
  if (weight.rows() != D) throw ShapeError("causal_conv1d: weight rows must equal channels");
  if (bias.rows() != 1 || bias.cols() != D) throw ShapeError("causal_conv1d: bias shape");
  std::vector<T> y(x.size());
  const T* xv = x.data();
  const T* wv = weight.data();
  for (int t = 0; t < L; ++t) {
    T* yt = y.data() + static_cast<std::size_t>(t) * D;
    std::copy(bias.data(), bias.data() + D, yt);
    for (int w = 0; w < W && t - w >= 0; ++w) {
      const T* xs = xv + static_cast<std::size_t>(t - w) * D;
      for (int d = 0; d < D; ++d) yt[d] += xs[d] * wv[static_cast<std::size_t>(d) * W + w];
    }
  }
  return make_op<T>(L, D, std::move(y), {x, weight, bias}, [L, D, W](Node<T>& out) {
    auto& X = *out.parents[0];
    auto& Wt = *out.parents[1];
    auto& B = *out.parents[2];
    T* gx = X.requires_grad ? X.g() : nullptr;
    T* gw = Wt.requires_grad ? Wt.g() : nullptr;
    T* gb = B.requires_grad ? B.g() : nullptr;
    for (int t = 0; t < L; ++t) {
      const T* gy = out.grad.data() + static_cast<std::size_t>(t) * D;
      if (gb)
        for (int d = 0; d < D; ++d) gb[d] += gy[d];
      for (int w = 0; w < W && t - w >= 0; ++w) {
        const std::size_t src = static_cast<std::size_t>(t - w) * D;
        for (int d = 0; d < D; ++d) {
          if (gx) gx[src + d] += gy[d] * Wt.value[static_cast<std::size_t>(d) * W + w];
          if (gw) gw[static_cast<std::size_t>(d) * W + w] += gy[d] * X.value[src + d];
        }
      }
    }
  });
}

/// Per-row normalization to zero mean / unit variance (eps inside the
/// square root), then gain and bias (both 1 x D).
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5)) {
  const int n = x.rows(), D = x.cols();
  if (gain.cols() != D || bias.cols() != D || gain.rows() != 1 || bias.rows() != 1) throw ShapeError("layer_norm: affine shape");
  std::vector<T> y(x.size());
  std::vector<T> xhat(x.size());
  std::vector<T> rstd(n);
  for (int i = 0; i < n; ++i) {
    const T* xi = x.data() + static_cast<std::size_t>(i) * D;
    T mu = T(0);
    for (int j = 0; j < D; ++j) mu += xi[j];
    mu /= D;
    T var = T(0);
    for (int j = 0; j < D; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= D;
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (int j = 0; j < D; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * D + j;
      xhat[at] = (xi[j] - mu) * rstd[i];
      y[at] = xhat[at] * gain.data()[j] + bias.data()[j];
    }
  }
  return make_op<T>(n, D, std::move(y), {x, gain, bias},
                    [n, D, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& out) {
                      auto& X = *out.parents[0];
                      auto& G = *out.parents[1];
                      auto& B = *out.parents[2];
                      T* gx = X.requires_grad ? X.g() : nullptr;
                      T* gg = G.requires_grad ? G.g() : nullptr;
                      T* gb = B.requires_grad ? B.g() : nullptr;
                      for (int i = 0; i < n; ++i) {
                        const std::size_t row = static_cast<std::size_t>(i) * D;
                        T s1 = T(0), s2 = T(0);
                        for (int j = 0; j < D; ++j) {
                          const T gy = out.grad[row + j];
                          if (gg) gg[j] += gy * xhat[row + j];
                          if (gb) gb[j] += gy;
                          const T gxh = gy * G.value[j];
                          s1 += gxh;
                          s2 += gxh * xhat[row + j];
                        }
                        if (!gx) continue;
                        for (int j = 0; j < D; ++j) {
                          const T gxh = out.grad[row + j] * G.value[j];
                          gx[row + j] += rstd[i] / D * (D * gxh - s1 - xhat[row + j] * s2);
                        }
                      }
                    });
}

}  // namespace fjsp::nn
