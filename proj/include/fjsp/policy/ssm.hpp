#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "fjsp/nn/ops.hpp"

namespace fjsp::policy {

namespace detail {

// f(z) = (e^z - 1) / z and its derivative, with a Taylor branch near 0.
template <class T>
inline T expm1_over(T z) {
  if (std::abs(z) < T(1e-2))
    return T(1) + z * (T(1) / 2 + z * (T(1) / 6 + z * (T(1) / 24 + z * (T(1) / 120 + z * (T(1) / 720 + z / 5040)))));
  return std::expm1(z) / z;
}

template <class T>
inline T expm1_over_deriv(T z) {
  if (std::abs(z) < T(1e-2))
    return T(1) / 2 + z * (T(1) / 3 + z * (T(1) / 8 + z * (T(1) / 30 + z * (T(1) / 144 + z * (T(1) / 840 + z / 5760)))));
  // d/dz (e^z - 1)/z = (z e^z - e^z + 1) / z^2
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

}  // namespace detail

/// Zero-order-hold discretization of a diagonal SSM for step `delta`.
/// Returns (A_bar, B_bar) elementwise; A_n = 0 yields the limit delta * B_n.
inline std::pair<std::vector<double>, std::vector<double>> ssm_discretize(const std::vector<double>& A,
                                                                          const std::vector<double>& B, double delta) {
  std::vector<double> a(A.size()), b(A.size());
  for (std::size_t n = 0; n < A.size(); ++n) {
    const double z = delta * A[n];
    a[n] = std::exp(z);
    b[n] = detail::expm1_over(z) * delta * B[n];
  }
  return {std::move(a), std::move(b)};
}

/// Plain inputs to a selective scan. Row-major: x, delta are L x D;
/// B, C are L x N; A is D x N (already negative); skip is D.
struct ScanInputs {
  int L = 0, D = 0, N = 0;
  std::vector<double> x, delta, A, B, C, skip;
};

/// Direct recurrence h_k = A_bar h_{k-1} + B_bar x_k, y_k = C_k . h_k + skip x_k.
inline std::vector<double> selective_scan_reference(const ScanInputs& in) {
  std::vector<double> y(static_cast<std::size_t>(in.L) * in.D, 0.0);
  std::vector<double> h(in.N);
  for (int d = 0; d < in.D; ++d) {
    std::fill(h.begin(), h.end(), 0.0);
    for (int k = 0; k < in.L; ++k) {
      const double xk = in.x[k * in.D + d], dk = in.delta[k * in.D + d];
      double acc = in.skip[d] * xk;
      for (int n = 0; n < in.N; ++n) {
        const double z = dk * in.A[d * in.N + n];
        h[n] = std::exp(z) * h[n] + detail::expm1_over(z) * dk * in.B[k * in.N + n] * xk;
        acc += in.C[k * in.N + n] * h[n];
      }
      y[k * in.D + d] = acc;
    }
  }
  return y;
}

/// Same scan computed as a parallel prefix (recursive doubling) over the
/// affine maps h -> a h + b, composed as (a1,b1)*(a2,b2) = (a1 a2, a2 b1 + b2).
inline std::vector<double> selective_scan_associative(const ScanInputs& in) {
  std::vector<double> y(static_cast<std::size_t>(in.L) * in.D, 0.0);
  std::vector<double> a(in.L), b(in.L), na(in.L), nb(in.L);
  for (int d = 0; d < in.D; ++d) {
    for (int k = 0; k < in.L; ++k) y[k * in.D + d] = in.skip[d] * in.x[k * in.D + d];
    for (int n = 0; n < in.N; ++n) {
      for (int k = 0; k < in.L; ++k) {
        const double xk = in.x[k * in.D + d], dk = in.delta[k * in.D + d];
        const double z = dk * in.A[d * in.N + n];
        a[k] = std::exp(z);
        b[k] = detail::expm1_over(z) * dk * in.B[k * in.N + n] * xk;
      }
      for (int off = 1; off < in.L; off *= 2) {
        for (int k = 0; k < in.L; ++k) {
          if (k < off) {
            na[k] = a[k];
            nb[k] = b[k];
          } else {
            na[k] = a[k - off] * a[k];
            nb[k] = a[k] * b[k - off] + b[k];
          }
        }
        std::swap(a, na);
        std::swap(b, nb);
      }
      for (int k = 0; k < in.L; ++k) y[k * in.D + d] += in.C[k * in.N + n] * b[k];
    }
  }
  return y;
}

/// Differentiable selective scan.
///   x, delta: L x D    A_log: D x N (A = -exp(A_log))    B, C: L x N    skip: 1 x D
/// Hidden states are kept only when a graph is being recorded, so inference
/// memory is O(D N) regardless of L.
template <class T>
nn::Tensor<T> selective_scan(const nn::Tensor<T>& x, const nn::Tensor<T>& delta, const nn::Tensor<T>& A_log,
                             const nn::Tensor<T>& B, const nn::Tensor<T>& C, const nn::Tensor<T>& skip) {
  const int L = x.rows(), D = x.cols(), N = A_log.cols();
  if (delta.rows() != L || delta.cols() != D || A_log.rows() != D || B.rows() != L || B.cols() != N ||
      C.rows() != L || C.cols() != N || skip.rows() != 1 || skip.cols() != D)
    throw nn::ShapeError("selective_scan: inconsistent shapes");

  const bool record = nn::GradMode::enabled() && (x.requires_grad() || delta.requires_grad() ||
                                                  A_log.requires_grad() || B.requires_grad() ||
                                                  C.requires_grad() || skip.requires_grad());
  std::vector<T> A(static_cast<std::size_t>(D) * N);
  for (std::size_t i = 0; i < A.size(); ++i) A[i] = -std::exp(A_log.data()[i]);

  std::vector<T> y(static_cast<std::size_t>(L) * D);
  std::vector<T> hs(record ? static_cast<std::size_t>(L) * D * N : 0);
  std::vector<T> as(record ? static_cast<std::size_t>(L) * D * N : 0);  // exp(z) - 1
  std::vector<T> h(N);
  const T* xv = x.data();
  const T* dv = delta.data();
  const T* Bv = B.data();
  const T* Cv = C.data();
  for (int d = 0; d < D; ++d) {
    std::fill(h.begin(), h.end(), T(0));
    const T* Ad = A.data() + static_cast<std::size_t>(d) * N;
    for (int k = 0; k < L; ++k) {
      const T xk = xv[k * D + d], dk = dv[k * D + d];
      const T* Bk = Bv + static_cast<std::size_t>(k) * N;
      const T* Ck = Cv + static_cast<std::size_t>(k) * N;
      T acc = skip.data()[d] * xk;
      T* ak = record ? as.data() + (static_cast<std::size_t>(k) * D + d) * N : nullptr;
      for (int n = 0; n < N; ++n) {
        const T z = dk * Ad[n];
        const T em1 = std::expm1(z);  // a - 1 without cancellation
        const T a = em1 + T(1);
        const T f = std::abs(z) < T(1e-2) ? detail::expm1_over(z) : em1 / z;
        h[n] = a * h[n] + f * dk * Bk[n] * xk;
        acc += Ck[n] * h[n];
        if (ak) ak[n] = em1;
      }
      y[k * D + d] = acc;
      if (record) std::copy(h.begin(), h.end(), hs.begin() + (static_cast<std::size_t>(k) * D + d) * N);
    }
  }

  return nn::make_op<T>(L, D, std::move(y), {x, delta, A_log, B, C, skip},
                        [L, D, N, A = std::move(A), hs = std::move(hs), as = std::move(as)](nn::Node<T>& out) {
    auto& X = *out.parents[0];
    auto& Dl = *out.parents[1];
    auto& Al = *out.parents[2];
    auto& Bn = *out.parents[3];
    auto& Cn = *out.parents[4];
    auto& S = *out.parents[5];
    T* gx = X.requires_grad ? X.g() : nullptr;
    T* gdl = Dl.requires_grad ? Dl.g() : nullptr;
    T* gal = Al.requires_grad ? Al.g() : nullptr;
    T* gb = Bn.requires_grad ? Bn.g() : nullptr;
    T* gc = Cn.requires_grad ? Cn.g() : nullptr;
    T* gs = S.requires_grad ? S.g() : nullptr;
    const T* gy = out.grad.data();
    std::vector<T> carry(N);  // a_{k+1} * gh_{k+1}
    for (int d = 0; d < D; ++d) {
      std::fill(carry.begin(), carry.end(), T(0));
      const T* Ad = A.data() + static_cast<std::size_t>(d) * N;
      for (int k = L - 1; k >= 0; --k) {
        const T xk = X.value[k * D + d], dk = Dl.value[k * D + d], gyk = gy[k * D + d];
        const T* hk = hs.data() + (static_cast<std::size_t>(k) * D + d) * N;
        const T* hprev = k > 0 ? hs.data() + (static_cast<std::size_t>(k - 1) * D + d) * N : nullptr;
        const T* ak = as.data() + (static_cast<std::size_t>(k) * D + d) * N;
        if (gs) gs[d] += gyk * xk;
        if (gx) gx[k * D + d] += gyk * S.value[d];
        T gdk = 0;
        for (int n = 0; n < N; ++n) {
          const T Bkn = Bn.value[static_cast<std::size_t>(k) * N + n];
          const T Ckn = Cn.value[static_cast<std::size_t>(k) * N + n];
          if (gc) gc[static_cast<std::size_t>(k) * N + n] += gyk * hk[n];
          const T gh = Ckn * gyk + carry[n];
          const T z = dk * Ad[n];
          const T a = ak[n] + T(1);
          T f, df;
          if (std::abs(z) < T(1e-2)) {
            f = detail::expm1_over(z);
            df = detail::expm1_over_deriv(z);
          } else {
            f = ak[n] / z;
            df = (a - f) / z;
          }
          const T gbar = gh * xk;  // d/d B_bar
          if (gx) gx[k * D + d] += gh * f * dk * Bkn;
          if (gb) gb[static_cast<std::size_t>(k) * N + n] += gbar * f * dk;
          T gz = gbar * df * dk * Bkn;
          if (hprev) gz += gh * hprev[n] * a;
          gdk += gbar * f * Bkn + gz * Ad[n];
          if (gal) gal[static_cast<std::size_t>(d) * N + n] += gz * dk * Ad[n];  // dA/dA_log = A
          carry[n] = a * gh;
        }
        if (gdl) gdl[k * D + d] += gdk;
      }
    }
  });
}

}  // namespace fjsp::policy
