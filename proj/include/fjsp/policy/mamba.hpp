#pragma once

#include <cmath>
#include <string>

#include "fjsp/nn/layers.hpp"
#include "fjsp/policy/ssm.hpp"

namespace fjsp::policy {

struct MambaDims {
  int d_model = 128;
  int d_state = 16;
  int conv_window = 4;
  int expand = 2;
  int dt_rank = 0;  // 0 -> ceil(d_model / 16)
  bool additive_gate = false;

  int inner() const { return expand * d_model; }
  int rank() const { return dt_rank > 0 ? dt_rank : (d_model + 15) / 16; }
};

/// Gated residual block:
///   main = SSM(SiLU(conv(in_proj(H))))
///   out  = out_proj(main * SiLU(gate_proj(H))) + H
template <class T>
struct MambaBlock {
  MambaDims dims;
  nn::Linear<T> in_proj, gate_proj, dt_proj, out_proj;
  nn::Tensor<T> conv_w, conv_b, x_proj, A_log, skip;

  MambaBlock() = default;
  MambaBlock(nn::ParamStore<T>& store, const std::string& name, const MambaDims& d, Rng& rng) : dims(d) {
    const int di = d.inner(), R = d.rank(), N = d.d_state;
    in_proj = nn::Linear<T>(store, name + ".in_proj", d.d_model, di, rng);
    gate_proj = nn::Linear<T>(store, name + ".gate_proj", d.d_model, di, rng);
    conv_w = store.add_uniform(name + ".conv.weight", di, d.conv_window,
                               T(1) / std::sqrt(static_cast<T>(d.conv_window)), rng);
    conv_b = store.add_constant(name + ".conv.bias", 1, di, T(0));
    x_proj = store.add_uniform(name + ".x_proj", di, R + 2 * N, T(1) / std::sqrt(static_cast<T>(di)), rng);
    dt_proj = nn::Linear<T>(store, name + ".dt_proj", R, di, rng);
    // Step sizes start log-uniform in [1e-3, 1e-1]; the bias holds softplus^-1.
    for (int c = 0; c < di; ++c) {
      const double dt = std::exp(uniform_real(rng, std::log(1e-3), std::log(1e-1)));
      dt_proj.bias.data()[c] = static_cast<T>(dt + std::log(-std::expm1(-dt)));
    }
    std::vector<T> alog(static_cast<std::size_t>(di) * N);
    for (int c = 0; c < di; ++c)
      for (int n = 0; n < N; ++n) alog[static_cast<std::size_t>(c) * N + n] = std::log(static_cast<T>(n + 1));
    A_log = store.add(name + ".A_log", di, N, std::move(alog));
    skip = store.add_constant(name + ".D", 1, di, T(1));
    out_proj = nn::Linear<T>(store, name + ".out_proj", di, d.d_model, rng);
  }

  nn::Tensor<T> operator()(const nn::Tensor<T>& H) const {
    using namespace nn;
    if (H.cols() != dims.d_model) throw ShapeError("mamba block: input width must equal d_model");
    const int R = dims.rank(), N = dims.d_state;
    auto xc = silu(causal_conv1d(in_proj(H), conv_w, conv_b));
    auto xdbl = matmul(xc, x_proj);
    auto delta = softplus(dt_proj(slice_cols(xdbl, 0, R)));
    auto Bm = slice_cols(xdbl, R, R + N);
    auto Cm = slice_cols(xdbl, R + N, R + 2 * N);
    auto y = selective_scan(xc, delta, A_log, Bm, Cm, skip);
    auto g = silu(gate_proj(H));
    auto joined = dims.additive_gate ? add(y, g) : mul(y, g);
    return add(out_proj(joined), H);
  }
};

}  // namespace fjsp::policy
