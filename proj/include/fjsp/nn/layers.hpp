#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fjsp/nn/ops.hpp"
#include "fjsp/nn/param_store.hpp"

namespace fjsp::nn {

/// y = x W + b with W ~ U(-1/sqrt(in), 1/sqrt(in)) and b = 0.
template <class T>
struct Linear {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // 1 x out

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, int in, int out, Rng& rng) {
    const T bound = T(1) / std::sqrt(static_cast<T>(in));
    weight = store.add_uniform(name + ".weight", in, out, bound, rng);
    bias = store.add_constant(name + ".bias", 1, out, T(0));
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
  int in() const { return weight.rows(); }
  int out() const { return weight.cols(); }
};

template <class T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, int dim) {
    gain = store.add_constant(name + ".gain", 1, dim, T(1));
    bias = store.add_constant(name + ".bias", 1, dim, T(0));
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }
};

/// Optional probe recording attention score matrix shapes.
struct AttentionTrace {
  std::vector<std::pair<int, int>> score_shapes;
};

/// Multi-head scaled dot-product attention; queries from one sequence,
/// keys and values from another. Projections carry no bias.
template <class T>
struct MultiHeadAttention {
  int heads = 1;
  Tensor<T> wq, wk, wv, wo;  // D x D each

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& name, int dim, int n_heads, Rng& rng) : heads(n_heads) {
    if (n_heads < 1 || dim % n_heads != 0) throw ShapeError("attention: model dimension must be divisible by heads");
    const T bound = T(1) / std::sqrt(static_cast<T>(dim));
    wq = store.add_uniform(name + ".wq", dim, dim, bound, rng);
    wk = store.add_uniform(name + ".wk", dim, dim, bound, rng);
    wv = store.add_uniform(name + ".wv", dim, dim, bound, rng);
    wo = store.add_uniform(name + ".wo", dim, dim, bound, rng);
  }

  Tensor<T> operator()(const Tensor<T>& query, const Tensor<T>& kv, AttentionTrace* trace = nullptr,
                       std::vector<Tensor<T>>* weights_out = nullptr) const {
    const int D = wq.rows();
    if (query.cols() != D || kv.cols() != D) throw ShapeError("attention: input width must equal model dimension");
    const int dh = D / heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    auto q = matmul(query, wq);
    auto k = matmul(kv, wk);
    auto v = matmul(kv, wv);
    std::vector<Tensor<T>> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      auto qh = heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
      auto scores = scale(matmul_nt(qh, kh), inv_sqrt);
      if (trace) trace->score_shapes.emplace_back(scores.rows(), scores.cols());
      auto attn = softmax_rows(scores);
      if (weights_out) weights_out->push_back(attn);
      outs.push_back(matmul(attn, vh));
    }
    auto merged = heads == 1 ? outs[0] : concat_cols(outs);
    return matmul(merged, wo);
  }
};

/// Stack of linear layers with tanh between them (none after the last).
template <class T>
struct Mlp {
  std::vector<Linear<T>> layers;

  Mlp() = default;
  /// `n_layers` linear maps: in -> hidden -> ... -> hidden -> out.
  Mlp(ParamStore<T>& store, const std::string& name, int in, int hidden, int out, int n_layers, Rng& rng) {
    if (n_layers < 1) throw std::invalid_argument("mlp needs at least one layer");
    int width = in;
    for (int l = 0; l < n_layers; ++l) {
      const int next = l + 1 == n_layers ? out : hidden;
      layers.emplace_back(store, name + "." + std::to_string(l), width, next, rng);
      width = next;
    }
  }
  Tensor<T> operator()(Tensor<T> x) const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      x = layers[l](x);
      if (l + 1 < layers.size()) x = tanh(x);
    }
    return x;
  }
};

}  // namespace fjsp::nn
