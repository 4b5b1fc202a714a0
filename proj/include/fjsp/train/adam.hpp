#pragma once

#include <cmath>
#include <vector>

#include "fjsp/nn/param_store.hpp"

namespace fjsp::train {

template <class T>
class Adam {
 public:
  explicit Adam(nn::ParamStore<T>& store, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : store_(&store), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& [_, t] : store) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long steps() const { return t_; }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    std::size_t p = 0;
    for (auto& [_, t] : *store_) {
      const auto& g = t.grad();
      auto& m = m_[p];
      auto& v = v_[p];
      T* w = t.data();
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double gi = g[i];
        m[i] = b1_ * m[i] + (1 - b1_) * gi;
        v[i] = b2_ * v[i] + (1 - b2_) * gi * gi;
        w[i] -= static_cast<T>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
      ++p;
    }
  }

 private:
  nn::ParamStore<T>* store_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <class T>
double clip_grad_norm(nn::ParamStore<T>& store, double max_norm) {
  const double norm = store.grad_norm();
  if (norm > max_norm && norm > 0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& [_, t] : store)
      for (auto& g : t.grad_mut()) g *= s;
  }
  return norm;
}

}  // namespace fjsp::train
