#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fjsp/core/rng.hpp"
#include "fjsp/nn/tensor.hpp"

namespace fjsp::nn {

/// Named trainable parameters in registration order.
template <std::floating_point T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, int rows, int cols, std::vector<T> init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    auto t = Tensor<T>::from(rows, cols, std::move(init), true);
    index_[name] = params_.size();
    params_.emplace_back(name, t);
    return t;
  }

  Tensor<T> add_uniform(const std::string& name, int rows, int cols, T bound, Rng& rng) {
    std::vector<T> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = static_cast<T>(uniform_real(rng, -bound, bound));
    return add(name, rows, cols, std::move(v));
  }

  Tensor<T> add_constant(const std::string& name, int rows, int cols, T value) {
    return add(name, rows, cols, std::vector<T>(static_cast<std::size_t>(rows) * cols, value));
  }

  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return params_[it->second].second;
  }
  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return params_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  /// Copies values from another store with the same layout.
  void copy_values_from(const ParamStore& other) {
    if (other.params_.size() != params_.size()) throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].first != other.params_[i].first || params_[i].second.size() != other.params_[i].second.size())
        throw std::invalid_argument("parameter layout mismatch at '" + params_[i].first + "'");
      params_[i].second.values() = other.params_[i].second.values();
    }
  }

  /// L2 norm over all gradients.
  double grad_norm() const {
    double s = 0;
    for (const auto& [_, t] : params_)
      for (T g : t.grad()) s += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(s);
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace fjsp::nn
