#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fjsp/core/rng.hpp"
#include "fjsp/nn/param_store.hpp"

namespace fjsp::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients with central differences
/// (f(w+eps) - f(w-eps)) / 2eps. Tensors larger than `max_coords` are
/// subsampled. Relative error uses max(|g|, |g_fd|, 1e-8) as denominator.
template <class T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, ParamStore<T>& params, double eps = 1e-5,
                           std::size_t max_coords = 64, std::uint64_t seed = 0) {
  params.zero_grad();
  backward(f());
  std::vector<std::vector<T>> analytic;
  for (auto& [_, t] : params) analytic.push_back(t.grad());

  GradCheckResult r;
  Rng rng(seed);
  NoGradGuard no_grad;
  std::size_t p = 0;
  for (auto& [name, t] : params) {
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i)
        std::swap(coords[i], coords[static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i),
                                                                          static_cast<std::int64_t>(coords.size() - 1)))]);
      coords.resize(max_coords);
    }
    for (auto c : coords) {
      const T orig = t.data()[c];
      t.data()[c] = static_cast<T>(orig + eps);
      const double up = static_cast<double>(f().item());
      t.data()[c] = static_cast<T>(orig - eps);
      const double down = static_cast<double>(f().item());
      t.data()[c] = orig;
      const double fd = (up - down) / (2 * eps);
      const double g = static_cast<double>(analytic[p][c]);
      const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-8});
      ++r.coords_checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_param = name;
        r.worst_index = c;
        r.analytic = g;
        r.numeric = fd;
      }
    }
    ++p;
  }
  return r;
}

}  // namespace fjsp::nn
