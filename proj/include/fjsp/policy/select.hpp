#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fjsp/core/rng.hpp"

namespace fjsp::policy {

enum class Strategy { Greedy, Sample };

inline std::string to_string(Strategy s) { return s == Strategy::Greedy ? "greedy" : "sample"; }

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "greedy") return Strategy::Greedy;
  if (s == "sample" || s == "sampling") return Strategy::Sample;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

/// Argmax with the lowest index winning ties, or a categorical draw.
template <class T>
int select_action(const std::vector<T>& probs, Strategy mode, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("select_action: empty distribution");
  if (mode == Strategy::Greedy) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i)
      if (probs[i] > probs[best]) best = i;
    return best;
  }
  const double u = uniform_unit(rng);
  double acc = 0;
  int last = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0) continue;
    acc += static_cast<double>(probs[i]);
    last = i;
    if (u < acc) return i;
  }
  return last;  // rounding left u above the total
}

}  // namespace fjsp::policy
