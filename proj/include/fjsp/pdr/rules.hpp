#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fjsp/sim/env.hpp"

namespace fjsp {

enum class Rule { FIFO, MOR, SPT, MWKR };

inline const char* to_string(Rule r) {
  switch (r) {
    case Rule::FIFO: return "fifo";
    case Rule::MOR: return "mor";
    case Rule::SPT: return "spt";
    case Rule::MWKR: return "mwkr";
  }
  return "?";
}

inline std::optional<Rule> rule_from_string(std::string_view s) {
  if (s == "fifo" || s == "FIFO") return Rule::FIFO;
  if (s == "mor" || s == "MOR" || s == "mopnr" || s == "MOPNR") return Rule::MOR;
  if (s == "spt" || s == "SPT") return Rule::SPT;
  if (s == "mwkr" || s == "MWKR") return Rule::MWKR;
  return std::nullopt;
}

inline constexpr Rule kAllRules[] = {Rule::FIFO, Rule::MOR, Rule::SPT, Rule::MWKR};

namespace detail {

// Lexicographic best over the eligible pairs. `key` returns a tuple-like
// value where smaller is better; the eligible order (job, op, machine)
// resolves remaining ties because only strictly better keys replace.
template <class Key>
PairAction argbest(const std::vector<PairAction>& pairs, Key key) {
  std::size_t best = 0;
  auto best_key = key(pairs[0]);
  for (std::size_t a = 1; a < pairs.size(); ++a) {
    auto k = key(pairs[a]);
    if (k < best_key) {
      best = a;
      best_key = k;
    }
  }
  return pairs[best];
}

}  // namespace detail

/// Picks a dispatch decision with one of the four priority rules.
inline PairAction pdr_select(Rule rule, const SimState& s) {
  const auto pairs = s.eligible_actions();
  if (pairs.empty()) throw ContractViolation("pdr_select: no eligible pair");
  const auto& inst = s.instance();
  auto flat = [&](const PairAction& a) { return inst.flat_index(a.job, a.op); };
  auto ptime = [&](const PairAction& a) { return inst.op(flat(a)).time_on(a.machine); };

  switch (rule) {
    case Rule::FIFO:
      // Earliest ready operation, then the machine that became free first.
      return detail::argbest(pairs, [&](const PairAction& a) {
        return std::pair{s.ready_time(flat(a)), s.machine_free_time(a.machine)};
      });
    case Rule::MOR:
      // Most unscheduled successors; machine with the shortest time.
      return detail::argbest(pairs, [&](const PairAction& a) {
        const Time successors = inst.job_size(a.job) - a.op - 1;
        return std::pair{-successors, ptime(a)};
      });
    case Rule::SPT:
      return detail::argbest(pairs, [&](const PairAction& a) { return ptime(a); });
    case Rule::MWKR: {
      // Most remaining work (mean times of the op and its successors).
      std::vector<double> work(inst.n_jobs(), 0.0);
      for (int i = 0; i < inst.n_jobs(); ++i)
        for (int j = s.job_next(i); j < inst.job_size(i); ++j) work[i] += inst.op(i, j).mean_time();
      return detail::argbest(pairs, [&](const PairAction& a) { return std::pair{-work[a.job], ptime(a)}; });
    }
  }
  throw std::invalid_argument("unknown rule");
}

/// Runs one complete episode, choosing each decision with `choose(state)`.
template <class Chooser>
Schedule run_episode(const FjspInstance& inst, Chooser&& choose) {
  SimState s(inst);
  while (!s.finished()) s.step(choose(s));
  return s.to_schedule();
}

inline Schedule run_pdr(const FjspInstance& inst, Rule rule) {
  return run_episode(inst, [rule](const SimState& s) { return pdr_select(rule, s); });
}

}  // namespace fjsp
