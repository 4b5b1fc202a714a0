#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fjsp/core/instance.hpp"

namespace fjsp {

struct ScheduledOp {
  int job = 0;
  int op = 0;
  int machine = 0;
  Time start = 0;
  Time end = 0;
  friend bool operator==(const ScheduledOp&, const ScheduledOp&) = default;
};

struct Schedule {
  std::vector<ScheduledOp> ops;
  Time makespan = 0;

  /// Sorts entries by (machine, start), the serialization order.
  void normalize() {
    std::sort(ops.begin(), ops.end(), [](const ScheduledOp& a, const ScheduledOp& b) {
      return std::tie(a.machine, a.start, a.job, a.op) < std::tie(b.machine, b.start, b.job, b.op);
    });
  }
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

inline nlohmann::json schedule_to_json(Schedule s) {
  s.normalize();
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& o : s.ops)
    ops.push_back({{"job", o.job}, {"op", o.op}, {"machine", o.machine}, {"start", o.start}, {"end", o.end}});
  return {{"makespan", s.makespan}, {"ops", std::move(ops)}};
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
  Schedule s;
  s.makespan = j.at("makespan").get<Time>();
  for (const auto& o : j.at("ops"))
    s.ops.push_back({o.at("job").get<int>(), o.at("op").get<int>(), o.at("machine").get<int>(),
                     o.at("start").get<Time>(), o.at("end").get<Time>()});
  return s;
}

enum class ViolationKind { Coverage, Overlap, Precedence, Duration, Eligibility, Makespan, Index };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Coverage: return "coverage";
    case ViolationKind::Overlap: return "overlap";
    case ViolationKind::Precedence: return "precedence";
    case ViolationKind::Duration: return "duration";
    case ViolationKind::Eligibility: return "eligibility";
    case ViolationKind::Makespan: return "makespan";
    case ViolationKind::Index: return "index";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Returns every constraint the schedule breaks; empty means feasible.
inline std::vector<Violation> validate_schedule(const FjspInstance& inst, const Schedule& sched) {
  std::vector<Violation> out;
  auto report = [&](ViolationKind k, std::string msg) { out.push_back({k, std::move(msg)}); };
  auto name = [](const ScheduledOp& o) { return "O(" + std::to_string(o.job) + "," + std::to_string(o.op) + ")"; };

  std::vector<int> seen(inst.total_ops(), 0);
  std::vector<const ScheduledOp*> by_op(inst.total_ops(), nullptr);
  std::vector<std::vector<const ScheduledOp*>> by_machine(inst.n_machines());
  Time max_end = 0;
  for (const auto& o : sched.ops) {
    if (o.job < 0 || o.job >= inst.n_jobs() || o.op < 0 || o.op >= inst.job_size(o.job)) {
      report(ViolationKind::Index, "unknown operation " + name(o));
      continue;
    }
    if (o.machine < 0 || o.machine >= inst.n_machines()) {
      report(ViolationKind::Index, name(o) + " on unknown machine " + std::to_string(o.machine));
      continue;
    }
    const int flat = inst.flat_index(o.job, o.op);
    ++seen[flat];
    by_op[flat] = &o;
    by_machine[o.machine].push_back(&o);
    max_end = std::max(max_end, o.end);
    if (o.start < 0) report(ViolationKind::Duration, name(o) + " starts before time 0");
    const Time p = inst.op(flat).time_on(o.machine);
    if (p == 0) {
      report(ViolationKind::Eligibility, name(o) + " assigned to ineligible machine " + std::to_string(o.machine));
    } else if (o.end - o.start != p) {
      report(ViolationKind::Duration, name(o) + " lasts " + std::to_string(o.end - o.start) + ", expected " +
                                          std::to_string(p));
    }
  }
  for (int f = 0; f < inst.total_ops(); ++f) {
    if (seen[f] != 1)
      report(ViolationKind::Coverage, "O(" + std::to_string(inst.job_of(f)) + "," + std::to_string(inst.pos_of(f)) +
                                          ") scheduled " + std::to_string(seen[f]) + " times");
  }
  for (int i = 0; i < inst.n_jobs(); ++i) {
    for (int j = 1; j < inst.job_size(i); ++j) {
      const auto* prev = by_op[inst.flat_index(i, j - 1)];
      const auto* cur = by_op[inst.flat_index(i, j)];
      if (prev && cur && cur->start < prev->end)
        report(ViolationKind::Precedence, name(*cur) + " starts before " + name(*prev) + " ends");
    }
  }
  for (auto& lane : by_machine) {
    std::sort(lane.begin(), lane.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t e = 1; e < lane.size(); ++e)
      if (lane[e]->start < lane[e - 1]->end)
        report(ViolationKind::Overlap, name(*lane[e]) + " overlaps " + name(*lane[e - 1]) + " on machine " +
                                           std::to_string(lane[e]->machine));
  }
  if (sched.makespan != max_end)
    report(ViolationKind::Makespan,
           "makespan " + std::to_string(sched.makespan) + " differs from last end " + std::to_string(max_end));
  return out;
}

}  // namespace fjsp
