#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjsp/core/instance.hpp"
#include "fjsp/sim/schedule.hpp"

namespace fjsp {

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpStatus : std::uint8_t { Unscheduled, Ready, Processing, Done };

struct PairAction {
  int job = 0;
  int op = 0;
  int machine = 0;
  friend bool operator==(const PairAction&, const PairAction&) = default;
};

inline constexpr int kOpFeatures = 10;
inline constexpr int kMachineFeatures = 8;
inline constexpr int kPairFeatures = 8;

/// Raw state features. Matrices are row-major; done operations have all-zero
/// rows and op_active = 0.
struct FeatureBundle {
  int n_ops = 0;
  int n_machines = 0;
  std::vector<double> op_features;       // n_ops x kOpFeatures
  std::vector<double> machine_features;  // n_machines x kMachineFeatures
  std::vector<double> pair_features;     // pairs.size() x kPairFeatures
  std::vector<std::uint8_t> op_active;   // n_ops
  std::vector<PairAction> pairs;
  std::vector<int> pair_op;              // flat op index of each pair

  int n_pairs() const { return static_cast<int>(pairs.size()); }
};

namespace detail {
inline double guarded_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Mutable scheduling state of one episode (the MDP). The clock only moves
/// forward; after each dispatch it jumps to the next completion event until
/// a dispatch decision exists again or every operation is scheduled.
class SimState {
 public:
  explicit SimState(FjspInstance&&) = delete;  // holds a pointer to the instance
  explicit SimState(const FjspInstance& inst) : inst_(&inst) {
    const int n = inst.total_ops();
    status_.assign(n, OpStatus::Unscheduled);
    ready_time_.assign(n, -1);
    start_.assign(n, -1);
    end_.assign(n, -1);
    machine_.assign(n, -1);
    lb_.assign(n, 0);
    machine_free_.assign(inst.n_machines(), 0);
    machine_current_.assign(inst.n_machines(), -1);
    job_next_.assign(inst.n_jobs(), 0);
    for (int i = 0; i < inst.n_jobs(); ++i) {
      const int f = inst.job_first(i);
      status_[f] = OpStatus::Ready;
      ready_time_[f] = 0;
      recompute_job_bounds(i);
    }
    cmax_ = compute_cmax();
  }

  const FjspInstance& instance() const { return *inst_; }
  Time clock() const { return clock_; }
  int step_count() const { return steps_; }
  bool finished() const { return scheduled_ == inst_->total_ops(); }

  OpStatus status(int flat) const { return status_[flat]; }
  Time ready_time(int flat) const { return ready_time_[flat]; }
  Time op_start(int flat) const { return start_[flat]; }
  Time op_end(int flat) const { return end_[flat]; }
  int op_machine(int flat) const { return machine_[flat]; }
  Time machine_free_time(int k) const { return machine_free_[k]; }
  bool machine_idle(int k) const { return machine_free_[k] <= clock_; }
  /// Position of the next unscheduled operation in job i (job size if none).
  int job_next(int i) const { return job_next_[i]; }

  /// Estimated lower bound of the completion time: actual end for scheduled
  /// operations, otherwise predecessor bound plus minimum processing time.
  Time lower_bound_completion(int flat) const { return lb_[flat]; }

  /// C_max(s): max over machine free times and each job's last-op bound.
  Time cmax_estimate() const { return cmax_; }

  /// Eligible (operation, idle machine) pairs in job-major, machine order.
  std::vector<PairAction> eligible_actions() const {
    std::vector<PairAction> out;
    for (int i = 0; i < inst_->n_jobs(); ++i) {
      const int j = job_next_[i];
      if (j >= inst_->job_size(i)) continue;
      const int f = inst_->flat_index(i, j);
      if (status_[f] != OpStatus::Ready) continue;
      for (const auto& e : inst_->op(f).eligible)
        if (machine_free_[e.machine] <= clock_) out.push_back({i, j, e.machine});
    }
    return out;
  }

  bool is_eligible(const PairAction& a) const {
    if (a.job < 0 || a.job >= inst_->n_jobs()) return false;
    if (a.op != job_next_[a.job] || a.op >= inst_->job_size(a.job)) return false;
    if (a.machine < 0 || a.machine >= inst_->n_machines()) return false;
    const int f = inst_->flat_index(a.job, a.op);
    return status_[f] == OpStatus::Ready && inst_->op(f).time_on(a.machine) > 0 && machine_free_[a.machine] <= clock_;
  }

  /// Dispatches the pair at the current clock and advances to the next
  /// decision point. Returns the reward C_max(s_t) - C_max(s_{t+1}).
  Time step(const PairAction& a) {
    if (finished()) throw ContractViolation("step on a finished episode");
    if (!is_eligible(a))
      throw ContractViolation("illegal action (" + std::to_string(a.job) + "," + std::to_string(a.op) + "," +
                              std::to_string(a.machine) + ")");
    const Time before = cmax_;
    const int f = inst_->flat_index(a.job, a.op);
    const Time p = inst_->op(f).time_on(a.machine);
    status_[f] = OpStatus::Processing;
    start_[f] = clock_;
    end_[f] = clock_ + p;
    machine_[f] = a.machine;
    machine_free_[a.machine] = end_[f];
    machine_current_[a.machine] = f;
    ++job_next_[a.job];
    ++scheduled_;
    ++steps_;
    recompute_job_bounds(a.job);
    advance();
    cmax_ = compute_cmax();
    return before - cmax_;
  }

  Schedule to_schedule() const {
    if (!finished()) throw ContractViolation("to_schedule on an unfinished episode");
    Schedule s;
    for (int f = 0; f < inst_->total_ops(); ++f) {
      s.ops.push_back({inst_->job_of(f), inst_->pos_of(f), machine_[f], start_[f], end_[f]});
      s.makespan = std::max(s.makespan, end_[f]);
    }
    s.normalize();
    return s;
  }

  FeatureBundle features() const;

 private:
  void recompute_job_bounds(int job) {
    const int first = inst_->job_first(job);
    Time prev = 0;
    for (int j = 0; j < inst_->job_size(job); ++j) {
      const int f = first + j;
      lb_[f] = end_[f] >= 0 ? end_[f] : prev + inst_->op(f).min_time();
      prev = lb_[f];
    }
  }

  Time compute_cmax() const {
    Time c = 0;
    for (auto t : machine_free_) c = std::max(c, t);
    for (int i = 0; i < inst_->n_jobs(); ++i) c = std::max(c, lb_[inst_->job_first(i) + inst_->job_size(i) - 1]);
    return c;
  }

  void complete_until_clock() {
    for (int k = 0; k < inst_->n_machines(); ++k) {
      const int f = machine_current_[k];
      if (f < 0 || end_[f] > clock_) continue;
      status_[f] = OpStatus::Done;
      machine_current_[k] = -1;
      const int i = inst_->job_of(f);
      const int j = inst_->pos_of(f);
      if (j + 1 < inst_->job_size(i)) {
        status_[f + 1] = OpStatus::Ready;
        ready_time_[f + 1] = end_[f];
      }
    }
  }

  bool has_decision() const {
    for (int i = 0; i < inst_->n_jobs(); ++i) {
      const int j = job_next_[i];
      if (j >= inst_->job_size(i)) continue;
      const int f = inst_->flat_index(i, j);
      if (status_[f] != OpStatus::Ready) continue;
      for (const auto& e : inst_->op(f).eligible)
        if (machine_free_[e.machine] <= clock_) return true;
    }
    return false;
  }

  void advance() {
    complete_until_clock();
    if (finished()) {
      // Run out the clock so every operation reaches Done.
      for (auto t : machine_free_) clock_ = std::max(clock_, t);
      complete_until_clock();
      return;
    }
    while (!has_decision()) {
      Time next = std::numeric_limits<Time>::max();
      for (int k = 0; k < inst_->n_machines(); ++k)
        if (machine_current_[k] >= 0) next = std::min(next, machine_free_[k]);
      if (next == std::numeric_limits<Time>::max()) throw std::logic_error("simulation deadlock");
      clock_ = next;
      complete_until_clock();
    }
  }

  const FjspInstance* inst_;
  Time clock_ = 0;
  int steps_ = 0;
  int scheduled_ = 0;
  Time cmax_ = 0;
  std::vector<OpStatus> status_;
  std::vector<Time> ready_time_;
  std::vector<Time> start_;
  std::vector<Time> end_;
  std::vector<int> machine_;
  std::vector<Time> lb_;
  std::vector<Time> machine_free_;
  std::vector<int> machine_current_;
  std::vector<int> job_next_;
};

inline SimState reset(const FjspInstance& inst) { return SimState(inst); }
SimState reset(FjspInstance&&) = delete;

inline FeatureBundle SimState::features() const {
  if (finished()) throw ContractViolation("features on a finished episode");
  const auto& inst = *inst_;
  const int n_ops = inst.total_ops();
  const int n_m = inst.n_machines();
  const double scale = inst.mean_proc_time();
  const double T = static_cast<double>(clock_);
  using detail::guarded_div;

  FeatureBundle b;
  b.n_ops = n_ops;
  b.n_machines = n_m;
  b.op_features.assign(static_cast<std::size_t>(n_ops) * kOpFeatures, 0.0);
  b.machine_features.assign(static_cast<std::size_t>(n_m) * kMachineFeatures, 0.0);
  b.op_active.assign(n_ops, 0);

  // Job-level remaining counts and workloads over unscheduled operations.
  std::vector<int> remaining(inst.n_jobs(), 0);
  std::vector<double> workload(inst.n_jobs(), 0.0);
  // Per-machine aggregates over unscheduled operations.
  std::vector<double> m_min(n_m, 0.0), m_sum(n_m, 0.0), m_max(n_m, 0.0);
  std::vector<int> m_count(n_m, 0);
  double global_max = 0.0;
  for (int i = 0; i < inst.n_jobs(); ++i) {
    for (int j = job_next_[i]; j < inst.job_size(i); ++j) {
      const auto& op = inst.op(i, j);
      ++remaining[i];
      workload[i] += op.mean_time();
      for (const auto& e : op.eligible) {
        const double p = static_cast<double>(e.time);
        const int k = e.machine;
        m_min[k] = m_count[k] == 0 ? p : std::min(m_min[k], p);
        m_max[k] = std::max(m_max[k], p);
        m_sum[k] += p;
        ++m_count[k];
        global_max = std::max(global_max, p);
      }
    }
  }

  for (int f = 0; f < n_ops; ++f) {
    if (status_[f] == OpStatus::Done) continue;
    const auto& op = inst.op(f);
    const int i = inst.job_of(f);
    double* row = &b.op_features[static_cast<std::size_t>(f) * kOpFeatures];
    const double pmin = static_cast<double>(op.min_time());
    const double pmax = static_cast<double>(op.max_time());
    row[0] = status_[f] == OpStatus::Processing ? 1.0 : 0.0;
    row[1] = pmin / scale;
    row[2] = op.mean_time() / scale;
    row[3] = (pmax - pmin) / scale;
    row[4] = static_cast<double>(op.eligible.size()) / n_m;
    row[5] = static_cast<double>(lb_[f]) / scale;
    row[6] = remaining[i];
    row[7] = workload[i] / scale;
    row[8] = status_[f] == OpStatus::Ready ? (T - static_cast<double>(ready_time_[f])) / scale : 0.0;
    row[9] = status_[f] == OpStatus::Processing ? (static_cast<double>(end_[f]) - T) / scale : 0.0;
    b.op_active[f] = 1;
  }

  b.pairs = eligible_actions();
  const int n_pairs = b.n_pairs();
  std::vector<int> cand_count(n_m, 0);
  std::vector<double> cand_max(n_m, 0.0);
  double pairs_max = 0.0;
  b.pair_op.resize(n_pairs);
  std::vector<double> pair_p(n_pairs);
  for (int a = 0; a < n_pairs; ++a) {
    const auto& pa = b.pairs[a];
    const int f = inst.flat_index(pa.job, pa.op);
    b.pair_op[a] = f;
    pair_p[a] = static_cast<double>(inst.op(f).time_on(pa.machine));
    ++cand_count[pa.machine];
    cand_max[pa.machine] = std::max(cand_max[pa.machine], pair_p[a]);
    pairs_max = std::max(pairs_max, pair_p[a]);
  }

  for (int k = 0; k < n_m; ++k) {
    double* row = &b.machine_features[static_cast<std::size_t>(k) * kMachineFeatures];
    const double free = static_cast<double>(machine_free_[k]);
    row[0] = machine_free_[k] > clock_ ? 1.0 : 0.0;
    row[1] = m_count[k] > 0 ? m_min[k] / scale : 0.0;
    row[2] = m_count[k] > 0 ? m_sum[k] / m_count[k] / scale : 0.0;
    row[3] = m_count[k];
    row[4] = cand_count[k];
    row[5] = free / scale;
    row[6] = std::max(0.0, T - free) / scale;
    row[7] = std::max(0.0, free - T) / scale;
  }

  b.pair_features.assign(static_cast<std::size_t>(n_pairs) * kPairFeatures, 0.0);
  for (int a = 0; a < n_pairs; ++a) {
    const auto& pa = b.pairs[a];
    const int f = b.pair_op[a];
    const int k = pa.machine;
    const double p = pair_p[a];
    double* row = &b.pair_features[static_cast<std::size_t>(a) * kPairFeatures];
    const double op_wait = T - static_cast<double>(ready_time_[f]);
    const double m_wait = std::max(0.0, T - static_cast<double>(machine_free_[k]));
    row[0] = p / scale;
    row[1] = guarded_div(p, static_cast<double>(inst.op(f).max_time()));
    row[2] = guarded_div(p, cand_max[k]);
    row[3] = guarded_div(p, global_max);
    row[4] = guarded_div(p, m_max[k]);
    row[5] = guarded_div(p, pairs_max);
    row[6] = guarded_div(p, workload[pa.job]);
    row[7] = (op_wait + m_wait) / scale;
  }
  return b;
}

}  // namespace fjsp
