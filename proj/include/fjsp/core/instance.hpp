#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fjsp/core/rng.hpp"

namespace fjsp {

using Time = std::int64_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Eligible {
  int machine;
  Time time;
  friend bool operator==(const Eligible&, const Eligible&) = default;
};

/// One operation: its eligible machines sorted by machine index.
struct Operation {
  std::vector<Eligible> eligible;

  Time min_time() const {
    Time best = std::numeric_limits<Time>::max();
    for (const auto& e : eligible) best = std::min(best, e.time);
    return best;
  }
  Time max_time() const {
    Time best = 0;
    for (const auto& e : eligible) best = std::max(best, e.time);
    return best;
  }
  double mean_time() const {
    double s = 0;
    for (const auto& e : eligible) s += static_cast<double>(e.time);
    return s / static_cast<double>(eligible.size());
  }
  /// Processing time on `machine`, or 0 if the machine is not eligible.
  Time time_on(int machine) const {
    for (const auto& e : eligible)
      if (e.machine == machine) return e.time;
    return 0;
  }
  friend bool operator==(const Operation&, const Operation&) = default;
};

struct Job {
  std::vector<Operation> ops;
  friend bool operator==(const Job&, const Job&) = default;
};

/// Immutable FJSP instance. Operations are also addressable by a flat,
/// job-major index in [0, total_ops()).
class FjspInstance {
 public:
  FjspInstance() = default;
  FjspInstance(int n_machines, std::vector<Job> jobs) : n_machines_(n_machines), jobs_(std::move(jobs)) {
    if (n_machines_ < 1) throw std::invalid_argument("instance needs at least one machine");
    if (jobs_.empty()) throw std::invalid_argument("instance needs at least one job");
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      auto& job = jobs_[i];
      if (job.ops.empty()) throw std::invalid_argument("job " + std::to_string(i) + " has no operations");
      job_first_.push_back(static_cast<int>(op_job_.size()));
      for (std::size_t j = 0; j < job.ops.size(); ++j) {
        auto& op = job.ops[j];
        if (op.eligible.empty()) throw std::invalid_argument("operation without eligible machines");
        std::sort(op.eligible.begin(), op.eligible.end(),
                  [](const Eligible& a, const Eligible& b) { return a.machine < b.machine; });
        for (std::size_t e = 0; e < op.eligible.size(); ++e) {
          const auto& el = op.eligible[e];
          if (el.machine < 0 || el.machine >= n_machines_) throw std::invalid_argument("machine index out of range");
          if (el.time < 1) throw std::invalid_argument("processing time must be positive");
          if (e > 0 && op.eligible[e - 1].machine == el.machine) throw std::invalid_argument("duplicate machine");
        }
        op_job_.push_back(static_cast<int>(i));
        op_pos_.push_back(static_cast<int>(j));
      }
    }
  }

  int n_jobs() const { return static_cast<int>(jobs_.size()); }
  int n_machines() const { return n_machines_; }
  int total_ops() const { return static_cast<int>(op_job_.size()); }
  const std::vector<Job>& jobs() const { return jobs_; }
  const Job& job(int i) const { return jobs_[i]; }

  int flat_index(int job, int op) const { return job_first_[job] + op; }
  int job_of(int flat) const { return op_job_[flat]; }
  int pos_of(int flat) const { return op_pos_[flat]; }
  int job_first(int job) const { return job_first_[job]; }
  int job_size(int job) const { return static_cast<int>(jobs_[job].ops.size()); }
  const Operation& op(int flat) const { return jobs_[op_job_[flat]].ops[op_pos_[flat]]; }
  const Operation& op(int job, int pos) const { return jobs_[job].ops[pos]; }

  /// Mean eligible-machine count per operation.
  double mean_flex() const {
    double s = 0;
    for (const auto& j : jobs_)
      for (const auto& o : j.ops) s += static_cast<double>(o.eligible.size());
    return s / static_cast<double>(total_ops());
  }

  /// Mean processing time over all (operation, eligible machine) entries.
  double mean_proc_time() const {
    double s = 0;
    std::size_t n = 0;
    for (const auto& j : jobs_)
      for (const auto& o : j.ops)
        for (const auto& e : o.eligible) {
          s += static_cast<double>(e.time);
          ++n;
        }
    return s / static_cast<double>(n);
  }

  friend bool operator==(const FjspInstance& a, const FjspInstance& b) {
    return a.n_machines_ == b.n_machines_ && a.jobs_ == b.jobs_;
  }

 private:
  int n_machines_ = 0;
  std::vector<Job> jobs_;
  std::vector<int> job_first_;
  std::vector<int> op_job_;
  std::vector<int> op_pos_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline long long parse_int(std::string_view tok, std::size_t line, const char* what) {
  long long v = 0;
  std::size_t i = 0;
  bool neg = false;
  if (!tok.empty() && (tok[0] == '-' || tok[0] == '+')) {
    neg = tok[0] == '-';
    i = 1;
  }
  if (i == tok.size()) throw ParseError(line, std::string("expected integer for ") + what);
  for (; i < tok.size(); ++i) {
    if (tok[i] < '0' || tok[i] > '9')
      throw ParseError(line, std::string("expected integer for ") + what + ", got '" + std::string(tok) + "'");
    v = v * 10 + (tok[i] - '0');
    if (v > (1LL << 40)) throw ParseError(line, std::string("integer too large for ") + what);
  }
  return neg ? -v : v;
}

}  // namespace detail

/// Parses the standard FJSP text format (1-based machine ids in the file).
inline FjspInstance parse_instance(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;  // (1-based line number, content)
  std::size_t line_no = 1;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      auto content = text.substr(start, i - start);
      if (!detail::split_ws(content).empty()) lines.emplace_back(line_no, content);
      ++line_no;
      start = i + 1;
    }
  }
  if (lines.empty()) throw ParseError(1, "empty input");

  const auto header = detail::split_ws(lines[0].second);
  const auto header_line = lines[0].first;
  if (header.size() < 2 || header.size() > 3) throw ParseError(header_line, "header must be '<n_jobs> <n_machines> [<avg_flex>]'");
  const auto n_jobs = detail::parse_int(header[0], header_line, "n_jobs");
  const auto n_machines = detail::parse_int(header[1], header_line, "n_machines");
  if (n_jobs < 1) throw ParseError(header_line, "n_jobs must be positive");
  if (n_machines < 1) throw ParseError(header_line, "n_machines must be positive");
  // The third field (average flexibility) is informational and recomputed on write.

  if (lines.size() - 1 < static_cast<std::size_t>(n_jobs))
    throw ParseError(lines.back().first, "expected " + std::to_string(n_jobs) + " job lines, found " +
                                             std::to_string(lines.size() - 1));
  if (lines.size() - 1 > static_cast<std::size_t>(n_jobs))
    throw ParseError(lines[n_jobs + 1].first, "unexpected content after the last job line");

  std::vector<Job> jobs;
  jobs.reserve(n_jobs);
  for (long long i = 0; i < n_jobs; ++i) {
    const auto ln = lines[i + 1].first;
    const auto tok = detail::split_ws(lines[i + 1].second);
    std::size_t p = 0;
    auto next = [&](const char* what) -> long long {
      if (p >= tok.size()) throw ParseError(ln, std::string("token count mismatch: missing ") + what);
      return detail::parse_int(tok[p++], ln, what);
    };
    Job job;
    const auto n_ops = next("n_ops");
    if (n_ops < 1) throw ParseError(ln, "job must have at least one operation");
    for (long long j = 0; j < n_ops; ++j) {
      const auto k = next("eligible machine count");
      if (k < 1) throw ParseError(ln, "operation must have at least one eligible machine");
      if (k > n_machines) throw ParseError(ln, "eligible machine count exceeds n_machines");
      Operation op;
      for (long long e = 0; e < k; ++e) {
        const auto m = next("machine id");
        const auto t = next("processing time");
        if (m < 1 || m > n_machines) throw ParseError(ln, "machine index " + std::to_string(m) + " out of range");
        if (t < 1) throw ParseError(ln, "non-positive processing time " + std::to_string(t));
        for (const auto& prev : op.eligible)
          if (prev.machine == m - 1) throw ParseError(ln, "duplicate machine " + std::to_string(m));
        op.eligible.push_back({static_cast<int>(m - 1), static_cast<Time>(t)});
      }
      job.ops.push_back(std::move(op));
    }
    if (p != tok.size())
      throw ParseError(ln, "token count mismatch: " + std::to_string(tok.size() - p) + " trailing token(s)");
    jobs.push_back(std::move(job));
  }
  return FjspInstance(static_cast<int>(n_machines), std::move(jobs));
}

/// Writes the standard format; the third header field is the mean
/// eligible-machine count with one decimal.
inline std::string write_instance(const FjspInstance& inst) {
  std::ostringstream out;
  char flex[64];
  std::snprintf(flex, sizeof flex, "%.1f", inst.mean_flex());
  out << inst.n_jobs() << ' ' << inst.n_machines() << ' ' << flex << '\n';
  for (const auto& job : inst.jobs()) {
    out << job.ops.size();
    for (const auto& op : job.ops) {
      out << ' ' << op.eligible.size();
      for (const auto& e : op.eligible) out << ' ' << (e.machine + 1) << ' ' << e.time;
    }
    out << '\n';
  }
  return out.str();
}

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

/// Synthetic instance distribution. Zero-width default ranges (lo = hi = 0)
/// for ops/flex are replaced by the machine-count-derived defaults.
struct GenSpec {
  int n_jobs = 10;
  int n_machines = 5;
  IntRange ops_per_job{0, 0};
  IntRange flex{0, 0};
  IntRange proc_time{1, 20};
  std::uint64_t seed = 0;

  GenSpec resolved() const {
    GenSpec s = *this;
    if (s.ops_per_job.lo == 0 && s.ops_per_job.hi == 0) {
      s.ops_per_job = {static_cast<std::int64_t>(std::ceil(0.8 * n_machines - 1e-9)),
                       static_cast<std::int64_t>(std::ceil(1.2 * n_machines - 1e-9))};
    }
    if (s.flex.lo == 0 && s.flex.hi == 0) s.flex = {1, n_machines};
    return s;
  }

  void validate() const {
    const auto s = resolved();
    if (s.n_jobs < 1 || s.n_machines < 1) throw std::invalid_argument("GenSpec: jobs and machines must be positive");
    if (s.ops_per_job.lo < 1 || s.ops_per_job.hi < s.ops_per_job.lo)
      throw std::invalid_argument("GenSpec: invalid ops-per-job range");
    if (s.flex.lo < 1 || s.flex.hi < s.flex.lo || s.flex.hi > s.n_machines)
      throw std::invalid_argument("GenSpec: invalid flexibility range");
    if (s.proc_time.lo < 1 || s.proc_time.hi < s.proc_time.lo)
      throw std::invalid_argument("GenSpec: invalid processing-time range");
  }
};

inline FjspInstance generate_instance(const GenSpec& spec_in) {
  spec_in.validate();
  const auto spec = spec_in.resolved();
  Rng rng(spec.seed);
  std::vector<Job> jobs(spec.n_jobs);
  std::vector<int> machines(spec.n_machines);
  for (auto& job : jobs) {
    const auto n_ops = uniform_int(rng, spec.ops_per_job.lo, spec.ops_per_job.hi);
    for (std::int64_t j = 0; j < n_ops; ++j) {
      const auto k = static_cast<int>(uniform_int(rng, spec.flex.lo, spec.flex.hi));
      std::iota(machines.begin(), machines.end(), 0);
      // Partial Fisher-Yates: the first k entries are a uniform k-subset.
      for (int e = 0; e < k; ++e) {
        const auto pick = static_cast<int>(uniform_int(rng, e, spec.n_machines - 1));
        std::swap(machines[e], machines[pick]);
      }
      Operation op;
      for (int e = 0; e < k; ++e) op.eligible.push_back({machines[e], uniform_int(rng, spec.proc_time.lo, spec.proc_time.hi)});
      job.ops.push_back(std::move(op));
    }
  }
  return FjspInstance(spec.n_machines, std::move(jobs));
}

struct InstanceStats {
  int total_ops = 0;
  double mean_flex = 0;
  Time min_proc_time = 0;
  Time max_proc_time = 0;
};

inline InstanceStats instance_stats(const FjspInstance& inst) {
  InstanceStats s;
  s.total_ops = inst.total_ops();
  s.mean_flex = inst.mean_flex();
  s.min_proc_time = std::numeric_limits<Time>::max();
  for (int o = 0; o < inst.total_ops(); ++o) {
    s.min_proc_time = std::min(s.min_proc_time, inst.op(o).min_time());
    s.max_proc_time = std::max(s.max_proc_time, inst.op(o).max_time());
  }
  return s;
}

}  // namespace fjsp
