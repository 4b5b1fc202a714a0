#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjsp/core/instance.hpp"
#include "fjsp/pdr/rules.hpp"
#include "fjsp/train/ppo.hpp"

namespace fjsp::bench {

/// Relative excess over the best-known makespan, in percent.
inline double gap(double makespan, double best_known) {
  if (!(best_known > 0)) throw std::invalid_argument("gap: best-known makespan must be positive");
  return (makespan / best_known - 1.0) * 100.0;
}

/// Best (lowest makespan, earliest on ties) of `n_traj` sampled episodes.
/// Trajectory i draws from derive_seed(seed, i).
template <class T>
train::Trajectory evaluate_sampling(const policy::Policy<T>& pol, const FjspInstance& inst, int n_traj,
                                    std::uint64_t seed, train::RolloutTiming* timing = nullptr) {
  if (n_traj < 1) throw std::invalid_argument("evaluate_sampling: n_traj must be >= 1");
  std::optional<train::Trajectory> best;
  for (int i = 0; i < n_traj; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    auto tr = train::rollout(pol, inst, policy::Strategy::Sample, rng, false, timing);
    if (!best || tr.makespan < best->makespan) best = std::move(tr);
  }
  return std::move(*best);
}

struct SolveResult {
  Schedule schedule;
  double model_time_s = 0;
  double env_time_s = 0;
};

/// A named solver: a dispatching rule or a policy with a decoding strategy.
struct Solver {
  std::string name;
  std::string strategy;
  std::function<SolveResult(const FjspInstance&)> solve;
};

inline Solver pdr_solver(Rule rule) {
  return {to_string(rule), "greedy", [rule](const FjspInstance& inst) {
            const auto t0 = std::chrono::steady_clock::now();
            SolveResult r{run_pdr(inst, rule)};
            r.env_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return r;
          }};
}

template <class T>
Solver policy_solver(const policy::Policy<T>& pol, policy::Strategy strategy, int n_traj = 100,
                     std::uint64_t seed = 0, std::string name = "policy") {
  return {std::move(name), policy::to_string(strategy), [&pol, strategy, n_traj, seed](const FjspInstance& inst) {
            train::RolloutTiming timing;
            train::Trajectory tr;
            if (strategy == policy::Strategy::Greedy) {
              Rng unused(0);
              tr = train::rollout(pol, inst, strategy, unused, false, &timing);
            } else {
              tr = evaluate_sampling(pol, inst, n_traj, seed, &timing);
            }
            return SolveResult{std::move(tr.schedule), timing.model_s, timing.env_s};
          }};
}

struct BenchRow {
  std::string name;
  std::string solver;
  std::string strategy;
  Time makespan = 0;
  std::optional<double> gap_percent;
  double wall_time_s = 0;
  double model_time_s = 0;
  double env_time_s = 0;
  std::string error;  // non-empty when the instance could not be solved
};

struct BenchReport {
  std::vector<BenchRow> rows;

  std::vector<const BenchRow*> solved() const {
    std::vector<const BenchRow*> out;
    for (const auto& r : rows)
      if (r.error.empty()) out.push_back(&r);
    return out;
  }
  double mean_makespan() const {
    const auto s = solved();
    if (s.empty()) return 0;
    double t = 0;
    for (auto* r : s) t += static_cast<double>(r->makespan);
    return t / static_cast<double>(s.size());
  }
  /// Mean of per-instance gaps over rows that have a best-known value.
  std::optional<double> mean_gap() const {
    double t = 0;
    int n = 0;
    for (auto* r : solved())
      if (r->gap_percent) {
        t += *r->gap_percent;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return t / n;
  }
  double total_time_s() const {
    double t = 0;
    for (const auto& r : rows) t += r.wall_time_s;
    return t;
  }
};

/// Reads "name,makespan" lines; a non-numeric second field on the first line
/// is taken as a header.
inline std::map<std::string, double> read_best_known(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open best-known table '" + path + "'");
  std::map<std::string, double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected name,makespan");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string name = trim(line.substr(0, comma));
    const std::string val = trim(line.substr(comma + 1));
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (end == val.c_str() || *end != '\0') {
      if (out.empty() && lineno == 1) continue;
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad makespan '" + val + "'");
    }
    out[name] = v;
  }
  return out;
}

inline std::optional<double> lookup_best_known(const std::map<std::string, double>& table,
                                               const std::filesystem::path& file) {
  for (const auto& key : {file.filename().string(), file.stem().string()}) {
    auto it = table.find(key);
    if (it != table.end()) return it->second;
  }
  return std::nullopt;
}

/// Instance files in a suite directory: regular files, sorted by name, other
/// than .csv/.json/.md side files.
inline std::vector<std::filesystem::path> suite_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".csv" || ext == ".json" || ext == ".md") continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

inline std::optional<FjspInstance> read_instance_file(const std::filesystem::path& p, std::string* error) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    *error = "cannot open file";
    return std::nullopt;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_instance(ss.str());
  } catch (const std::exception& e) {
    *error = e.what();
    return std::nullopt;
  }
}

/// Solves every instance in `dir`. Per-file failures become rows with an
/// error message; the suite continues. Every schedule is re-validated.
inline BenchReport run_benchmark(const std::string& dir, const Solver& solver,
                                 const std::map<std::string, double>& best_known = {}) {
  BenchReport rep;
  for (const auto& path : suite_files(dir)) {
    BenchRow row;
    row.name = path.stem().string();
    row.solver = solver.name;
    row.strategy = solver.strategy;
    std::string err;
    auto inst = read_instance_file(path, &err);
    if (!inst) {
      row.error = err;
      rep.rows.push_back(std::move(row));
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto res = solver.solve(*inst);
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.model_time_s = res.model_time_s;
    row.env_time_s = res.env_time_s;
    const auto violations = validate_schedule(*inst, res.schedule);
    if (!violations.empty()) {
      row.error = "invalid schedule: " + violations.front().message;
    } else {
      row.makespan = res.schedule.makespan;
      if (auto bk = lookup_best_known(best_known, path)) row.gap_percent = gap(static_cast<double>(row.makespan), *bk);
    }
    rep.rows.push_back(std::move(row));
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const BenchRow& a, const BenchRow& b) { return a.name < b.name; });
  return rep;
}

namespace detail {
inline std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}
}  // namespace detail

/// CSV with a header row. Time columns are last and can be omitted.
inline std::string report_csv(const BenchReport& rep, bool with_times = true) {
  std::ostringstream out;
  out << "name,solver,strategy,makespan,gap_percent";
  if (with_times) out << ",wall_time_s,model_time_s,env_time_s";
  out << ",error\n";
  for (const auto& r : rep.rows) {
    out << r.name << ',' << r.solver << ',' << r.strategy << ',';
    if (r.error.empty()) out << r.makespan;
    out << ',' << (r.gap_percent ? detail::fmt(*r.gap_percent, 4) : "");
    if (with_times)
      out << ',' << detail::fmt(r.wall_time_s, 6) << ',' << detail::fmt(r.model_time_s, 6) << ','
          << detail::fmt(r.env_time_s, 6);
    std::string e = r.error;
    std::replace(e.begin(), e.end(), ',', ';');
    std::replace(e.begin(), e.end(), '\n', ' ');
    out << ',' << e << '\n';
  }
  return out.str();
}

/// Fixed-width text table with a summary line.
inline std::string report_table(const BenchReport& rep, bool with_times = true) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = {"instance", "solver", "strategy", "makespan", "gap%"};
  if (with_times) head.push_back("time_s");
  cells.push_back(head);
  for (const auto& r : rep.rows) {
    std::vector<std::string> c = {r.name, r.solver, r.strategy, r.error.empty() ? std::to_string(r.makespan) : "error",
                                  r.gap_percent ? detail::fmt(*r.gap_percent, 2) : "-"};
    if (with_times) c.push_back(detail::fmt(r.wall_time_s, 3));
    cells.push_back(std::move(c));
  }
  std::vector<std::size_t> w(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], row[i].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const bool left = i < 3;
      const std::string pad(w[i] - row[i].size(), ' ');
      out << (i ? "  " : "") << (left ? row[i] + pad : pad + row[i]);
    }
    out << '\n';
  }
  out << "mean makespan " << detail::fmt(rep.mean_makespan(), 2);
  if (auto g = rep.mean_gap()) out << ", mean gap " << detail::fmt(*g, 2) << '%';
  if (with_times) out << ", total time " << detail::fmt(rep.total_time_s(), 3) << 's';
  out << '\n';
  for (const auto& r : rep.rows)
    if (!r.error.empty()) out << r.name << ": " << r.error << '\n';
  return out.str();
}

}  // namespace fjsp::bench
