// Command-line front end: gen, solve, train, bench, validate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fjsp/fjsp.hpp"

namespace fs = std::filesystem;
using namespace fjsp;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

FjspInstance load_instance(const std::string& path) {
  std::string err;
  auto inst = bench::read_instance_file(path, &err);
  if (!inst) throw std::runtime_error(path + ": " + err);
  return std::move(*inst);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::string checkpoint_dtype(const std::string& path) {
  auto data = nn::read_checkpoint(path);
  return data.tensors.empty() ? "f64" : data.tensors.front().dtype;
}

void add_gen_flags(CLI::App* app, GenSpec& g) {
  app->add_option("--jobs", g.n_jobs, "Number of jobs")->capture_default_str();
  app->add_option("--machines", g.n_machines, "Number of machines")->capture_default_str();
  app->add_option("--ops-min", g.ops_per_job.lo, "Min operations per job (0: 0.8 x machines)");
  app->add_option("--ops-max", g.ops_per_job.hi, "Max operations per job (0: 1.2 x machines)");
  app->add_option("--flex-min", g.flex.lo, "Min eligible machines per operation (0: 1)");
  app->add_option("--flex-max", g.flex.hi, "Max eligible machines per operation (0: all)");
  app->add_option("--pt-min", g.proc_time.lo, "Min processing time")->capture_default_str();
  app->add_option("--pt-max", g.proc_time.hi, "Max processing time")->capture_default_str();
}

struct SolverFlags {
  std::string rule;
  std::string checkpoint;
  std::string strategy = "greedy";
  int n_traj = 100;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    auto* r = app->add_option("--rule", rule, "Dispatching rule: fifo, mor, spt, mwkr");
    auto* c = app->add_option("--checkpoint", checkpoint, "Trained policy checkpoint");
    r->excludes(c);
    app->add_option("--strategy", strategy, "Policy decoding: greedy or sample")->capture_default_str();
    app->add_option("--n-traj", n_traj, "Sampled trajectories per instance")->capture_default_str();
    app->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  }
};

template <class T>
int with_policy(const std::string& path, const std::function<int(const policy::Policy<T>&)>& fn) {
  auto pol = policy::load_policy<T>(path);
  return fn(*pol);
}

/// Runs `fn` with a solver built from the flags; policies are evaluated in
/// the precision they were saved in.
int with_solver(const SolverFlags& f, const std::function<int(const bench::Solver&)>& fn) {
  if (!f.checkpoint.empty()) {
    const auto strategy = policy::strategy_from_string(f.strategy);
    if (checkpoint_dtype(f.checkpoint) == "f32")
      return with_policy<float>(f.checkpoint, [&](const policy::Policy<float>& p) {
        return fn(bench::policy_solver(p, strategy, f.n_traj, f.seed));
      });
    return with_policy<double>(f.checkpoint, [&](const policy::Policy<double>& p) {
      return fn(bench::policy_solver(p, strategy, f.n_traj, f.seed));
    });
  }
  if (f.rule.empty()) throw UsageError("one of --rule or --checkpoint is required");
  auto rule = rule_from_string(f.rule);
  if (!rule) throw UsageError("unknown rule '" + f.rule + "'");
  return fn(bench::pdr_solver(*rule));
}

template <class T>
int run_train(policy::PolicyConfig pc, const train::TrainConfig& tc, const GenSpec& gen, const std::string& out,
              const std::string& log_path) {
  policy::Policy<T> pol(pc, derive_seed(tc.seed, 0));
  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw std::runtime_error("cannot write '" + log_path + "'");
    log = &log_file;
  }
  auto res = train::train(pol, tc, gen, out, log);
  std::cerr << "validation makespan: untrained " << res.initial_val << ", best " << res.best_val << " (iteration "
            << res.best_iteration << ")\ncheckpoint: " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible job shop scheduling: simulator, dispatching rules, learned policy"};
  app.require_subcommand(1);

  // gen
  GenSpec gen;
  int gen_count = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out = ".";
  std::string gen_prefix = "inst";
  auto* gen_cmd = app.add_subcommand("gen", "Generate random instances");
  add_gen_flags(gen_cmd, gen);
  gen_cmd->add_option("--count", gen_count, "Number of instances")->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed, "Base seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen_out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--prefix", gen_prefix, "File name prefix")->capture_default_str();

  // solve
  SolverFlags solve_flags;
  std::string solve_instance, solve_out, solve_svg;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance");
  solve_cmd->add_option("instance", solve_instance, "Instance file")->required();
  solve_flags.add(solve_cmd);
  solve_cmd->add_option("--out", solve_out, "Schedule JSON path (default: stdout)");
  solve_cmd->add_option("--svg", solve_svg, "Also write a Gantt chart");

  // train
  train::TrainConfig tc;
  policy::PolicyConfig pc;
  GenSpec train_gen;
  train_gen.n_jobs = 10;
  train_gen.n_machines = 5;
  std::string train_out = "policy.ckpt", train_log, precision = "f32";
  bool no_encoder = false, no_decoder = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with PPO");
  add_gen_flags(train_cmd, train_gen);
  train_cmd->add_option("--iterations", tc.iterations)->capture_default_str();
  train_cmd->add_option("--batch", tc.batch, "Trajectories per iteration")->capture_default_str();
  train_cmd->add_option("--resample-every", tc.resample_every)->capture_default_str();
  train_cmd->add_option("--validate-every", tc.validate_every)->capture_default_str();
  train_cmd->add_option("--val-size", tc.val_size)->capture_default_str();
  train_cmd->add_option("--lr", tc.lr)->capture_default_str();
  train_cmd->add_option("--lr-final", tc.lr_final, "Learning rate for the second half")->capture_default_str();
  train_cmd->add_option("--minibatch", tc.minibatch, "Samples per optimizer step (0: whole batch)")->capture_default_str();
  train_cmd->add_option("--clip", tc.ppo.clip)->capture_default_str();
  train_cmd->add_option("--epochs", tc.ppo.epochs)->capture_default_str();
  train_cmd->add_option("--value-coef", tc.ppo.value_coef)->capture_default_str();
  train_cmd->add_option("--entropy-coef", tc.ppo.entropy_coef)->capture_default_str();
  train_cmd->add_option("--gamma", tc.ppo.gamma)->capture_default_str();
  train_cmd->add_option("--lambda", tc.ppo.lambda)->capture_default_str();
  train_cmd->add_option("--grad-clip", tc.ppo.max_grad_norm)->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  train_cmd->add_option("--d-model", pc.d_model)->capture_default_str();
  train_cmd->add_option("--heads", pc.heads)->capture_default_str();
  train_cmd->add_option("--mamba-layers", pc.mamba_layers)->capture_default_str();
  train_cmd->add_option("--d-state", pc.d_state)->capture_default_str();
  train_cmd->add_option("--mlp-hidden", pc.mlp_hidden)->capture_default_str();
  train_cmd->add_flag("--no-encoder", no_encoder, "Linear embeddings only");
  train_cmd->add_flag("--no-decoder", no_decoder, "Skip the cross-attention decoder");
  train_cmd->add_flag("--additive-gate", pc.additive_gate, "Join SSM and gate branches by addition");
  train_cmd->add_option("--precision", precision, "f32 or f64")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", train_log, "JSON-lines log path (default: stdout)");

  // bench
  SolverFlags bench_flags;
  std::string bench_dir, bench_best, bench_csv;
  bool bench_no_times = false;
  auto* bench_cmd = app.add_subcommand("bench", "Solve every instance in a directory");
  bench_cmd->add_option("--dir", bench_dir, "Suite directory")->required();
  bench_cmd->add_option("--best-known", bench_best, "CSV of name,makespan");
  bench_flags.add(bench_cmd);
  bench_cmd->add_option("--csv", bench_csv, "Write the report as CSV");
  bench_cmd->add_flag("--no-times", bench_no_times, "Omit timing columns");

  // validate
  std::string val_instance, val_schedule;
  auto* validate_cmd = app.add_subcommand("validate", "Check a schedule against an instance");
  validate_cmd->add_option("instance", val_instance, "Instance file")->required();
  validate_cmd->add_option("schedule", val_schedule, "Schedule JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      fs::create_directories(gen_out);
      for (int i = 0; i < gen_count; ++i) {
        GenSpec g = gen;
        g.seed = gen_count == 1 ? gen_seed : derive_seed(gen_seed, static_cast<std::uint64_t>(i));
        char name[64];
        std::snprintf(name, sizeof name, "%s_%03d.fjs", gen_prefix.c_str(), i);
        write_text((fs::path(gen_out) / name).string(), write_instance(generate_instance(g)));
      }
      return 0;
    }

    if (*solve_cmd) {
      const auto inst = load_instance(solve_instance);
      return with_solver(solve_flags, [&](const bench::Solver& s) {
        auto res = s.solve(inst);
        res.schedule.normalize();
        const auto json = schedule_to_json(res.schedule).dump(2) + "\n";
        if (solve_out.empty())
          std::cout << json;
        else
          write_text(solve_out, json);
        if (!solve_svg.empty()) write_text(solve_svg, bench::gantt_svg(res.schedule, inst));
        std::cerr << s.name << " (" << s.strategy << "): makespan " << res.schedule.makespan << '\n';
        return 0;
      });
    }

    if (*train_cmd) {
      pc.use_encoder = !no_encoder;
      pc.use_decoder = !no_decoder;
      if (precision == "f32") return run_train<float>(pc, tc, train_gen, train_out, train_log);
      if (precision == "f64") return run_train<double>(pc, tc, train_gen, train_out, train_log);
      throw UsageError("--precision must be f32 or f64");
    }

    if (*bench_cmd) {
      const auto best = bench_best.empty() ? std::map<std::string, double>{} : bench::read_best_known(bench_best);
      return with_solver(bench_flags, [&](const bench::Solver& s) {
        const auto rep = bench::run_benchmark(bench_dir, s, best);
        std::cout << bench::report_table(rep, !bench_no_times);
        if (!bench_csv.empty()) write_text(bench_csv, bench::report_csv(rep, !bench_no_times));
        return 0;
      });
    }

    if (*validate_cmd) {
      const auto inst = load_instance(val_instance);
      std::ifstream in(val_schedule);
      if (!in) throw std::runtime_error("cannot open '" + val_schedule + "'");
      const auto sched = schedule_from_json(nlohmann::json::parse(in));
      const auto violations = validate_schedule(inst, sched);
      for (const auto& v : violations) std::cout << to_string(v.kind) << ": " << v.message << '\n';
      if (violations.empty()) {
        std::cout << "valid, makespan " << sched.makespan << '\n';
        return 0;
      }
      return 2;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
