#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fjsp/core/instance.hpp"
#include "fjsp/train/ppo.hpp"

namespace fjsp::train {

struct TrainConfig {
  int iterations = 10000;
  int batch = 20;
  int resample_every = 20;
  int validate_every = 10;
  int val_size = 100;
  double lr = 1e-4;
  double lr_final = 1e-5;
  int minibatch = 0;  // 0: one optimizer step per epoch over the whole batch
  PpoConfig ppo;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1 || batch < 1 || resample_every < 1 || validate_every < 1 || val_size < 1)
      throw std::invalid_argument("training counts must be positive");
    if (!(lr > 0) || !(lr_final > 0)) throw std::invalid_argument("learning rates must be positive");
    if (ppo.epochs < 1 || !(ppo.clip > 0) || minibatch < 0) throw std::invalid_argument("invalid PPO settings");
  }

  /// Step decay: lr for iterations < N/2, lr_final afterwards.
  double lr_at(int iteration) const { return 2 * iteration < iterations ? lr : lr_final; }
};

inline void to_json(nlohmann::json& j, const PpoConfig& c) {
  j = {{"clip", c.clip},     {"epochs", c.epochs}, {"value_coef", c.value_coef}, {"entropy_coef", c.entropy_coef},
       {"gamma", c.gamma},   {"lambda", c.lambda}, {"max_grad_norm", c.max_grad_norm}};
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"iterations", c.iterations}, {"batch", c.batch},       {"resample_every", c.resample_every},
       {"validate_every", c.validate_every}, {"val_size", c.val_size}, {"lr", c.lr},
       {"lr_final", c.lr_final},     {"minibatch", c.minibatch}, {"ppo", c.ppo}, {"seed", c.seed}};
}

inline std::vector<FjspInstance> make_instances(const GenSpec& base, int count, std::uint64_t seed, std::uint64_t stream) {
  std::vector<FjspInstance> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    GenSpec g = base;
    g.seed = derive_seed(seed, stream, static_cast<std::uint64_t>(i));
    out.push_back(generate_instance(g));
  }
  return out;
}

struct TrainResult {
  double initial_val = 0;
  double best_val = 0;
  int best_iteration = -1;
  std::vector<double> val_history;  // best-so-far after each validation
};

/// Training loop: sampled rollouts with frozen parameters, GAE, clipped
/// updates; fresh training instances every `resample_every` iterations and
/// greedy validation every `validate_every` (plus before the first update and
/// after the last). The best validated parameters are written to `checkpoint`.
/// Each iteration emits one JSON line to `log` when given.
template <class T>
TrainResult train(policy::Policy<T>& pol, const TrainConfig& cfg, const GenSpec& gen, const std::string& checkpoint,
                  std::ostream* log = nullptr) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto val = make_instances(gen, cfg.val_size, cfg.seed, 2);
  std::vector<FjspInstance> envs;
  Adam<T> opt(pol.params(), cfg.lr);
  nlohmann::json meta = {{"train", cfg}};

  TrainResult res;
  auto run_validation = [&](int it) {
    const double v = validate(pol, val);
    if (res.best_iteration < 0 || v < res.best_val) {
      res.best_val = v;
      res.best_iteration = it;
      meta["best_iteration"] = it;
      meta["best_val_makespan"] = v;
      if (!checkpoint.empty()) pol.save(checkpoint, meta);
    }
    res.val_history.push_back(res.best_val);
    return v;
  };
  res.initial_val = run_validation(0);
  if (log) {
    *log << nlohmann::json{{"iteration", 0}, {"val_makespan", res.initial_val}, {"best_val", res.best_val}}.dump()
         << '\n';
  }

  for (int it = 1; it <= cfg.iterations; ++it) {
    if ((it - 1) % cfg.resample_every == 0) envs = make_instances(gen, cfg.batch, cfg.seed, derive_seed(1, it));
    opt.set_lr(cfg.lr_at(it - 1));
    auto trajs = collect_rollouts(pol, envs, derive_seed(cfg.seed, 3, it));
    double mean_ret = 0, mean_mk = 0;
    for (const auto& tr : trajs) {
      double ret = 0;
      for (const auto& st : tr.steps) ret += st.reward;
      mean_ret += ret;
      mean_mk += static_cast<double>(tr.makespan);
    }
    mean_ret /= static_cast<double>(trajs.size());
    mean_mk /= static_cast<double>(trajs.size());
    const auto stats = ppo_update(pol, opt, trajs, cfg.ppo, cfg.minibatch);

    nlohmann::json line = {{"iteration", it},
                           {"mean_return", mean_ret},
                           {"mean_makespan", mean_mk},
                           {"actor_loss", stats.actor_loss},
                           {"value_loss", stats.value_loss},
                           {"entropy", stats.entropy},
                           {"clip_fraction", stats.clip_fraction},
                           {"grad_norm", stats.grad_norm},
                           {"lr", opt.lr()}};
    if (it % cfg.validate_every == 0 || it == cfg.iterations) {
      line["val_makespan"] = run_validation(it);
      line["best_val"] = res.best_val;
    }
    line["time_s"] = std::chrono::duration<double>(clock::now() - t0).count();
    if (log) *log << line.dump() << '\n' << std::flush;
  }
  return res;
}

}  // namespace fjsp::train
