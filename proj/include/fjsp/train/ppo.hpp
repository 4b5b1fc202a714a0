#pragma once

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fjsp/policy/network.hpp"
#include "fjsp/policy/select.hpp"
#include "fjsp/sim/schedule.hpp"
#include "fjsp/train/adam.hpp"

namespace fjsp::train {

struct PpoConfig {
  double clip = 0.2;
  int epochs = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double gamma = 1.0;
  double lambda = 0.98;
  double max_grad_norm = 1.0;
};

struct Transition {
  FeatureBundle state;
  int action = 0;
  double log_prob = 0;
  double reward = 0;  // makespan-bound decrease divided by the instance mean processing time
  double value = 0;
};

struct RolloutTiming {
  double model_s = 0;
  double env_s = 0;
};

struct Trajectory {
  std::vector<Transition> steps;
  Time initial_cmax = 0;
  Time makespan = 0;
  Time raw_return = 0;  // sum of unscaled rewards
  Schedule schedule;
};

/// Plays one episode with frozen parameters. With `record`, each decision's
/// state, log-probability and value are stored for a later update.
template <class T>
Trajectory rollout(const policy::Policy<T>& pol, const FjspInstance& inst, policy::Strategy mode, Rng& rng,
                   bool record = true, RolloutTiming* timing = nullptr) {
  using clock = std::chrono::steady_clock;
  nn::NoGradGuard no_grad;
  auto mark = clock::now();
  auto lap = [&](double RolloutTiming::*field) {
    if (!timing) return;
    const auto now = clock::now();
    timing->*field += std::chrono::duration<double>(now - mark).count();
    mark = now;
  };
  SimState s(inst);
  Trajectory tr;
  tr.initial_cmax = s.cmax_estimate();
  const double scale = inst.mean_proc_time();
  while (!s.finished()) {
    auto fb = s.features();
    lap(&RolloutTiming::env_s);
    auto out = pol.forward(fb);
    const int a = policy::select_action(out.probs.values(), mode, rng);
    lap(&RolloutTiming::model_s);
    const Time r = s.step(fb.pairs[a]);
    tr.raw_return += r;
    if (record) {
      Transition t;
      t.action = a;
      t.log_prob = static_cast<double>(out.log_probs.data()[a]);
      t.value = static_cast<double>(out.value.item());
      t.reward = static_cast<double>(r) / scale;
      t.state = std::move(fb);
      tr.steps.push_back(std::move(t));
    }
  }
  tr.schedule = s.to_schedule();
  tr.makespan = tr.schedule.makespan;
  lap(&RolloutTiming::env_s);
  return tr;
}

/// One sampled episode per instance; instance i draws from its own stream.
template <class T>
std::vector<Trajectory> collect_rollouts(const policy::Policy<T>& pol, const std::vector<FjspInstance>& envs,
                                         std::uint64_t seed) {
  std::vector<Trajectory> out;
  out.reserve(envs.size());
  for (std::size_t i = 0; i < envs.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(rollout(pol, envs[i], policy::Strategy::Sample, rng));
  }
  return out;
}

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} - V_t (V_T = 0), A_t = sum_l (gamma lambda)^l delta_{t+l},
/// returns = A + V. Advantages are not normalized here.
inline GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                             double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("compute_gae: length mismatch");
  const std::size_t n = rewards.size();
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.returns.assign(n, 0.0);
  double acc = 0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_v = k + 1 < n ? values[k + 1] : 0.0;
    const double delta = rewards[k] + gamma * next_v - values[k];
    acc = delta + gamma * lambda * acc;
    g.advantages[k] = acc;
    g.returns[k] = acc + values[k];
  }
  return g;
}

/// Shifts and scales to mean 0, std 1 (population std; unchanged scale if std is 0).
inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
}

struct Sample {
  const FeatureBundle* state;
  int action;
  double old_log_prob;
  double advantage;
  double ret;
};

struct PpoStats {
  double actor_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double grad_norm = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SampleLoss {
  double actor = 0, value = 0, entropy = 0;
  bool clipped = false;
};

/// Builds the per-sample objective
///   -min(r A, clip(r, 1-eps, 1+eps) A) + c_v (V - R)^2 - c_e H(pi)
/// with r = exp(log pi(a) - log pi_old(a)), and returns it as a graph node.
template <class T>
nn::Tensor<T> ppo_sample_loss(const policy::Policy<T>& pol, const Sample& s, const PpoConfig& cfg,
                              SampleLoss* parts = nullptr) {
  using namespace nn;
  auto out = pol.forward(*s.state);
  auto logp = pick(out.log_probs, 0, s.action);
  auto ratio = exp(add_scalar(logp, static_cast<T>(-s.old_log_prob)));
  const T A = static_cast<T>(s.advantage);
  auto surr = minimum(scale(ratio, A), scale(clamp(ratio, static_cast<T>(1 - cfg.clip), static_cast<T>(1 + cfg.clip)), A));
  auto actor = scale(surr, T(-1));
  auto vdiff = add_scalar(out.value, static_cast<T>(-s.ret));
  auto vloss = square(vdiff);
  auto ent = scale(sum(mul(out.probs, out.log_probs)), T(-1));
  auto loss = add(add(actor, scale(vloss, static_cast<T>(cfg.value_coef))), scale(ent, static_cast<T>(-cfg.entropy_coef)));
  if (parts) {
    const double r = static_cast<double>(ratio.item());
    parts->actor = static_cast<double>(actor.item());
    parts->value = static_cast<double>(vloss.item());
    parts->entropy = static_cast<double>(ent.item());
    parts->clipped = r < 1 - cfg.clip || r > 1 + cfg.clip;
  }
  return loss;
}

/// K epochs over the batch; each epoch accumulates the mean loss gradient over
/// all samples, clips its norm and takes one optimizer step. Statistics are
/// averaged over epochs.
template <class T>
PpoStats ppo_update(policy::Policy<T>& pol, Adam<T>& opt, const std::vector<Trajectory>& trajs, const PpoConfig& cfg,
                    int minibatch = 0) {
  std::vector<Sample> samples;
  std::vector<double> adv_all;
  for (const auto& tr : trajs) {
    std::vector<double> r, v;
    for (const auto& st : tr.steps) {
      r.push_back(st.reward);
      v.push_back(st.value);
    }
    auto g = compute_gae(r, v, cfg.gamma, cfg.lambda);
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      samples.push_back({&tr.steps[k].state, tr.steps[k].action, tr.steps[k].log_prob, g.advantages[k], g.returns[k]});
      adv_all.push_back(g.advantages[k]);
    }
  }
  normalize_advantages(adv_all);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv_all[i];

  PpoStats stats;
  if (samples.empty()) return stats;
  const std::size_t mb = minibatch > 0 ? static_cast<std::size_t>(minibatch) : samples.size();
  int updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t lo = 0; lo < samples.size(); lo += mb) {
      const std::size_t hi = std::min(samples.size(), lo + mb);
      const T inv = T(1) / static_cast<T>(hi - lo);
      pol.params().zero_grad();
      for (std::size_t i = lo; i < hi; ++i) {
        SampleLoss parts;
        auto loss = ppo_sample_loss(pol, samples[i], cfg, &parts);
        const double lv = static_cast<double>(loss.item());
        if (!std::isfinite(lv)) {
          std::ostringstream msg;
          msg << "non-finite PPO loss at epoch " << epoch << ", sample " << i << " (actor " << parts.actor
              << ", value " << parts.value << ", entropy " << parts.entropy << ")";
          throw NonFiniteLoss(msg.str());
        }
        nn::backward(nn::scale(loss, inv));
        stats.actor_loss += parts.actor;
        stats.value_loss += parts.value;
        stats.entropy += parts.entropy;
        stats.clip_fraction += parts.clipped ? 1.0 : 0.0;
      }
      stats.grad_norm += clip_grad_norm(pol.params(), cfg.max_grad_norm);
      opt.step();
      ++updates;
    }
  }
  const double n = static_cast<double>(samples.size()) * cfg.epochs;
  stats.actor_loss /= n;
  stats.value_loss /= n;
  stats.entropy /= n;
  stats.clip_fraction /= n;
  stats.grad_norm /= updates;
  return stats;
}

/// Mean greedy makespan over a fixed validation set.
template <class T>
double validate(const policy::Policy<T>& pol, const std::vector<FjspInstance>& val) {
  if (val.empty()) throw std::invalid_argument("validate: empty validation set");
  double total = 0;
  Rng unused(0);
  for (const auto& inst : val) total += static_cast<double>(rollout(pol, inst, policy::Strategy::Greedy, unused, false).makespan);
  return total / static_cast<double>(val.size());
}

}  // namespace fjsp::train
