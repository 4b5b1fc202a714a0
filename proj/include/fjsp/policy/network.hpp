#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fjsp/nn/checkpoint.hpp"
#include "fjsp/nn/layers.hpp"
#include "fjsp/policy/mamba.hpp"
#include "fjsp/sim/env.hpp"

namespace fjsp::policy {

struct PolicyConfig {
  int d_model = 128;
  int heads = 8;
  int mamba_layers = 1;
  int d_state = 16;
  int conv_window = 4;
  int expand = 2;
  int dt_rank = 0;
  int mlp_hidden = 64;
  int mlp_layers = 3;
  int ff_mult = 4;
  bool use_encoder = true;
  bool use_decoder = true;
  bool additive_gate = false;

  void validate() const {
    if (d_model < 1 || heads < 1 || d_model % heads != 0)
      throw std::invalid_argument("d_model must be a positive multiple of heads");
    if (mamba_layers < 0 || d_state < 1 || conv_window < 1 || expand < 1 || dt_rank < 0)
      throw std::invalid_argument("invalid state-space dimensions");
    if (mlp_hidden < 1 || mlp_layers < 1 || ff_mult < 1) throw std::invalid_argument("invalid head dimensions");
  }

  MambaDims mamba_dims() const { return {d_model, d_state, conv_window, expand, dt_rank, additive_gate}; }
  int candidate_width() const { return 4 * d_model + kPairFeatures; }
};

#define FJSP_POLICY_FIELDS(X)                                                                                  \
  X(d_model) X(heads) X(mamba_layers) X(d_state) X(conv_window) X(expand) X(dt_rank) X(mlp_hidden) X(mlp_layers) \
  X(ff_mult) X(use_encoder) X(use_decoder) X(additive_gate)

inline void to_json(nlohmann::json& j, const PolicyConfig& c) {
  j = nlohmann::json::object();
#define FJSP_PUT(f) j[#f] = c.f;
  FJSP_POLICY_FIELDS(FJSP_PUT)
#undef FJSP_PUT
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, PolicyConfig& c) {
#define FJSP_GET(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  FJSP_POLICY_FIELDS(FJSP_GET)
#undef FJSP_GET
}
#undef FJSP_POLICY_FIELDS

/// Pre-norm cross-attention layer:
///   h^ = h + MHA(LN(h), LN(E));  h' = h^ + FF(LN(h^))
template <class T>
struct CrossAttentionLayer {
  nn::LayerNorm<T> ln_q, ln_kv, ln_ff;
  nn::MultiHeadAttention<T> mha;
  nn::Linear<T> ff1, ff2;

  CrossAttentionLayer() = default;
  CrossAttentionLayer(nn::ParamStore<T>& store, const std::string& name, const PolicyConfig& cfg, Rng& rng)
      : ln_q(store, name + ".ln_q", cfg.d_model),
        ln_kv(store, name + ".ln_kv", cfg.d_model),
        ln_ff(store, name + ".ln_ff", cfg.d_model),
        mha(store, name + ".mha", cfg.d_model, cfg.heads, rng),
        ff1(store, name + ".ff1", cfg.d_model, cfg.ff_mult * cfg.d_model, rng),
        ff2(store, name + ".ff2", cfg.ff_mult * cfg.d_model, cfg.d_model, rng) {}

  nn::Tensor<T> operator()(const nn::Tensor<T>& h, const nn::Tensor<T>& E, nn::AttentionTrace* trace = nullptr,
                           std::vector<nn::Tensor<T>>* weights = nullptr) const {
    auto hh = nn::add(h, mha(ln_q(h), ln_kv(E), trace, weights));
    return nn::add(hh, ff2(nn::silu(ff1(ln_ff(hh)))));
  }
};

template <class T>
struct PolicyOutput {
  nn::Tensor<T> logits;     // 1 x P
  nn::Tensor<T> probs;      // 1 x P
  nn::Tensor<T> log_probs;  // 1 x P
  nn::Tensor<T> value;      // 1 x 1
};

template <class T>
struct DecodeProbe {
  nn::AttentionTrace trace;
  std::vector<nn::Tensor<T>> machine_attention;  // per head, |M| x |O|
  std::vector<nn::Tensor<T>> op_attention;       // per head, |O| x |M|
};

/// Actor-critic network over the sim feature bundle.
template <class T>
class Policy {
 public:
  explicit Policy(PolicyConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    op_embed_ = nn::Linear<T>(store_, "encoder.op_embed", kOpFeatures, cfg_.d_model, rng);
    machine_embed_ = nn::Linear<T>(store_, "encoder.machine_embed", kMachineFeatures, cfg_.d_model, rng);
    if (cfg_.use_encoder) {
      for (int l = 0; l < cfg_.mamba_layers; ++l)
        op_blocks_.emplace_back(store_, "encoder.op." + std::to_string(l), cfg_.mamba_dims(), rng);
      for (int l = 0; l < cfg_.mamba_layers; ++l)
        machine_blocks_.emplace_back(store_, "encoder.machine." + std::to_string(l), cfg_.mamba_dims(), rng);
    }
    if (cfg_.use_decoder) {
      machine_layer_ = CrossAttentionLayer<T>(store_, "decoder.machine", cfg_, rng);
      op_layer_ = CrossAttentionLayer<T>(store_, "decoder.op", cfg_, rng);
    }
    actor_ = nn::Mlp<T>(store_, "actor", cfg_.candidate_width(), cfg_.mlp_hidden, 1, cfg_.mlp_layers, rng);
    critic_ = nn::Mlp<T>(store_, "critic", 2 * cfg_.d_model, cfg_.mlp_hidden, 1, cfg_.mlp_layers, rng);
  }

  Policy(const Policy&) = delete;
  Policy& operator=(const Policy&) = delete;

  const PolicyConfig& config() const { return cfg_; }
  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }

  /// Two independent branches: ops (|O| x 10) and machines (|M| x 8) to d_model.
  std::pair<nn::Tensor<T>, nn::Tensor<T>> dme_encode(const nn::Tensor<T>& op_feats,
                                                     const nn::Tensor<T>& machine_feats) const {
    auto ho = op_embed_(op_feats);
    auto hm = machine_embed_(machine_feats);
    for (const auto& b : op_blocks_) ho = b(ho);
    for (const auto& b : machine_blocks_) hm = b(hm);
    return {ho, hm};
  }

  /// Machines attend to operations, then operations attend to the updated machines.
  std::pair<nn::Tensor<T>, nn::Tensor<T>> cross_attention_decode(const nn::Tensor<T>& ho, const nn::Tensor<T>& hm,
                                                                 DecodeProbe<T>* probe = nullptr) const {
    if (!cfg_.use_decoder) return {ho, hm};
    auto* trace = probe ? &probe->trace : nullptr;
    auto hm2 = machine_layer_(hm, ho, trace, probe ? &probe->machine_attention : nullptr);
    auto ho2 = op_layer_(ho, hm2, trace, probe ? &probe->op_attention : nullptr);
    return {ho2, hm2};
  }

  PolicyOutput<T> forward(const FeatureBundle& fb, DecodeProbe<T>* probe = nullptr) const {
    if (fb.n_pairs() == 0) throw ContractViolation("policy forward on a state with no eligible actions");
    auto op_feats = to_tensor(fb.n_ops, kOpFeatures, fb.op_features);
    auto m_feats = to_tensor(fb.n_machines, kMachineFeatures, fb.machine_features);
    auto [ho, hm] = dme_encode(op_feats, m_feats);
    auto [ho2, hm2] = cross_attention_decode(ho, hm, probe);

    auto g_op = pool_nonzero(ho2, fb.op_active);
    auto g_m = pool_nonzero(hm2, std::vector<std::uint8_t>(fb.n_machines, 1));
    const int P = fb.n_pairs();
    std::vector<int> machines(P);
    for (int i = 0; i < P; ++i) machines[i] = fb.pairs[i].machine;
    auto cand = nn::concat_cols<T>({nn::gather_rows(ho2, fb.pair_op), nn::gather_rows(hm2, machines),
                                    nn::broadcast_rows(g_op, P), nn::broadcast_rows(g_m, P),
                                    to_tensor(P, kPairFeatures, fb.pair_features)});
    PolicyOutput<T> out;
    out.logits = nn::transpose(actor_(cand));
    out.probs = nn::softmax_rows(out.logits);
    out.log_probs = nn::log_softmax_rows(out.logits);
    out.value = critic_(nn::concat_cols<T>({g_op, g_m}));
    return out;
  }

  static nn::Tensor<T> pool_nonzero(const nn::Tensor<T>& h, const std::vector<std::uint8_t>& active) {
    return nn::masked_mean_rows(h, active);
  }

  nlohmann::json manifest_config() const { return {{"policy", cfg_}}; }

  void save(const std::string& path, nlohmann::json extra = nlohmann::json::object()) const {
    extra["policy"] = cfg_;
    nn::save_checkpoint(path, store_, extra);
  }

 private:
  static nn::Tensor<T> to_tensor(int rows, int cols, const std::vector<double>& v) {
    return nn::Tensor<T>::from(rows, cols, std::vector<T>(v.begin(), v.end()));
  }

  PolicyConfig cfg_;
  nn::ParamStore<T> store_;
  nn::Linear<T> op_embed_, machine_embed_;
  std::vector<MambaBlock<T>> op_blocks_, machine_blocks_;
  CrossAttentionLayer<T> machine_layer_, op_layer_;
  nn::Mlp<T> actor_, critic_;
};

/// Restores a policy (config and weights) written by Policy::save.
template <class T>
std::unique_ptr<Policy<T>> load_policy(const std::string& path) {
  auto data = nn::read_checkpoint(path);
  if (!data.config.contains("policy")) throw nn::CheckpointError("checkpoint has no policy config");
  auto p = std::make_unique<Policy<T>>(data.config.at("policy").get<PolicyConfig>());
  nn::load_into(p->params(), data);
  return p;
}

}  // namespace fjsp::policy
