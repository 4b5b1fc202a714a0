#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fjsp/policy/select.hpp"
#include "grad_cases.hpp"
#include "test_util.hpp"

using namespace fjsp;
using namespace fjsp::policy;
using fixtures::TensorD;

namespace {

ScanInputs random_scan(Rng& rng, int L, int D, int N) {
  ScanInputs in;
  in.L = L;
  in.D = D;
  in.N = N;
  in.x = fixtures::random_values(rng, static_cast<std::size_t>(L) * D);
  in.delta = fixtures::random_values(rng, static_cast<std::size_t>(L) * D, 1e-3, 1.0);
  in.A = fixtures::random_values(rng, static_cast<std::size_t>(D) * N, -3.0, -1e-3);
  in.B = fixtures::random_values(rng, static_cast<std::size_t>(L) * N);
  in.C = fixtures::random_values(rng, static_cast<std::size_t>(L) * N);
  in.skip = fixtures::random_values(rng, static_cast<std::size_t>(D));
  return in;
}

TensorD t(int r, int c, const std::vector<double>& v) { return TensorD::from(r, c, v); }

PolicyConfig small_config() {
  PolicyConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.d_state = 4;
  cfg.mlp_hidden = 16;
  return cfg;
}

FeatureBundle midway_bundle(const FjspInstance& inst, int steps) {
  SimState s(inst);
  for (int i = 0; i < steps && !s.finished(); ++i) s.step(s.eligible_actions().back());
  return s.features();
}

}  // namespace

TEST(Discretize, HandValues) {
  auto [a, b] = ssm_discretize({-std::log(2.0)}, {1.0}, 1.0);
  EXPECT_NEAR(a[0], 0.5, 1e-15);
  EXPECT_NEAR(b[0], 0.5 / std::log(2.0), 1e-15);
  std::tie(a, b) = ssm_discretize({0.0}, {2.0}, 0.1);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_NEAR(b[0], 0.2, 1e-15);
  std::tie(a, b) = ssm_discretize({-1.0}, {2.0}, 1e-12);
  EXPECT_NEAR(a[0], 1.0, 1e-11);
  EXPECT_NEAR(b[0], 0.0, 1e-11);
}

TEST(Discretize, SeriesBranchIsContinuous) {
  for (double z : {-1.2e-2, -1e-2, -0.99e-2, -1e-4, 1e-4, 0.99e-2, 1e-2, 1.2e-2}) {
    EXPECT_NEAR(policy::detail::expm1_over(z), std::expm1(z) / z, 1e-14) << z;
    const double h = 1e-6;
    const double fd = (std::expm1(z + h) / (z + h) - std::expm1(z - h) / (z - h)) / (2 * h);
    EXPECT_NEAR(policy::detail::expm1_over_deriv(z), fd, 1e-8) << z;
  }
}

TEST(Scan, TwoStepHandCase) {
  // A = -ln 2 and delta = 1 give A_bar = 0.5; B = 2 ln 2 makes B_bar = 1.
  ScanInputs in;
  in.L = 2;
  in.D = 1;
  in.N = 1;
  in.x = {1, 0};
  in.delta = {1, 1};
  in.A = {-std::log(2.0)};
  in.B = {2 * std::log(2.0), 2 * std::log(2.0)};
  in.C = {1, 1};
  in.skip = {0};
  auto y = selective_scan_reference(in);
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], 0.5, 1e-15);
}

TEST(Scan, SkipOnly) {
  Rng rng(1);
  auto in = random_scan(rng, 5, 3, 2);
  std::fill(in.B.begin(), in.B.end(), 0.0);
  std::fill(in.skip.begin(), in.skip.end(), 1.0);
  EXPECT_EQ(selective_scan_reference(in), in.x);
}

TEST(Scan, ThreeImplementationsAgree) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int L = 1 + static_cast<int>(uniform_int(rng, 0, 63));
    const int D = 1 + static_cast<int>(uniform_int(rng, 0, 7));
    const int N = 1 + static_cast<int>(uniform_int(rng, 0, 7));
    auto in = random_scan(rng, L, D, N);
    auto ref = selective_scan_reference(in);
    auto par = selective_scan_associative(in);
    std::vector<double> alog(in.A.size());
    for (std::size_t i = 0; i < alog.size(); ++i) alog[i] = std::log(-in.A[i]);
    auto y = selective_scan(t(L, D, in.x), t(L, D, in.delta), t(D, N, alog), t(L, N, in.B), t(L, N, in.C),
                            t(1, D, in.skip));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ASSERT_NEAR(par[i], ref[i], 1e-10);
      ASSERT_NEAR(y.values()[i], ref[i], 1e-10);
    }
  }
}

TEST(Scan, Causality) {
  Rng rng(2);
  auto in = random_scan(rng, 12, 2, 3);
  auto y0 = selective_scan_reference(in);
  for (int k = 0; k < 12; ++k) {
    auto p = in;
    for (int k2 = k + 1; k2 < 12; ++k2) {
      for (int d = 0; d < 2; ++d) p.x[k2 * 2 + d] += 5.0;
      for (int n = 0; n < 3; ++n) p.B[k2 * 3 + n] -= 2.0;
    }
    auto y1 = selective_scan_reference(p);
    for (int k2 = 0; k2 <= k; ++k2)
      for (int d = 0; d < 2; ++d) ASSERT_EQ(y1[k2 * 2 + d], y0[k2 * 2 + d]);
  }
}

TEST(Mamba, SingleStepSequence) {
  Rng rng(0);
  nn::ParamStore<double> ps;
  MambaDims d;
  d.d_model = 8;
  d.d_state = 4;
  MambaBlock<double> block(ps, "b", d, rng);
  auto y = block(t(1, 8, fixtures::random_values(rng, 8)));
  EXPECT_EQ(y.shape(), (std::vector<int>{1, 8}));
  for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(block(TensorD::zeros(2, 7)), nn::ShapeError);
}

TEST(Mamba, ZeroInputGivesZero) {
  Rng rng(0);
  nn::ParamStore<double> ps;
  MambaDims d;
  d.d_model = 8;
  MambaBlock<double> block(ps, "b", d, rng);
  auto y = block(TensorD::zeros(5, 8));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mamba, Causality) {
  Rng rng(3);
  nn::ParamStore<double> ps;
  MambaDims d;
  d.d_model = 8;
  d.d_state = 4;
  MambaBlock<double> block(ps, "b", d, rng);
  auto H = t(10, 8, fixtures::random_values(rng, 80));
  auto y0 = block(H);
  for (int k = 0; k < 10; ++k) {
    auto Hp = H.clone();
    for (int k2 = k + 1; k2 < 10; ++k2)
      for (int c = 0; c < 8; ++c) Hp.at(k2, c) = uniform_real(rng, -3, 3);
    auto y1 = block(Hp);
    for (int k2 = 0; k2 <= k; ++k2)
      for (int c = 0; c < 8; ++c) ASSERT_EQ(y1.at(k2, c), y0.at(k2, c));
  }
}

TEST(Mamba, GradCheck) {
  for (std::uint64_t seed : {1u, 2u}) {
    auto r = fixtures::mamba_block_grad_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
  }
}

TEST(Mamba, AdditiveGateVariant) {
  Rng rng(0);
  nn::ParamStore<double> ps;
  MambaDims d;
  d.d_model = 8;
  d.additive_gate = true;
  MambaBlock<double> block(ps, "b", d, rng);
  auto H = t(3, 8, fixtures::random_values(rng, 24));
  auto y = block(H);
  for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, ShapesForSingleRows) {
  Policy<double> pol(PolicyConfig{}, 1);
  auto [ho, hm] = pol.dme_encode(TensorD::zeros(1, kOpFeatures), TensorD::zeros(1, kMachineFeatures));
  EXPECT_EQ(ho.shape(), (std::vector<int>{1, 128}));
  EXPECT_EQ(hm.shape(), (std::vector<int>{1, 128}));
}

TEST(Encoder, BranchesAreIndependent) {
  Policy<double> pol(small_config(), 2);
  Rng rng(4);
  auto ops = t(6, kOpFeatures, fixtures::random_values(rng, 6 * kOpFeatures));
  auto ms = t(3, kMachineFeatures, fixtures::random_values(rng, 3 * kMachineFeatures));
  auto [ho, hm] = pol.dme_encode(ops, ms);
  auto [ho2, hm2] = pol.dme_encode(t(6, kOpFeatures, fixtures::random_values(rng, 6 * kOpFeatures)), ms);
  auto [ho3, hm3] = pol.dme_encode(ops, t(3, kMachineFeatures, fixtures::random_values(rng, 3 * kMachineFeatures)));
  EXPECT_EQ(hm.values(), hm2.values());
  EXPECT_EQ(ho.values(), ho3.values());
}

TEST(Decoder, AttentionShapesNeverOpByOp) {
  Policy<double> pol(small_config(), 3);
  Rng rng(5);
  auto ho = t(7, 16, fixtures::random_values(rng, 7 * 16));
  auto hm = t(3, 16, fixtures::random_values(rng, 3 * 16));
  DecodeProbe<double> probe;
  auto [ho2, hm2] = pol.cross_attention_decode(ho, hm, &probe);
  EXPECT_EQ(ho2.shape(), (std::vector<int>{7, 16}));
  EXPECT_EQ(hm2.shape(), (std::vector<int>{3, 16}));
  ASSERT_EQ(probe.trace.score_shapes.size(), 8u);  // 4 heads per layer
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(probe.trace.score_shapes[i], (std::pair{3, 7}));
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(probe.trace.score_shapes[i], (std::pair{7, 3}));
}

TEST(Decoder, SingleMachineGetsFullWeight) {
  Policy<double> pol(small_config(), 3);
  Rng rng(6);
  DecodeProbe<double> probe;
  pol.cross_attention_decode(t(5, 16, fixtures::random_values(rng, 80)), t(1, 16, fixtures::random_values(rng, 16)),
                             &probe);
  ASSERT_EQ(probe.op_attention.size(), 4u);
  for (const auto& w : probe.op_attention) {
    EXPECT_EQ(w.shape(), (std::vector<int>{5, 1}));
    for (double v : w.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  }
}

TEST(Pool, NonzeroAveraging) {
  auto h = t(3, 2, {1, 2, 3, 4, 100, 100});
  EXPECT_EQ(Policy<double>::pool_nonzero(h, {1, 0, 0}).values(), (std::vector<double>{1, 2}));
  EXPECT_EQ(Policy<double>::pool_nonzero(h, {1, 1, 0}).values(), (std::vector<double>{2, 3}));
  EXPECT_THROW(Policy<double>::pool_nonzero(h, {0, 0, 0}), std::invalid_argument);
}

TEST(Pool, DoneOperationDoesNotMove) {
  // Adding a finished job (all its rows inactive) must not change the pooled vector.
  auto h = t(2, 2, {1, 5, 3, -1});
  auto a = Policy<double>::pool_nonzero(h, {1, 1});
  auto b = Policy<double>::pool_nonzero(t(3, 2, {1, 5, 3, -1, 9, 9}), {1, 1, 0});
  EXPECT_EQ(a.values(), b.values());
}

TEST(Forward, SingletonActionHasProbabilityOne) {
  auto inst = fixtures::tiny();
  Policy<double> pol(small_config(), 7);
  auto out = pol.forward(SimState(inst).features());
  ASSERT_EQ(out.probs.size(), 1u);
  EXPECT_EQ(out.probs.at(0, 0), 1.0);
  EXPECT_EQ(out.value.shape(), (std::vector<int>{1, 1}));
}

TEST(Forward, ValidDistributionOnRandomStates) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto inst = generate_instance(fixtures::spec(5, 3, seed));
    Policy<double> pol(small_config(), seed);
    SimState s(inst);
    Rng rng(seed);
    while (!s.finished()) {
      auto fb = s.features();
      auto out = pol.forward(fb);
      ASSERT_EQ(out.probs.cols(), fb.n_pairs());
      double sum = 0;
      for (double p : out.probs.values()) {
        ASSERT_GE(p, 0.0);
        sum += p;
      }
      ASSERT_NEAR(sum, 1.0, 1e-12);
      for (int i = 0; i < fb.n_pairs(); ++i) ASSERT_NEAR(std::exp(out.log_probs.at(0, i)), out.probs.at(0, i), 1e-12);
      s.step(fb.pairs[static_cast<std::size_t>(uniform_int(rng, 0, fb.n_pairs() - 1))]);
    }
  }
}

TEST(Forward, CandidateOrderEquivariance) {
  auto inst = generate_instance(fixtures::spec(6, 4, 3));
  auto fb = midway_bundle(inst, 3);
  ASSERT_GE(fb.n_pairs(), 3);
  Policy<double> pol(small_config(), 9);
  auto base = pol.forward(fb);

  const int P = fb.n_pairs();
  std::vector<int> perm(P);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[P / 2]);
  FeatureBundle pf = fb;
  for (int i = 0; i < P; ++i) {
    pf.pairs[i] = fb.pairs[perm[i]];
    pf.pair_op[i] = fb.pair_op[perm[i]];
    for (int c = 0; c < kPairFeatures; ++c) pf.pair_features[i * kPairFeatures + c] = fb.pair_features[perm[i] * kPairFeatures + c];
  }
  auto permuted = pol.forward(pf);
  for (int i = 0; i < P; ++i) EXPECT_NEAR(permuted.probs.at(0, i), base.probs.at(0, perm[i]), 1e-14);
  EXPECT_NEAR(permuted.value.item(), base.value.item(), 1e-14);
}

TEST(Forward, EmptyActionSetThrows) {
  auto inst = fixtures::tiny();
  SimState s(inst);
  auto fb = s.features();
  s.step({0, 0, 0});
  Policy<double> pol(small_config(), 1);
  EXPECT_THROW(pol.forward(s.features()), ContractViolation);
}

TEST(Forward, AblationVariants) {
  auto inst = generate_instance(fixtures::spec(4, 3, 1));
  auto fb = midway_bundle(inst, 2);
  for (int mask = 0; mask < 4; ++mask) {
    auto cfg = small_config();
    cfg.use_encoder = mask & 1;
    cfg.use_decoder = mask & 2;
    Policy<double> pol(cfg, 5);
    auto out = pol.forward(fb);
    double sum = 0;
    for (double p : out.probs.values()) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(pol.params().contains("encoder.op.0.A_log"), cfg.use_encoder);
    EXPECT_EQ(pol.params().contains("decoder.machine.mha.wq"), cfg.use_decoder);
  }
  auto two = small_config();
  two.mamba_layers = 2;
  Policy<double> deep(two, 5);
  EXPECT_TRUE(deep.params().contains("encoder.machine.1.A_log"));
}

TEST(Forward, CandidateWidth) {
  EXPECT_EQ(PolicyConfig{}.candidate_width(), 520);
  auto cfg = small_config();
  EXPECT_EQ(cfg.candidate_width(), 4 * 16 + 8);
}

TEST(Forward, FullNetworkGradCheck) {
  for (std::uint64_t seed : {1u, 2u}) {
    auto r = fixtures::policy_grad_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst_param << "[" << r.worst_index << "] analytic " << r.analytic
                                     << " numeric " << r.numeric;
    EXPECT_GT(r.coords_checked, 100u);
  }
}

TEST(Config, JsonRoundTripAndValidation) {
  auto cfg = small_config();
  cfg.additive_gate = true;
  cfg.use_decoder = false;
  nlohmann::json j = cfg;
  auto back = j.get<PolicyConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  auto partial = nlohmann::json{{"d_model", 32}}.get<PolicyConfig>();
  EXPECT_EQ(partial.d_model, 32);
  EXPECT_EQ(partial.heads, 8);
  PolicyConfig bad;
  bad.d_model = 100;
  bad.heads = 8;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Checkpoint, SaveLoadReproducesOutputs) {
  auto inst = generate_instance(fixtures::spec(5, 3, 2));
  auto fb = midway_bundle(inst, 4);
  Policy<double> pol(small_config(), 21);
  const auto path = (std::filesystem::temp_directory_path() / "fjsp_policy_rt.ckpt").string();
  pol.save(path);
  auto back = load_policy<double>(path);
  EXPECT_EQ(back->forward(fb).probs.values(), pol.forward(fb).probs.values());

  Policy<float> pf(small_config(), 21);
  pf.save(path);
  auto bf = load_policy<float>(path);
  EXPECT_EQ(bf->forward(fb).probs.values(), pf.forward(fb).probs.values());
}

TEST(Select, GreedyAndSample) {
  Rng rng(0);
  EXPECT_EQ(select_action(std::vector<double>{1.0}, Strategy::Greedy, rng), 0);
  EXPECT_EQ(select_action(std::vector<double>{1.0}, Strategy::Sample, rng), 0);
  EXPECT_EQ(select_action(std::vector<double>{0.2, 0.5, 0.3}, Strategy::Greedy, rng), 1);
  EXPECT_EQ(select_action(std::vector<double>{0.4, 0.2, 0.4}, Strategy::Greedy, rng), 0);
}

TEST(Select, SampleFrequency) {
  Rng rng(12345);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += select_action(std::vector<double>{0.25, 0.75}, Strategy::Sample, rng);
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.75, 0.01);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(select_action(std::vector<double>{0.1, 0.3, 0.6}, Strategy::Sample, a),
              select_action(std::vector<double>{0.1, 0.3, 0.6}, Strategy::Sample, b));
}

TEST(Select, StrategyNames) {
  EXPECT_EQ(strategy_from_string("greedy"), Strategy::Greedy);
  EXPECT_EQ(strategy_from_string(to_string(Strategy::Sample)), Strategy::Sample);
  EXPECT_THROW(strategy_from_string("beam"), std::invalid_argument);
}
