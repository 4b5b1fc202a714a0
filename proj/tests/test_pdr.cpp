#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>

#include "fjsp/pdr/rules.hpp"
#include "test_util.hpp"

using namespace fjsp;

TEST(Rules, NamesRoundTrip) {
  for (Rule r : kAllRules) EXPECT_EQ(rule_from_string(to_string(r)), r);
  EXPECT_EQ(rule_from_string("fifo"), Rule::FIFO);
  EXPECT_EQ(rule_from_string("MWKR"), Rule::MWKR);
  EXPECT_FALSE(rule_from_string("lpt").has_value());
}

TEST(Select, SinglePairForEveryRule) {
  auto inst = fixtures::tiny();
  SimState s(inst);
  for (Rule r : kAllRules) EXPECT_EQ(pdr_select(r, s), (PairAction{0, 0, 0}));
}

TEST(Select, EmptyEligibleSetThrows) {
  auto inst = fixtures::tiny();
  SimState s(inst);
  s.step({0, 0, 0});
  for (Rule r : kAllRules) EXPECT_THROW(pdr_select(r, s), ContractViolation);
}

TEST(Select, SptPicksShorterPair) {
  auto inst = fixtures::two_jobs_one_machine(4, 3);
  SimState s(inst);
  EXPECT_EQ(pdr_select(Rule::SPT, s), (PairAction{1, 0, 0}));
  auto sched = run_pdr(inst, Rule::SPT);
  EXPECT_EQ(sched.makespan, 7);
  EXPECT_EQ(sched.ops.front().job, 1);
  EXPECT_EQ(sched.ops.front().start, 0);
}

TEST(Select, MorPrefersJobWithMoreRemainingOps) {
  // Job 0 has one op, job 1 has three; both first ops compete for m0.
  auto inst = parse_instance("2 1\n1 1 1 2\n3 1 1 4 1 1 4 1 1 4\n");
  SimState s(inst);
  EXPECT_EQ(pdr_select(Rule::MOR, s), (PairAction{1, 0, 0}));
  EXPECT_EQ(pdr_select(Rule::MWKR, s), (PairAction{1, 0, 0}));
  EXPECT_EQ(pdr_select(Rule::SPT, s), (PairAction{0, 0, 0}));
}

TEST(Select, MorMachineIsShortestThenLowestIndex) {
  auto inst = parse_instance("1 3\n1 3 1 5 2 2 3 2\n");
  SimState s(inst);
  EXPECT_EQ(pdr_select(Rule::MOR, s), (PairAction{0, 0, 1}));
  EXPECT_EQ(pdr_select(Rule::MWKR, s), (PairAction{0, 0, 1}));
}

TEST(Select, FifoPrefersEarlierReadyOp) {
  // m0 runs job 0 op 0 [0,2); job 1 occupies m1 for [0,9). At t=2 job 0's op 1
  // is ready (ready 2) and job 2's op 0 has waited since 0 for m0.
  auto inst = parse_instance("3 2\n2 1 1 2 1 1 1\n1 1 2 9\n1 1 1 3\n");
  SimState s(inst);
  s.step({0, 0, 0});
  s.step({1, 0, 1});
  ASSERT_EQ(s.clock(), 2);
  ASSERT_EQ(s.eligible_actions(), (std::vector<PairAction>{{0, 1, 0}, {2, 0, 0}}));
  EXPECT_EQ(pdr_select(Rule::FIFO, s), (PairAction{2, 0, 0}));
}

TEST(Select, TiesFollowJobOrder) {
  auto inst = fixtures::two_jobs_one_machine(4, 4);
  SimState s(inst);
  for (Rule r : kAllRules) EXPECT_EQ(pdr_select(r, s), (PairAction{0, 0, 0})) << to_string(r);
}

TEST(Select, AgreesWithBruteForceKeys) {
  // Straight re-evaluation of each rule's ordering over the eligible set.
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto inst = generate_instance(fixtures::spec(6, 4, seed));
    for (Rule rule : kAllRules) {
      SimState s(inst);
      while (!s.finished()) {
        const auto pairs = s.eligible_actions();
        std::vector<std::tuple<double, double, int>> keys;
        for (std::size_t a = 0; a < pairs.size(); ++a) {
          const auto& pa = pairs[a];
          const int f = inst.flat_index(pa.job, pa.op);
          const double p = static_cast<double>(inst.op(f).time_on(pa.machine));
          double rest = 0;
          for (int j = pa.op; j < inst.job_size(pa.job); ++j) rest += inst.op(pa.job, j).mean_time();
          switch (rule) {
            case Rule::FIFO:
              keys.emplace_back(s.ready_time(f), s.machine_free_time(pa.machine), static_cast<int>(a));
              break;
            case Rule::MOR:
              keys.emplace_back(-(inst.job_size(pa.job) - pa.op - 1), p, static_cast<int>(a));
              break;
            case Rule::SPT:
              keys.emplace_back(p, 0, static_cast<int>(a));
              break;
            case Rule::MWKR:
              keys.emplace_back(-rest, p, static_cast<int>(a));
              break;
          }
        }
        const auto best = *std::min_element(keys.begin(), keys.end());
        const auto chosen = pdr_select(rule, s);
        ASSERT_EQ(chosen, pairs[static_cast<std::size_t>(std::get<2>(best))]) << to_string(rule) << " seed " << seed;
        s.step(chosen);
      }
    }
  }
}

TEST(RunPdr, TinyMakespanFive) {
  for (Rule r : kAllRules) EXPECT_EQ(run_pdr(fixtures::tiny(), r).makespan, 5);
}

TEST(RunPdr, ValidAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto inst = generate_instance(fixtures::spec(4 + static_cast<int>(seed % 10), 3 + static_cast<int>(seed % 5), seed));
    for (Rule r : kAllRules) {
      auto a = run_pdr(inst, r);
      EXPECT_TRUE(validate_schedule(inst, a).empty()) << to_string(r) << " seed " << seed;
      EXPECT_EQ(a, run_pdr(inst, r));
    }
  }
}
