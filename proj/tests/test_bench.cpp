#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>

#include "fjsp/bench/benchmark.hpp"
#include "fjsp/bench/gantt.hpp"
#include "grad_cases.hpp"
#include "test_util.hpp"

using namespace fjsp;
using namespace fjsp::bench;
using policy::Policy;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "fjsp_test_bench" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Rect {
  double x, width;
  int job, op, machine;
  Time start, end;
};

std::vector<Rect> parse_rects(const std::string& svg) {
  static const std::regex re(
      "<rect x=\"([-0-9.e]+)\" y=\"[-0-9.e]+\" width=\"([-0-9.e]+)\"[^>]*data-job=\"(\\d+)\" data-op=\"(\\d+)\" "
      "data-machine=\"(\\d+)\" data-start=\"(\\d+)\" data-end=\"(\\d+)\"");
  std::vector<Rect> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.push_back({std::stod(m[1]), std::stod(m[2]), std::stoi(m[3]), std::stoi(m[4]), std::stoi(m[5]),
                   std::stoll(m[6]), std::stoll(m[7])});
  }
  return out;
}

}  // namespace

TEST(Gap, Values) {
  EXPECT_DOUBLE_EQ(gap(100, 100), 0.0);
  EXPECT_NEAR(gap(110, 100), 10.0, 1e-12);
  EXPECT_NEAR(gap(233, 200), 16.5, 1e-12);
  EXPECT_LT(gap(90, 100), 0.0);
  EXPECT_THROW(gap(10, 0), std::invalid_argument);
  EXPECT_THROW(gap(10, -3), std::invalid_argument);
}

TEST(Sampling, SingleTrajectoryIsOneRollout) {
  Policy<double> pol(fixtures::toy_policy_config(), 1);
  const auto inst = generate_instance(fixtures::spec(5, 3, 2));
  auto best = evaluate_sampling(pol, inst, 1, 17);
  Rng rng(derive_seed(17, 0));
  auto one = train::rollout(pol, inst, policy::Strategy::Sample, rng, false);
  EXPECT_EQ(best.schedule, one.schedule);
  EXPECT_THROW(evaluate_sampling(pol, inst, 0, 17), std::invalid_argument);
}

TEST(Sampling, BestIsMinimumOverTrajectories) {
  Policy<double> pol(fixtures::toy_policy_config(), 2);
  const auto inst = generate_instance(fixtures::spec(6, 4, 3));
  const int n = 12;
  Time lo = std::numeric_limits<Time>::max();
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(5, static_cast<std::uint64_t>(i)));
    lo = std::min(lo, train::rollout(pol, inst, policy::Strategy::Sample, rng, false).makespan);
  }
  auto best = evaluate_sampling(pol, inst, n, 5);
  EXPECT_EQ(best.makespan, lo);
  EXPECT_TRUE(validate_schedule(inst, best.schedule).empty());
}

TEST(Sampling, BestOfHundredBeatsSingleSampleOnAverage) {
  Policy<double> pol(fixtures::toy_policy_config(), 3);
  double single = 0, best = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = generate_instance(fixtures::spec(6, 4, 100 + s));
    single += static_cast<double>(evaluate_sampling(pol, inst, 1, s).makespan);
    best += static_cast<double>(evaluate_sampling(pol, inst, 100, s).makespan);
  }
  EXPECT_LE(best, single);
}

TEST(BestKnown, ReadsWithHeaderAndLooksUpByStem) {
  auto dir = fresh_dir("bk");
  write_file(dir / "bk.csv", "name,makespan\nMk01,40\n# comment\n\nMk02.fjs , 26\r\n");
  auto table = read_best_known((dir / "bk.csv").string());
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(lookup_best_known(table, "x/Mk01.fjs"), 40.0);
  EXPECT_EQ(lookup_best_known(table, "Mk02.fjs"), 26.0);
  EXPECT_FALSE(lookup_best_known(table, "Mk03.fjs").has_value());
  write_file(dir / "bad.csv", "Mk01,40\nMk02,abc\n");
  EXPECT_THROW(read_best_known((dir / "bad.csv").string()), std::runtime_error);
  EXPECT_THROW(read_best_known((dir / "missing.csv").string()), std::runtime_error);
}

TEST(RunBenchmark, TinySuiteWithFifo) {
  auto dir = fresh_dir("tiny");
  write_file(dir / "tiny.fjs", "1 1 1\n1 1 1 5\n");
  write_file(dir / "notes.md", "ignored\n");
  auto rep = run_benchmark(dir.string(), pdr_solver(Rule::FIFO), {{"tiny", 5.0}});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].name, "tiny");
  EXPECT_EQ(rep.rows[0].makespan, 5);
  ASSERT_TRUE(rep.rows[0].gap_percent.has_value());
  EXPECT_EQ(*rep.rows[0].gap_percent, 0.0);
  EXPECT_EQ(rep.rows[0].solver, "fifo");
  EXPECT_TRUE(rep.rows[0].error.empty());
}

TEST(RunBenchmark, BadFilesAreReportedAndSuiteContinues) {
  auto dir = fresh_dir("mixed");
  write_file(dir / "a_good.fjs", write_instance(generate_instance(fixtures::spec(4, 3, 1))));
  write_file(dir / "b_bad.fjs", "2 2\n1 1 1\n");
  write_file(dir / "c_good.fjs", "1 1 1\n1 1 1 5\n");
  auto rep = run_benchmark(dir.string(), pdr_solver(Rule::SPT));
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_TRUE(rep.rows[0].error.empty());
  EXPECT_FALSE(rep.rows[1].error.empty());
  EXPECT_EQ(rep.rows[2].makespan, 5);
  EXPECT_EQ(rep.solved().size(), 2u);
  EXPECT_NE(report_table(rep).find("b_bad: "), std::string::npos);
  EXPECT_THROW(run_benchmark((dir / "nope").string(), pdr_solver(Rule::SPT)), std::runtime_error);
}

TEST(RunBenchmark, MeanGapIsMeanOfPerInstanceGaps) {
  auto dir = fresh_dir("gaps");
  std::map<std::string, double> bk;
  for (int i = 0; i < 4; ++i) {
    const auto name = "g" + std::to_string(i);
    write_file(dir / (name + ".fjs"), write_instance(generate_instance(fixtures::spec(5, 3, 40 + i))));
    if (i != 2) bk[name] = 20.0 + i;
  }
  auto rep = run_benchmark(dir.string(), pdr_solver(Rule::MWKR), bk);
  double total = 0;
  int n = 0;
  for (const auto& r : rep.rows) {
    if (r.name == "g2") {
      EXPECT_FALSE(r.gap_percent.has_value());
      continue;
    }
    total += (static_cast<double>(r.makespan) / bk[r.name] - 1) * 100;
    ++n;
  }
  ASSERT_TRUE(rep.mean_gap().has_value());
  EXPECT_NEAR(*rep.mean_gap(), total / n, 1e-9);
}

TEST(RunBenchmark, PolicyReportsAreRepeatable) {
  auto dir = fresh_dir("policy");
  for (int i = 0; i < 3; ++i)
    write_file(dir / ("p" + std::to_string(i) + ".fjs"), write_instance(generate_instance(fixtures::spec(5, 3, 70 + i))));
  Policy<double> pol(fixtures::toy_policy_config(), 4);
  for (auto strategy : {policy::Strategy::Greedy, policy::Strategy::Sample}) {
    auto a = run_benchmark(dir.string(), policy_solver(pol, strategy, 8, 3));
    auto b = run_benchmark(dir.string(), policy_solver(pol, strategy, 8, 3));
    EXPECT_EQ(report_csv(a, false), report_csv(b, false));
    EXPECT_EQ(a.rows[0].strategy, policy::to_string(strategy));
  }
}

TEST(Report, CsvAndTableLayout) {
  BenchReport rep;
  rep.rows.push_back({"Mk01", "FIFO", "greedy", 44, 10.0, 0.5, 0, 0.5, ""});
  rep.rows.push_back({"Mk02", "FIFO", "greedy", 0, std::nullopt, 0, 0, 0, "parse error, line 2"});
  const auto csv = report_csv(rep, false);
  EXPECT_EQ(csv,
            "name,solver,strategy,makespan,gap_percent,error\n"
            "Mk01,FIFO,greedy,44,10.0000,\n"
            "Mk02,FIFO,greedy,,,parse error; line 2\n");
  EXPECT_NE(report_csv(rep).find("wall_time_s"), std::string::npos);
  const auto table = report_table(rep, false);
  EXPECT_NE(table.find("mean makespan 44.00, mean gap 10.00%"), std::string::npos);
  EXPECT_EQ(table.find("time"), std::string::npos);
}

TEST(Gantt, OneRectPerOperationWithFaithfulGeometry) {
  const auto inst = generate_instance(fixtures::spec(6, 4, 8));
  const auto sched = run_pdr(inst, Rule::MOR);
  GanttStyle st;
  const auto svg = gantt_svg(sched, inst, st);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  const auto rects = parse_rects(svg);
  ASSERT_EQ(static_cast<int>(rects.size()), inst.total_ops());
  const double sx = st.width / static_cast<double>(sched.makespan);
  for (const auto& r : rects) {
    EXPECT_NEAR(r.x, st.margin + static_cast<double>(r.start) * sx, 1e-3);
    EXPECT_NEAR(r.width, static_cast<double>(r.end - r.start) * sx, 1e-3);
    const auto& op = inst.op(r.job, r.op);
    EXPECT_EQ(r.end - r.start, op.time_on(r.machine));
  }
  for (std::size_t a = 0; a < rects.size(); ++a) {
    for (std::size_t b = a + 1; b < rects.size(); ++b) {
      if (rects[a].machine != rects[b].machine) continue;
      EXPECT_TRUE(rects[a].end <= rects[b].start || rects[b].end <= rects[a].start);
    }
  }
}
