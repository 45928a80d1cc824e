#include <gtest/gtest.h>

#include <random>

#include "random_design.hpp"
#include "test_util.hpp"

using namespace lsim;

TEST(MiniIr, ProducerConsumerComputesAndTraces) {
  Design d = testutil::fixture_design("producer_burst");
  MiniProgram p = load_program(testutil::fixture("producer_burst", "program.json"));
  ExecResult r = execute_program(p, d, p.entry_args);
  EXPECT_EQ(r.return_value, 60);
  EXPECT_TRUE(r.fifo_leftovers.empty());
  EXPECT_EQ(r.stats.events, 6 + 6);  // 3 writes, 3 reads, 3 call_enter/exit pairs
  EXPECT_EQ(r.trace.entries.front().kind, EntryKind::CallEnter);
  EXPECT_EQ(r.trace.entries.back().kind, EntryKind::CallExit);
  for (std::size_t i = 0; i < r.trace.entries.size(); ++i) EXPECT_EQ(r.trace.entries[i].line, i + 1);
}

TEST(MiniIr, MatchesCommittedFixtureTraces) {
  for (const char* name : {"producer_burst", "sync_pipeline", "deadlock", "pipeline", "axi"}) {
    Design d = testutil::fixture_design(name);
    MiniProgram p = load_program(testutil::fixture(name, "program.json"));
    FlatTrace t = execute(p, d, p.entry_args);
    EXPECT_EQ(t, load_flat_trace(testutil::fixture(name, "trace.txt"))) << name;
  }
}

TEST(MiniIr, LoopTripCountsFollowArguments) {
  Design d = testutil::fixture_design("pipeline");
  MiniProgram p = load_program(testutil::fixture("pipeline", "program.json"));
  for (int n : {1, 3, 8}) {
    ExecResult r = execute_program(p, d, {n});
    int body = 0;
    for (const auto& e : r.trace.entries) body += e.kind == EntryKind::TraceBb && e.bb == 1;
    EXPECT_EQ(body, n);
    EXPECT_EQ(r.return_value, static_cast<std::int64_t>(n) * n);
  }
}

TEST(MiniIr, AxiMemoryIsBeatAddressed) {
  Design d = testutil::fixture_design("axi");
  MiniProgram p = load_program(testutil::fixture("axi", "program.json"));
  ExecResult r = execute_program(p, d, {});
  EXPECT_EQ(r.memory.at(64), 11);
  EXPECT_EQ(r.memory.at(68), 7);
  EXPECT_EQ(r.memory.at(72), 5);
  EXPECT_EQ(r.memory.at(76), 3);
}

TEST(MiniIr, FunctionalUnderflowIsAnError) {
  Design d = testutil::fixture_design("producer_burst");
  MiniProgram p = load_program(testutil::fixture("producer_burst", "program.json"));
  std::swap(p.functions.at("top").blocks[0].ops[0], p.functions.at("top").blocks[0].ops[1]);
  // Call order now disagrees with the schedule's io order too.
  EXPECT_THROW(execute(p, d, {}), ValidationError);
  std::swap(d.functions.at("top").blocks[0].io[0], d.functions.at("top").blocks[0].io[1]);
  EXPECT_THROW(execute(p, d, {}), ExecError);
}

TEST(MiniIr, StepBudgetStopsRunaways) {
  Design d = testutil::fixture_design("pipeline");
  MiniProgram p = load_program(testutil::fixture("pipeline", "program.json"));
  EXPECT_THROW(execute(p, d, {1'000'000}, 1000), ExecError);
}

TEST(MiniIr, AlignmentMismatchIsReported) {
  Design d = testutil::fixture_design("sync_pipeline");
  MiniProgram p = load_program(testutil::fixture("sync_pipeline", "program.json"));
  p.functions.at("stage_c").blocks[0].ops.erase(p.functions.at("stage_c").blocks[0].ops.begin());
  auto v = check_alignment(p, d);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v[0].find("stage_c"), std::string::npos);
}

TEST(MiniIr, ArityIsChecked) {
  Design d = testutil::fixture_design("pipeline");
  MiniProgram p = load_program(testutil::fixture("pipeline", "program.json"));
  EXPECT_THROW(execute(p, d, {}), ExecError);
}

TEST(MiniIr, RandomProgramsRunAndBuildTrees) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    gen::Case c = gen::random_case(rng);
    FlatTrace t = execute(c.program, c.design, {});
    CallTree tree = build_call_tree(t, c.design);
    EXPECT_EQ(flatten(tree), t);
  }
}
