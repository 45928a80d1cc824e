#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace lsim;

namespace {

SessionPaths paths(const std::string& name, bool program = true) {
  SessionPaths p;
  p.design = testutil::fixture(name, "design.json");
  if (program) p.program = testutil::fixture(name, "program.json");
  else p.trace = testutil::fixture(name, "trace.txt");
  p.config = testutil::fixture(name, "config.json");
  return p;
}

}  // namespace

TEST(Session, StagesAndCounters) {
  Session s;
  EXPECT_EQ(s.status().stage, PipelineStage::Idle);
  s.run(paths("producer_burst"));
  PipelineStatus st = s.status();
  EXPECT_EQ(st.stage, PipelineStage::Done);
  std::vector<PipelineStage> order;
  for (const auto& [stage, sec] : st.timings) {
    order.push_back(stage);
    EXPECT_GE(sec, 0.0);
  }
  EXPECT_EQ(order, (std::vector<PipelineStage>{PipelineStage::Loading, PipelineStage::Executing,
                                               PipelineStage::Parsing, PipelineStage::Resolving,
                                               PipelineStage::Simulating}));
  EXPECT_EQ(st.counters, (PipelineCounters{1, 1, 1, 2}));
}

TEST(Session, DepthEditsOnlyResimulate) {
  Session s;
  s.run(paths("producer_burst"));
  for (int d = 1; d <= 4; ++d) s.apply_depths({{0, FifoDepth::bounded(d)}});
  PipelineCounters c = s.status().counters;
  EXPECT_EQ(c.execute_runs, 1);
  EXPECT_EQ(c.parse_runs, 1);
  EXPECT_EQ(c.resolve_runs, 1);
  EXPECT_EQ(c.simulate_runs, 2 + 4);
  EXPECT_EQ(s.config().fifo_depths.at(0), FifoDepth::bounded(4));
}

TEST(Session, TraceAndProgramInputsAgree) {
  Session a, b;
  a.run(paths("sync_pipeline", true));
  b.run(paths("sync_pipeline", false));
  EXPECT_EQ(serialize_report(a.report()), serialize_report(b.report()));
  EXPECT_EQ(b.status().counters.execute_runs, 0);
}

TEST(Session, ErrorsAreRecorded) {
  Session s;
  SessionPaths p = paths("producer_burst");
  p.program = testutil::fixture("axi", "program.json");
  EXPECT_THROW(s.run(p), Error);
  EXPECT_EQ(s.status().stage, PipelineStage::Error);
  EXPECT_FALSE(s.status().error.empty());
  EXPECT_THROW(s.apply_depths({}), Error);
}

TEST(Session, ConfigForUnknownFifoRejected) {
  Session s;
  SimConfig c;
  c.fifo_depths[42] = FifoDepth::bounded(1);
  TraceSource src;
  src.program = load_program(testutil::fixture("producer_burst", "program.json"));
  EXPECT_THROW(s.analyze(testutil::fixture_design("producer_burst"), src, c), ValidationError);
}

TEST(Config, JsonRoundTrip) {
  SimConfig c;
  c.fifo_depths = {{0, FifoDepth::bounded(3)}, {2, FifoDepth::unbounded()}};
  c.fifo_visibility_latency = 0;
  c.axi_default.read_overhead = 4;
  c.axi_ports[1].latency = 9;
  c.axi_ports[1].max_burst_len = 16;
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_THROW(parse_config(R"({"fifo_depths": {"0": 0}})"), ParseError);
  EXPECT_THROW(parse_config(R"({"fifo_depths": {"x": 1}})"), ParseError);
  EXPECT_THROW(parse_config(R"({"fifo_visibility_latency": 3})"), ParseError);
  EXPECT_THROW(parse_config(R"({"axi": {"default": {"max_burst_len": 0}}})"), ParseError);
}

TEST(Report, JsonShape) {
  auto rep = testutil::analyze_fixture("ooo_kernel");
  json j = to_json(rep);
  EXPECT_EQ(j["format_version"], 1);
  EXPECT_EQ(j["total_latency"], 10);
  EXPECT_EQ(j["min_latency"], 10);
  EXPECT_TRUE(j["deadlock"].is_null());
  EXPECT_EQ(j["call_tree"]["function"], "df");
  EXPECT_EQ(j["call_tree"]["children"][1]["function"], "ooo_kernel");
  EXPECT_EQ(j["call_tree"]["children"][1]["children"][0]["latency"], 3);
  EXPECT_EQ(j["fifos"][0]["name"], "in");
  EXPECT_EQ(j["fifos"][0]["depth"], 2);
  EXPECT_TRUE(j["fifos"][0].contains("optimal"));
}

TEST(Report, MinLatencyNeverExceedsLatency) {
  for (const char* name : {"ooo_kernel", "producer_burst", "sync_pipeline", "pipeline", "axi"}) {
    json j = to_json(testutil::analyze_fixture(name));
    std::vector<json> stack{j["call_tree"]};
    while (!stack.empty()) {
      json n = stack.back();
      stack.pop_back();
      EXPECT_LE(n["min_latency"].get<int>(), n["latency"].get<int>()) << name;
      for (const auto& c : n["children"]) stack.push_back(c);
    }
  }
}

TEST(Report, TreeTextNamesDeadlock) {
  std::string text = latency_tree_text(testutil::analyze_fixture("deadlock"));
  EXPECT_NE(text.find("DEADLOCK"), std::string::npos);
  EXPECT_NE(text.find("fifo_write X"), std::string::npos);
  EXPECT_NE(text.find("fifo_read Y"), std::string::npos);
}
