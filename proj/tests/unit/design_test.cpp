#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace lsim;

namespace {

Design tiny() {
  return parse_design(R"({
    "format_version": 1, "top": "f",
    "fifos": [{"id": 0, "name": "q", "depth": 3}],
    "functions": {"f": {"blocks": [
      {"id": 0, "terminator": 2, "instrs": [{"id": 0, "stage": 1}], "io": [{"instr": 0, "kind": "fifo_write", "resource": 0}]}
    ]}}})");
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(FifoDepth, OrderingTreatsUnboundedAsTop) {
  EXPECT_TRUE(FifoDepth::bounded(1) <= FifoDepth::bounded(2));
  EXPECT_FALSE(FifoDepth::bounded(3) <= FifoDepth::bounded(2));
  EXPECT_TRUE(FifoDepth::bounded(9) <= FifoDepth::unbounded());
  EXPECT_FALSE(FifoDepth::unbounded() <= FifoDepth::bounded(9));
  EXPECT_EQ(FifoDepth::unbounded().str(), "unbounded");
}

TEST(FifoDepth, JsonAcceptsPositiveIntOrUnbounded) {
  EXPECT_EQ(depth_from_json(json(4)), FifoDepth::bounded(4));
  EXPECT_EQ(depth_from_json(json("unbounded")), FifoDepth::unbounded());
  EXPECT_FALSE(depth_from_json(json(0)));
  EXPECT_FALSE(depth_from_json(json(-2)));
  EXPECT_FALSE(depth_from_json(json("deep")));
  EXPECT_FALSE(depth_from_json(json(1.5)));
}

TEST(Design, StartDefaultsToEarliestStage) {
  Design d = tiny();
  EXPECT_EQ(d.functions.at("f").blocks[0].static_start, 1);
  EXPECT_EQ(d.functions.at("f").blocks[0].span(), 2);
  EXPECT_EQ(d.fifos[0].default_depth, FifoDepth::bounded(3));
}

TEST(Design, JsonRoundTripIsLossless) {
  for (const char* name : {"ooo_kernel", "producer_burst", "sync_pipeline", "deadlock", "pipeline", "axi"}) {
    Design d = testutil::fixture_design(name);
    Design back = parse_design(serialize_design(d));
    EXPECT_EQ(d, back) << name;
    EXPECT_EQ(serialize_design(back), serialize_design(d)) << name;
  }
}

TEST(Design, OutOfOrderBlockSpanCountsDistinctStages) {
  Design d = testutil::fixture_design("ooo_kernel");
  const auto& bb3 = d.functions.at("ooo_kernel").blocks[2];
  EXPECT_TRUE(bb3.out_of_order());
  EXPECT_EQ(bb3.span(), 2);
  EXPECT_EQ(d.functions.at("ooo_kernel").blocks[1].span(), 2);
  EXPECT_EQ(d.functions.at("ooo_kernel").blocks[0].span(), 1);
}

TEST(Design, ExplicitSpanOverrides) {
  BasicBlockSched bb;
  bb.static_start = 2;
  bb.terminator_stage = 4;
  bb.explicit_span = 7;
  EXPECT_EQ(bb.span(), 7);
}

TEST(Design, ValidationReportsUndeclaredFifo) {
  Design d = tiny();
  d.functions.at("f").blocks[0].io[0].resource = 7;
  auto v = validate(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "function f block 0 instr 0: fifo_write references undeclared fifo 7");
  EXPECT_THROW(design_from_json(to_json(d)), ValidationError);
}

TEST(Design, ValidationCatchesStructuralErrors) {
  Design d = tiny();
  d.top = "missing";
  d.axi_ports.push_back({0, "m", 3, 0});
  d.fifos.push_back({0, "dup", FifoDepth::bounded(1)});
  d.functions.at("f").blocks[0].id = 4;
  d.functions.at("f").pipelines.push_back({{0, 0}, 0});
  auto v = validate(d);
  EXPECT_TRUE(mentions(v, "top function 'missing'"));
  EXPECT_TRUE(mentions(v, "beat_bytes 3"));
  EXPECT_TRUE(mentions(v, "latency must be >= 1"));
  EXPECT_TRUE(mentions(v, "duplicate fifo id 0"));
  EXPECT_TRUE(mentions(v, "block ids must be dense"));
  EXPECT_TRUE(mentions(v, "ii must be >= 1"));
  EXPECT_TRUE(mentions(v, "more than one pipeline"));
}

TEST(Design, ValidationChecksDataflowProcesses) {
  Design d = testutil::fixture_design("producer_burst");
  auto& procs = d.functions.at("top").dataflow->processes;
  procs[1].channel_inputs = {1, 5};
  procs[0].instr = 2;  // the return, not a call
  auto v = validate(d);
  EXPECT_TRUE(mentions(v, "depends on itself"));
  EXPECT_TRUE(mentions(v, "unknown process 5"));
  EXPECT_TRUE(mentions(v, "is not a sub-call"));
}

TEST(Design, ParseErrorsCarryLine) {
  try {
    parse_design("{\n\"format_version\": 1,\n\"top\": ]\n}", "bad.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.source(), "bad.json");
  }
  EXPECT_THROW(parse_design(R"({"format_version": 1, "top": "f"})"), ParseError);
  EXPECT_THROW(parse_design(R"({"format_version": 1, "top": "f", "functions": {"f": {"blocks": [
    {"id": 0, "terminator": 1, "io": [{"instr": 0, "kind": "teleport", "resource": 0}]}]}}})"),
               ParseError);
}

TEST(Design, RejectsBadDepthInDeclaration) {
  EXPECT_THROW(parse_design(R"({"format_version": 1, "top": "f", "fifos": [{"id": 0, "depth": 0}],
    "functions": {"f": {"blocks": [{"id": 0, "terminator": 1}]}}})"),
               ParseError);
}
