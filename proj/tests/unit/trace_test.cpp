#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace lsim;

TEST(TraceText, RoundTripsEveryEntryKind) {
  const std::string text =
      "call_enter f\ntrace_bb f 0\nfifo_read 1\nfifo_write 2\naxi_readreq 0 64 4\naxi_read 0\n"
      "axi_writereq 0 128 2\naxi_write 0\naxi_writeresp 0\ncall_exit f\n";
  FlatTrace t = parse_flat_trace(text, "t");
  ASSERT_EQ(t.entries.size(), 10u);
  EXPECT_EQ(t.entries[4].addr, 64u);
  EXPECT_EQ(t.entries[4].len, 4u);
  std::ostringstream os;
  write_flat_trace(os, t);
  EXPECT_EQ(os.str(), text);
}

TEST(TraceText, BlankLinesKeepLineNumbers) {
  FlatTrace t = parse_flat_trace("call_enter f\n\ntrace_bb f 0\ncall_exit f\n");
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(t.entries[1].line, 3u);
}

TEST(TraceText, MalformedLinesReportLine) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_flat_trace(text, "x");
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("call_enter f\ntrace_bb f\n"), 2u);
  EXPECT_EQ(line_of("call_enter f\nfifo_read x\n"), 2u);
  EXPECT_EQ(line_of("call_enter f\nwiggle 3\n"), 2u);
  EXPECT_EQ(line_of("call_enter f\ncall_exit g\n"), 2u);
  EXPECT_EQ(line_of("call_enter f\ntrace_bb f 0\n"), 1u);  // never closed
  EXPECT_EQ(line_of("call_exit f\n"), 1u);
}

TEST(CallTree, OooKernelHierarchyAndFlattenRoundTrip) {
  Design d = testutil::fixture_design("ooo_kernel");
  FlatTrace flat = load_flat_trace(testutil::fixture("ooo_kernel", "trace.txt"));
  CallTree tree = build_call_tree(flat, d);
  ASSERT_EQ(tree.calls.size(), 4u);
  EXPECT_EQ(tree.calls[0].function, "df");
  EXPECT_EQ(tree.calls[2].function, "ooo_kernel");
  EXPECT_EQ(tree.calls[3].parent, 2);
  std::vector<int> bbs;
  for (const auto& b : tree.calls[2].blocks) bbs.push_back(b.bb);
  EXPECT_EQ(bbs, (std::vector<int>{0, 1, 3, 0, 2, 3}));
  ASSERT_EQ(tree.calls[2].blocks[4].events.size(), 1u);
  EXPECT_EQ(tree.calls[2].blocks[4].events[0].child, 3);
  EXPECT_EQ(flatten(tree), flat);
}

TEST(CallTree, RejectsInconsistentTraces) {
  Design d = testutil::fixture_design("ooo_kernel");
  auto reject = [&](const std::string& text, const std::string& needle) {
    try {
      build_call_tree(parse_flat_trace(text), d);
    } catch (const TraceError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
      return;
    }
    ADD_FAILURE() << "accepted: " << text;
  };
  reject("", "no top-level call");
  reject("call_enter src\ntrace_bb src 0\ncall_exit src\n", "top");
  reject("call_enter df\ntrace_bb df 7\ncall_exit df\n", "7");
  reject("call_enter df\nfifo_read 0\ncall_exit df\n", "outside any block");
  reject("call_enter df\ntrace_bb src 0\ncall_exit df\n", "src");
  reject("call_enter df\ncall_exit df\n", "no blocks");
  reject("call_enter df\ntrace_bb df 0\ncall_exit df\ncall_enter df\ntrace_bb df 0\ncall_exit df\n", "top-level");
  reject("call_enter nope\ntrace_bb nope 0\ncall_exit nope\n", "nope");
}
