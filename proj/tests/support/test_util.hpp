#pragma once

#include <filesystem>
#include <string>

#include "lsim/lsim.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name, const std::string& file) {
  return std::filesystem::path(LSIM_FIXTURES_DIR) / name / file;
}

inline lsim::Design fixture_design(const std::string& name) { return lsim::load_design(fixture(name, "design.json")); }

/// Runs the full pipeline on a fixture directory: trace.txt if there is no
/// program, otherwise the program.
inline lsim::AnalysisReport analyze_fixture(const std::string& name, lsim::SimConfig config = {}) {
  lsim::Session s;
  lsim::TraceSource src;
  if (std::filesystem::exists(fixture(name, "program.json"))) {
    src.program = lsim::load_program(fixture(name, "program.json"));
  } else {
    src.trace_text = lsim::read_text_file(fixture(name, "trace.txt"));
  }
  s.analyze(fixture_design(name), std::move(src), std::move(config));
  return s.report();
}

/// Stage 1 + resolution for an in-memory design/program.
inline std::vector<lsim::DynamicSchedule> schedules_for(const lsim::Design& d, const lsim::MiniProgram& p) {
  auto trace = lsim::execute(p, d, p.entry_args);
  auto tree = lsim::build_call_tree(trace, d);
  return lsim::resolve_all(tree, d);
}

}  // namespace testutil
