#pragma once

// One analysis of one design: load, run stage 1 (or take a recorded trace),
// build the call tree, resolve schedules, simulate. The resolved schedules
// are kept so depth edits only rerun the stall calculation.

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/engine.hpp"
#include "lsim/mini_ir.hpp"
#include "lsim/report.hpp"
#include "lsim/resolver.hpp"
#include "lsim/trace.hpp"

namespace lsim {

enum class PipelineStage { Idle, Loading, Executing, Parsing, Resolving, Simulating, Done, Error };

inline std::string_view to_string(PipelineStage s) {
  switch (s) {
    case PipelineStage::Idle: return "idle";
    case PipelineStage::Loading: return "loading";
    case PipelineStage::Executing: return "executing";
    case PipelineStage::Parsing: return "parsing";
    case PipelineStage::Resolving: return "resolving";
    case PipelineStage::Simulating: return "simulating";
    case PipelineStage::Done: return "done";
    case PipelineStage::Error: return "error";
  }
  return "?";
}

struct PipelineCounters {
  int execute_runs = 0;
  int parse_runs = 0;
  int resolve_runs = 0;
  int simulate_runs = 0;
  friend bool operator==(const PipelineCounters&, const PipelineCounters&) = default;
};

struct PipelineStatus {
  PipelineStage stage = PipelineStage::Idle;
  std::vector<std::pair<PipelineStage, double>> timings;  // seconds, in completion order
  std::string error;
  PipelineCounters counters;
};

inline json to_json(const PipelineStatus& s) {
  json t = json::object();
  for (const auto& [stage, sec] : s.timings) t[std::string(to_string(stage))] = sec;
  return {{"format_version", kReportFormatVersion},
          {"stage", to_string(s.stage)},
          {"timings", t},
          {"error", s.error.empty() ? json(nullptr) : json(s.error)},
          {"counters",
           {{"execute_runs", s.counters.execute_runs},
            {"parse_runs", s.counters.parse_runs},
            {"resolve_runs", s.counters.resolve_runs},
            {"simulate_runs", s.counters.simulate_runs}}}};
}

/// Either a program to execute or the text of a recorded trace.
struct TraceSource {
  std::optional<MiniProgram> program;
  std::optional<std::string> trace_text;
  std::string trace_name = "trace";
};

struct SessionPaths {
  std::filesystem::path design;
  std::filesystem::path program;  // one of program / trace
  std::filesystem::path trace;
  std::filesystem::path config;   // optional
};

class Session {
 public:
  Session() = default;
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Loads the files and runs the whole pipeline. Throws on failure after
  /// recording the error in the status.
  void run(const SessionPaths& paths) {
    guarded([&] {
      Design design;
      TraceSource src;
      SimConfig config;
      timed(PipelineStage::Loading, [&] {
        design = load_design(paths.design);
        if (!paths.program.empty() == !paths.trace.empty())
          throw Error("exactly one of a program or a trace is required");
        if (!paths.program.empty()) src.program = load_program(paths.program);
        else {
          src.trace_text = read_text_file(paths.trace);
          src.trace_name = paths.trace.string();
        }
        if (!paths.config.empty()) config = load_config(paths.config);
      });
      analyze_unguarded(std::move(design), std::move(src), std::move(config));
    });
  }

  void analyze(Design design, TraceSource src, SimConfig config) {
    guarded([&] { analyze_unguarded(std::move(design), std::move(src), std::move(config)); });
  }

  /// Applies depth overrides on top of the current ones and recomputes
  /// stalls only. Returns the new report.
  AnalysisReport apply_depths(const std::map<int, FifoDepth>& depths) {
    SimConfig cfg;
    {
      std::lock_guard lock(mu_);
      if (status_.stage != PipelineStage::Done) throw Error("analysis has not finished");
      cfg = config_;
    }
    for (const auto& [id, d] : depths) {
      if (!design_.fifo(id)) throw SimError("unknown fifo " + std::to_string(id));
      cfg.fifo_depths[id] = d;
    }
    SimReport run = simulate(cache_.schedules, design_, cfg);
    std::lock_guard lock(mu_);
    ++status_.counters.simulate_runs;
    config_ = cfg;
    report_->run = std::move(run);
    return *report_;
  }

  PipelineStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  bool done() const { return status().stage == PipelineStage::Done; }

  /// Valid once done().
  AnalysisReport report() const {
    std::lock_guard lock(mu_);
    if (!report_) throw Error("no report available");
    return *report_;
  }

  SimConfig config() const {
    std::lock_guard lock(mu_);
    return config_;
  }

  const Design& design() const { return design_; }
  const StallCache& cache() const { return cache_; }
  const FlatTrace& trace() const { return trace_; }

 private:
  template <class F>
  void guarded(F&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      status_.stage = PipelineStage::Error;
      status_.error = e.what();
      throw;
    }
  }

  template <class F>
  void timed(PipelineStage stage, F&& f) {
    {
      std::lock_guard lock(mu_);
      status_.stage = stage;
    }
    auto t0 = std::chrono::steady_clock::now();
    f();
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard lock(mu_);
    status_.timings.emplace_back(stage, sec);
  }

  void bump(int PipelineCounters::*field) {
    std::lock_guard lock(mu_);
    ++(status_.counters.*field);
  }

  void analyze_unguarded(Design design, TraceSource src, SimConfig config) {
    design_ = std::move(design);
    if (auto v = validate(design_); !v.empty()) throw ValidationError(std::move(v));
    check_config(config, design_);
    if (src.program) {
      timed(PipelineStage::Executing, [&] {
        trace_ = execute(*src.program, design_, src.program->entry_args);
        bump(&PipelineCounters::execute_runs);
      });
    }
    CallTree tree;
    timed(PipelineStage::Parsing, [&] {
      if (src.trace_text) trace_ = parse_flat_trace(*src.trace_text, src.trace_name);
      tree = build_call_tree(trace_, design_);
      bump(&PipelineCounters::parse_runs);
    });
    timed(PipelineStage::Resolving, [&] {
      cache_.schedules = resolve_all(tree, design_);
      bump(&PipelineCounters::resolve_runs);
    });
    cache_.design = &design_;
    cache_.config = config;
    AnalysisReport rep;
    timed(PipelineStage::Simulating, [&] {
      rep.run = simulate(cache_.schedules, design_, config);
      rep.optimal = compute_optimal_depths(cache_);
      std::lock_guard lock(mu_);
      status_.counters.simulate_runs += 2;
    });
    std::lock_guard lock(mu_);
    config_ = std::move(config);
    report_ = std::move(rep);
    status_.stage = PipelineStage::Done;
  }

  mutable std::mutex mu_;
  PipelineStatus status_;
  Design design_;
  FlatTrace trace_;
  StallCache cache_;
  SimConfig config_;
  std::optional<AnalysisReport> report_;
};

}  // namespace lsim
