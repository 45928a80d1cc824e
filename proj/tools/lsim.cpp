// Command-line driver: trace, analyze, fifos, serve.

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "lsim/lsim.hpp"
#include "lsim/server.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDeadlock = 2;

struct Inputs {
  std::string design, program, trace, config;

  lsim::SessionPaths paths() const { return {design, program, trace, config}; }
};

void add_inputs(CLI::App* cmd, Inputs& in, bool trace_allowed) {
  cmd->add_option("--design", in.design, "design schedule JSON")->required()->check(CLI::ExistingFile);
  auto* prog = cmd->add_option("--program", in.program, "mini-IR program JSON")->check(CLI::ExistingFile);
  if (trace_allowed) {
    auto* tr = cmd->add_option("--trace", in.trace, "recorded trace file")->check(CLI::ExistingFile);
    prog->excludes(tr);
    cmd->add_option("--config", in.config, "simulation config JSON")->check(CLI::ExistingFile);
  } else {
    prog->required();
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw lsim::Error("cannot write " + path);
  os << text;
  if (!os) throw lsim::Error("write failed: " + path);
}

int run_trace(const Inputs& in, const std::string& out) {
  lsim::Design design = lsim::load_design(in.design);
  lsim::MiniProgram prog = lsim::load_program(in.program);
  lsim::FlatTrace trace = lsim::execute(prog, design, prog.entry_args);
  std::ostringstream os;
  lsim::write_flat_trace(os, trace);
  if (out.empty()) std::cout << os.str();
  else write_file(out, os.str());
  return kExitOk;
}

int run_analyze(const Inputs& in, const std::string& out, const std::string& tree_out) {
  lsim::Session session;
  session.run(in.paths());
  lsim::AnalysisReport rep = session.report();
  const std::string json_text = lsim::serialize_report(rep);
  const std::string tree = lsim::latency_tree_text(rep);
  if (out.empty()) std::cout << json_text;
  else write_file(out, json_text);
  if (!tree_out.empty()) write_file(tree_out, tree);
  (out.empty() ? std::cerr : std::cout) << tree;
  return rep.run.deadlock ? kExitDeadlock : kExitOk;
}

int run_fifos(const Inputs& in) {
  lsim::Session session;
  session.run(in.paths());
  lsim::AnalysisReport rep = session.report();
  std::cout << lsim::fifo_table_text(rep);
  return rep.run.deadlock ? kExitDeadlock : kExitOk;
}

volatile std::sig_atomic_t g_stop = 0;

int run_serve(const Inputs& in, const std::string& host, int port) {
  lsim::Session session;
  lsim::Server server(session);
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  int bound = server.start(host, port);
  std::cerr << "serving on http://" << host << ":" << bound << "\n";
  try {
    session.run(in.paths());
    std::cerr << "analysis done\n";
  } catch (const std::exception& e) {
    std::cerr << "analysis failed: " << e.what() << "\n";
  }
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-based timing simulator for statically scheduled hardware designs"};
  app.require_subcommand(1);

  Inputs trace_in, analyze_in, fifos_in, serve_in;
  std::string trace_out, analyze_out, tree_out, host = "127.0.0.1";
  int port = 8080;

  auto* trace = app.add_subcommand("trace", "execute a program and write its trace");
  add_inputs(trace, trace_in, false);
  trace->add_option("--out", trace_out, "trace output file (default stdout)");

  auto* analyze = app.add_subcommand("analyze", "simulate and write the report");
  add_inputs(analyze, analyze_in, true);
  analyze->add_option("--out", analyze_out, "report JSON output file (default stdout)");
  analyze->add_option("--tree", tree_out, "latency tree text output file");

  auto* fifos = app.add_subcommand("fifos", "print the FIFO depth table");
  add_inputs(fifos, fifos_in, true);

  auto* serve = app.add_subcommand("serve", "serve the analysis over HTTP");
  add_inputs(serve, serve_in, true);
  serve->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    for (auto* cmd : {analyze, fifos, serve}) {
      if (!cmd->parsed()) continue;
      const Inputs& in = cmd == analyze ? analyze_in : cmd == fifos ? fifos_in : serve_in;
      if (in.program.empty() && in.trace.empty()) throw lsim::Error("one of --program or --trace is required");
    }
    if (trace->parsed()) return run_trace(trace_in, trace_out);
    if (analyze->parsed()) return run_analyze(analyze_in, analyze_out, tree_out);
    if (fifos->parsed()) return run_fifos(fifos_in);
    if (serve->parsed()) return run_serve(serve_in, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
