#pragma once

// JSON and text renderings of simulation results. The analysis report joins
// a configured run with the all-unbounded run that supplies minimum
// latencies and optimal depths.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/engine.hpp"

namespace lsim {

inline constexpr int kReportFormatVersion = 1;

namespace detail {

inline json opt_json(const std::optional<Cycle>& v) { return v ? json(*v) : json(nullptr); }

inline json axi_port_config_to_json(const AxiPortConfig& c) {
  json j = json::object();
  if (c.latency) j["latency"] = *c.latency;
  j["read_overhead"] = c.read_overhead;
  j["writeresp_overhead"] = c.writeresp_overhead;
  j["max_burst_len"] = c.max_burst_len;
  return j;
}

inline AxiPortConfig axi_port_config_from_json(const json& j, const AxiPortConfig& base) {
  AxiPortConfig c = base;
  if (j.contains("latency")) c.latency = j.at("latency").get<std::int64_t>();
  c.read_overhead = j.value("read_overhead", c.read_overhead);
  c.writeresp_overhead = j.value("writeresp_overhead", c.writeresp_overhead);
  c.max_burst_len = j.value("max_burst_len", c.max_burst_len);
  if ((c.latency && *c.latency < 0) || c.read_overhead < 0 || c.writeresp_overhead < 0 || c.max_burst_len == 0)
    throw ParseError("config", 0, "axi timing values must be non-negative and max_burst_len positive");
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SimConfig
// ---------------------------------------------------------------------------

inline json to_json(const SimConfig& c) {
  json j;
  j["fifo_visibility_latency"] = c.fifo_visibility_latency;
  json depths = json::object();
  for (const auto& [id, d] : c.fifo_depths) depths[std::to_string(id)] = to_json_value(d);
  j["fifo_depths"] = depths;
  json axi = json::object();
  axi["default"] = detail::axi_port_config_to_json(c.axi_default);
  json ports = json::object();
  for (const auto& [id, p] : c.axi_ports) ports[std::to_string(id)] = detail::axi_port_config_to_json(p);
  axi["ports"] = ports;
  j["axi"] = axi;
  return j;
}

inline int parse_id_key(const std::string& key, const std::string& source) {
  std::size_t pos = 0;
  int id = 0;
  try {
    id = std::stoi(key, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != key.size()) throw ParseError(source, 0, "expected an integer id key, got '" + key + "'");
  return id;
}

inline SimConfig config_from_json(const json& j, const std::string& source = "config") {
  if (!j.is_object()) throw ParseError(source, 0, "config must be a JSON object");
  SimConfig c;
  try {
    c.fifo_visibility_latency = j.value("fifo_visibility_latency", 1);
    if (c.fifo_visibility_latency != 0 && c.fifo_visibility_latency != 1)
      throw ParseError(source, 0, "fifo_visibility_latency must be 0 or 1");
    if (j.contains("fifo_depths")) {
      for (const auto& [key, val] : j.at("fifo_depths").items()) {
        auto d = depth_from_json(val);
        if (!d) throw ParseError(source, 0, "fifo " + key + ": depth must be an integer >= 1 or \"unbounded\"");
        c.fifo_depths[parse_id_key(key, source)] = *d;
      }
    }
    if (j.contains("axi")) {
      const json& a = j.at("axi");
      if (a.contains("default")) c.axi_default = detail::axi_port_config_from_json(a.at("default"), c.axi_default);
      if (a.contains("ports"))
        for (const auto& [key, val] : a.at("ports").items())
          c.axi_ports[parse_id_key(key, source)] = detail::axi_port_config_from_json(val, c.axi_default);
    }
  } catch (const json::exception& e) {
    throw ParseError(source, 0, e.what());
  }
  return c;
}

inline SimConfig parse_config(std::string_view text, const std::string& source = "config") {
  return config_from_json(parse_json_text(text, source), source);
}

inline SimConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.string());
}

/// Rejects overrides naming FIFOs or ports the design does not declare.
inline void check_config(const SimConfig& c, const Design& d) {
  std::vector<std::string> errs;
  for (const auto& [id, _] : c.fifo_depths)
    if (!d.fifo(id)) errs.push_back("config sets depth of undeclared fifo " + std::to_string(id));
  for (const auto& [id, _] : c.axi_ports)
    if (!d.axi_port(id)) errs.push_back("config sets timing of undeclared axi port " + std::to_string(id));
  if (!errs.empty()) throw ValidationError(errs);
}

// ---------------------------------------------------------------------------
// SimReport
// ---------------------------------------------------------------------------

inline json to_json(const DeadlockDiagnosis& d) {
  json blocked = json::array();
  for (const auto& b : d.blocked)
    blocked.push_back({{"call", b.call}, {"function", b.function}, {"event", b.event}, {"resource", b.resource},
                       {"stage", b.stage}, {"cycle", b.cycle}});
  json edges = json::array();
  for (const auto& e : d.edges) edges.push_back({{"from", e.from}, {"resource", e.resource}, {"to", e.to}});
  return {{"blocked", blocked}, {"edges", edges}, {"cycle", d.cycle}};
}

inline json to_json(const SimReport& r) {
  json calls = json::array();
  for (const auto& c : r.calls)
    calls.push_back({{"call", c.call}, {"function", c.function}, {"parent", c.parent},
                     {"start", detail::opt_json(c.start)}, {"end", detail::opt_json(c.end)},
                     {"latency", detail::opt_json(c.latency())}});
  json fifos = json::array();
  for (const auto& f : r.fifos)
    fifos.push_back({{"id", f.id}, {"name", f.name}, {"depth", to_json_value(f.depth)}, {"observed", f.observed},
                     {"writes", f.writes}, {"reads", f.reads}});
  return {{"total_latency", detail::opt_json(r.total_latency)},
          {"calls", calls},
          {"fifos", fifos},
          {"deadlock", r.deadlock ? to_json(*r.deadlock) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Analysis report
// ---------------------------------------------------------------------------

struct AnalysisReport {
  SimReport run;              // under the active config
  OptimalDepths optimal;      // from the all-unbounded run
};

namespace detail {

inline json call_node(const AnalysisReport& a, int call, const std::vector<std::vector<int>>& children) {
  const CallTiming& t = a.run.calls[call];
  const CallTiming& u = a.optimal.unbounded.calls[call];
  json kids = json::array();
  for (int c : children[call]) kids.push_back(call_node(a, c, children));
  return {{"call", t.call},         {"function", t.function},      {"start", opt_json(t.start)},
          {"end", opt_json(t.end)}, {"latency", opt_json(t.latency())}, {"min_latency", opt_json(u.latency())},
          {"children", kids}};
}

inline std::vector<std::vector<int>> children_of(const SimReport& r) {
  std::vector<std::vector<int>> ch(r.calls.size());
  for (const auto& c : r.calls)
    if (c.parent >= 0) ch[c.parent].push_back(c.call);
  return ch;
}

}  // namespace detail

inline json to_json(const AnalysisReport& a) {
  json fifos = json::array();
  for (const auto& f : a.run.fifos)
    fifos.push_back({{"id", f.id},
                     {"name", f.name},
                     {"depth", to_json_value(f.depth)},
                     {"observed", f.observed},
                     {"optimal", to_json_value(a.optimal.depths.at(f.id))}});
  json j;
  j["format_version"] = kReportFormatVersion;
  j["total_latency"] = detail::opt_json(a.run.total_latency);
  j["min_latency"] = detail::opt_json(a.optimal.min_latency);
  j["deadlock"] = a.run.deadlock ? to_json(*a.run.deadlock) : json(nullptr);
  j["call_tree"] = a.run.calls.empty() ? json(nullptr) : detail::call_node(a, 0, detail::children_of(a.run));
  j["fifos"] = fifos;
  return j;
}

/// Canonical text of a report; the CLI writes it and the server serves it.
inline std::string serialize_report(const AnalysisReport& a) { return to_json(a).dump(2) + "\n"; }

inline json fifo_table_json(const AnalysisReport& a) { return to_json(a).at("fifos"); }

namespace detail {

inline std::string cycles_text(const std::optional<Cycle>& v) { return v ? std::to_string(*v) : "-"; }

inline void tree_lines(const AnalysisReport& a, int call, const std::vector<std::vector<int>>& ch, int depth,
                       std::ostringstream& os) {
  const CallTiming& t = a.run.calls[call];
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << t.function << " [" << t.call
     << "]  latency " << cycles_text(t.latency()) << "  min " << cycles_text(a.optimal.unbounded.calls[call].latency())
     << "  cycles " << cycles_text(t.start) << ".." << cycles_text(t.end) << "\n";
  for (int c : ch[call]) tree_lines(a, c, ch, depth + 1, os);
}

}  // namespace detail

inline std::string latency_tree_text(const AnalysisReport& a) {
  std::ostringstream os;
  os << "total latency: " << detail::cycles_text(a.run.total_latency) << " cycles\n";
  os << "minimum latency: " << detail::cycles_text(a.optimal.min_latency) << " cycles\n";
  if (!a.run.calls.empty()) detail::tree_lines(a, 0, detail::children_of(a.run), 0, os);
  if (a.run.deadlock) {
    os << "DEADLOCK\n";
    for (const auto& b : a.run.deadlock->blocked)
      os << "  " << b.function << " [" << b.call << "] blocked on " << b.event << " " << b.resource << " at stage "
         << b.stage << "\n";
    for (const auto& e : a.run.deadlock->edges)
      os << "  [" << e.from << "] -> " << e.resource << " -> [" << e.to << "]\n";
  }
  return os.str();
}

inline std::string fifo_table_text(const AnalysisReport& a) {
  std::ostringstream os;
  os << "id\tname\tdepth\tobserved\toptimal\n";
  for (const auto& f : a.run.fifos)
    os << f.id << "\t" << f.name << "\t" << f.depth.str() << "\t" << f.observed << "\t"
       << a.optimal.depths.at(f.id).str() << "\n";
  return os.str();
}

}  // namespace lsim
