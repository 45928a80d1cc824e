#pragma once

// Design description: per-function static schedules, pipeline and dataflow
// metadata, FIFO and AXI declarations. Loaded from the JSON format
// documented in docs/formats.md.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lsim/error.hpp"

namespace lsim {

using json = nlohmann::json;

inline constexpr int kDesignFormatVersion = 1;

enum class IoKind {
  FifoRead,
  FifoWrite,
  AxiReadReq,
  AxiRead,
  AxiWriteReq,
  AxiWrite,
  AxiWriteResp,
  SubCall,
};

inline std::string_view to_string(IoKind k) {
  switch (k) {
    case IoKind::FifoRead: return "fifo_read";
    case IoKind::FifoWrite: return "fifo_write";
    case IoKind::AxiReadReq: return "axi_readreq";
    case IoKind::AxiRead: return "axi_read";
    case IoKind::AxiWriteReq: return "axi_writereq";
    case IoKind::AxiWrite: return "axi_write";
    case IoKind::AxiWriteResp: return "axi_writeresp";
    case IoKind::SubCall: return "subcall";
  }
  return "?";
}

inline std::optional<IoKind> io_kind_from_string(std::string_view s) {
  for (IoKind k : {IoKind::FifoRead, IoKind::FifoWrite, IoKind::AxiReadReq, IoKind::AxiRead,
                   IoKind::AxiWriteReq, IoKind::AxiWrite, IoKind::AxiWriteResp, IoKind::SubCall}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline bool is_fifo(IoKind k) { return k == IoKind::FifoRead || k == IoKind::FifoWrite; }
inline bool is_axi(IoKind k) { return !is_fifo(k) && k != IoKind::SubCall; }

/// FIFO capacity: a positive bound, or unbounded.
class FifoDepth {
 public:
  constexpr FifoDepth() = default;
  static constexpr FifoDepth unbounded() { return FifoDepth{}; }
  static constexpr FifoDepth bounded(std::int64_t n) { return FifoDepth{n}; }

  constexpr bool is_unbounded() const { return !value_.has_value(); }
  constexpr std::int64_t value() const { return *value_; }

  /// Pointwise order used by depth-lattice checks; unbounded is the top.
  constexpr bool operator<=(const FifoDepth& o) const {
    if (o.is_unbounded()) return true;
    if (is_unbounded()) return false;
    return value() <= o.value();
  }
  friend constexpr bool operator==(const FifoDepth&, const FifoDepth&) = default;

  std::string str() const { return is_unbounded() ? "unbounded" : std::to_string(value()); }

 private:
  constexpr explicit FifoDepth(std::int64_t n) : value_(n) {}
  std::optional<std::int64_t> value_;
};

inline json to_json_value(const FifoDepth& d) {
  return d.is_unbounded() ? json("unbounded") : json(d.value());
}

/// Accepts a positive integer or the string "unbounded"; nullopt otherwise.
inline std::optional<FifoDepth> depth_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "unbounded") return FifoDepth::unbounded();
  if (j.is_number_integer()) {
    auto n = j.get<std::int64_t>();
    if (n >= 1) return FifoDepth::bounded(n);
  }
  return std::nullopt;
}

struct InstrStage {
  int id = 0;
  int stage = 1;
  /// Last stage the instruction occupies; differs from `stage` only for
  /// multi-stage sub-calls.
  int end_stage = 1;
  friend bool operator==(const InstrStage&, const InstrStage&) = default;
};

struct IoOp {
  int instr = 0;
  IoKind kind = IoKind::FifoRead;
  int resource = -1;   // fifo id or axi port id
  std::string callee;  // SubCall only
  friend bool operator==(const IoOp&, const IoOp&) = default;
};

struct BasicBlockSched {
  int id = 0;
  int static_start = 1;
  int terminator_stage = 1;
  std::optional<int> explicit_span;
  std::vector<InstrStage> instrs;
  std::vector<IoOp> io;

  int static_end() const { return terminator_stage; }

  /// The block starts at a later stage than its terminator (loop-rotated
  /// schedules); its stages wrap.
  bool out_of_order() const { return static_start > terminator_stage; }

  int span() const {
    if (explicit_span) return *explicit_span;
    if (!out_of_order()) return terminator_stage - static_start + 1;
    std::set<int> stages{terminator_stage, static_start};
    for (const auto& in : instrs) {
      stages.insert(in.stage);
      stages.insert(in.end_stage);
    }
    return static_cast<int>(stages.size());
  }

  const InstrStage* instr(int instr_id) const {
    for (const auto& in : instrs)
      if (in.id == instr_id) return &in;
    return nullptr;
  }

  friend bool operator==(const BasicBlockSched&, const BasicBlockSched&) = default;
};

struct PipelineRegion {
  std::vector<int> blocks;
  int ii = 1;
  friend bool operator==(const PipelineRegion&, const PipelineRegion&) = default;
};

struct DataflowProcess {
  int id = 0;
  int instr = 0;  // the sub-call instruction that launches this process
  std::vector<int> scalar_inputs;
  std::vector<int> channel_inputs;
  bool scalar_outputs = false;  // every output is a scalar
  bool has_outputs = true;
  friend bool operator==(const DataflowProcess&, const DataflowProcess&) = default;
};

struct DataflowRegion {
  std::vector<DataflowProcess> processes;
  friend bool operator==(const DataflowRegion&, const DataflowRegion&) = default;
};

struct FunctionSchedule {
  std::string name;
  std::vector<BasicBlockSched> blocks;
  std::vector<PipelineRegion> pipelines;
  std::optional<DataflowRegion> dataflow;

  /// Index of the pipeline region containing `bb`, or -1.
  int pipeline_of(int bb) const {
    for (std::size_t i = 0; i < pipelines.size(); ++i) {
      const auto& b = pipelines[i].blocks;
      if (std::find(b.begin(), b.end(), bb) != b.end()) return static_cast<int>(i);
    }
    return -1;
  }

  friend bool operator==(const FunctionSchedule&, const FunctionSchedule&) = default;
};

struct FifoDecl {
  int id = 0;
  std::string name;
  FifoDepth default_depth = FifoDepth::bounded(2);
  friend bool operator==(const FifoDecl&, const FifoDecl&) = default;
};

struct AxiPortDecl {
  int id = 0;
  std::string name;
  int beat_bytes = 4;
  int latency = 1;
  friend bool operator==(const AxiPortDecl&, const AxiPortDecl&) = default;
};

struct Design {
  int format_version = kDesignFormatVersion;
  std::string top;
  std::map<std::string, FunctionSchedule> functions;
  std::vector<FifoDecl> fifos;
  std::vector<AxiPortDecl> axi_ports;

  const FunctionSchedule* function(std::string_view name) const {
    auto it = functions.find(std::string(name));
    return it == functions.end() ? nullptr : &it->second;
  }
  const FifoDecl* fifo(int id) const {
    for (const auto& f : fifos)
      if (f.id == id) return &f;
    return nullptr;
  }
  const AxiPortDecl* axi_port(int id) const {
    for (const auto& p : axi_ports)
      if (p.id == id) return &p;
    return nullptr;
  }

  friend bool operator==(const Design&, const Design&) = default;
};

inline bool valid_beat_bytes(int b) {
  return b >= 1 && b <= 128 && (b & (b - 1)) == 0;
}

/// Every invariant violation in `d`, one message each; empty when valid.
inline std::vector<std::string> validate(const Design& d) {
  std::vector<std::string> out;
  auto fail = [&](std::string s) { out.push_back(std::move(s)); };

  if (d.format_version != kDesignFormatVersion)
    fail("format_version " + std::to_string(d.format_version) + " is not supported");
  if (d.function(d.top) == nullptr) fail("top function '" + d.top + "' is not defined");

  std::set<int> fifo_ids;
  for (const auto& f : d.fifos) {
    if (!fifo_ids.insert(f.id).second) fail("duplicate fifo id " + std::to_string(f.id));
    if (f.id < 0) fail("fifo id " + std::to_string(f.id) + " is negative");
    if (!f.default_depth.is_unbounded() && f.default_depth.value() < 1)
      fail("fifo " + std::to_string(f.id) + " depth must be >= 1");
  }
  std::set<int> port_ids;
  for (const auto& p : d.axi_ports) {
    if (!port_ids.insert(p.id).second) fail("duplicate axi port id " + std::to_string(p.id));
    if (!valid_beat_bytes(p.beat_bytes))
      fail("axi port " + std::to_string(p.id) + " beat_bytes " + std::to_string(p.beat_bytes) +
           " is not a power of two in [1,128]");
    if (p.latency < 1) fail("axi port " + std::to_string(p.id) + " latency must be >= 1");
  }

  for (const auto& [name, fn] : d.functions) {
    const std::string where_fn = "function " + name;
    if (fn.name != name) fail(where_fn + ": name field '" + fn.name + "' does not match key");
    if (fn.blocks.empty()) fail(where_fn + ": has no blocks");

    std::set<int> instr_ids;
    std::map<int, const IoOp*> subcalls;  // instr id -> op
    for (std::size_t i = 0; i < fn.blocks.size(); ++i) {
      const auto& bb = fn.blocks[i];
      const std::string where = where_fn + " block " + std::to_string(bb.id);
      if (bb.id != static_cast<int>(i))
        fail(where_fn + ": block ids must be dense; position " + std::to_string(i) + " has id " +
             std::to_string(bb.id));
      if (bb.terminator_stage < 1) fail(where + ": terminator stage must be >= 1");
      if (bb.static_start < 1) fail(where + ": static start must be >= 1");
      if (bb.span() < 1) fail(where + ": span must be >= 1");
      for (const auto& in : bb.instrs) {
        if (!instr_ids.insert(in.id).second)
          fail(where + ": duplicate instr id " + std::to_string(in.id));
        if (in.stage < 1) fail(where + " instr " + std::to_string(in.id) + ": stage must be >= 1");
        if (in.end_stage < in.stage && !bb.out_of_order())
          fail(where + " instr " + std::to_string(in.id) + ": end stage precedes stage");
      }
      for (const auto& op : bb.io) {
        const std::string wi = where + " instr " + std::to_string(op.instr);
        if (bb.instr(op.instr) == nullptr) fail(wi + ": io op has no instr stage entry");
        if (is_fifo(op.kind) && d.fifo(op.resource) == nullptr)
          fail(wi + ": " + std::string(to_string(op.kind)) + " references undeclared fifo " +
               std::to_string(op.resource));
        if (is_axi(op.kind) && d.axi_port(op.resource) == nullptr)
          fail(wi + ": " + std::string(to_string(op.kind)) + " references undeclared axi port " +
               std::to_string(op.resource));
        if (op.kind == IoKind::SubCall) {
          if (d.function(op.callee) == nullptr)
            fail(wi + ": sub-call targets undefined function '" + op.callee + "'");
          subcalls[op.instr] = &op;
        }
      }
    }

    std::set<int> in_pipeline;
    for (const auto& p : fn.pipelines) {
      if (p.ii < 1) fail(where_fn + ": pipeline ii must be >= 1");
      if (p.blocks.empty()) fail(where_fn + ": pipeline region has no blocks");
      for (int b : p.blocks) {
        if (b < 0 || b >= static_cast<int>(fn.blocks.size()))
          fail(where_fn + ": pipeline references missing block " + std::to_string(b));
        if (!in_pipeline.insert(b).second)
          fail(where_fn + ": block " + std::to_string(b) + " belongs to more than one pipeline");
      }
    }

    if (fn.dataflow) {
      std::set<int> pids;
      for (const auto& p : fn.dataflow->processes) pids.insert(p.id);
      if (pids.size() != fn.dataflow->processes.size()) fail(where_fn + ": duplicate dataflow process id");
      std::set<int> used_instrs;
      for (const auto& p : fn.dataflow->processes) {
        const std::string wp = where_fn + " process " + std::to_string(p.id);
        if (!subcalls.count(p.instr)) fail(wp + ": instr " + std::to_string(p.instr) + " is not a sub-call");
        if (!used_instrs.insert(p.instr).second) fail(wp + ": instr shared with another process");
        for (const auto* inputs : {&p.scalar_inputs, &p.channel_inputs}) {
          for (int q : *inputs) {
            if (q == p.id) fail(wp + ": depends on itself");
            else if (!pids.count(q)) fail(wp + ": input from unknown process " + std::to_string(q));
          }
        }
      }
    }
  }
  return out;
}

namespace detail {

inline json block_to_json(const BasicBlockSched& bb) {
  json j;
  j["id"] = bb.id;
  j["start"] = bb.static_start;
  j["terminator"] = bb.terminator_stage;
  if (bb.explicit_span) j["span"] = *bb.explicit_span;
  j["instrs"] = json::array();
  for (const auto& in : bb.instrs) {
    json ji{{"id", in.id}, {"stage", in.stage}};
    if (in.end_stage != in.stage) ji["end"] = in.end_stage;
    j["instrs"].push_back(ji);
  }
  j["io"] = json::array();
  for (const auto& op : bb.io) {
    json jo{{"instr", op.instr}, {"kind", to_string(op.kind)}};
    if (op.kind == IoKind::SubCall) jo["callee"] = op.callee;
    else jo["resource"] = op.resource;
    j["io"].push_back(jo);
  }
  return j;
}

inline BasicBlockSched block_from_json(const json& j) {
  BasicBlockSched bb;
  bb.id = j.at("id").get<int>();
  bb.terminator_stage = j.at("terminator").get<int>();
  for (const auto& ji : j.value("instrs", json::array())) {
    InstrStage in;
    in.id = ji.at("id").get<int>();
    in.stage = ji.at("stage").get<int>();
    in.end_stage = ji.value("end", in.stage);
    bb.instrs.push_back(in);
  }
  if (j.contains("start")) {
    bb.static_start = j.at("start").get<int>();
  } else {
    // Without an explicit start the block begins at its earliest stage.
    bb.static_start = bb.terminator_stage;
    for (const auto& in : bb.instrs) bb.static_start = std::min(bb.static_start, in.stage);
  }
  if (j.contains("span")) bb.explicit_span = j.at("span").get<int>();
  for (const auto& jo : j.value("io", json::array())) {
    IoOp op;
    op.instr = jo.at("instr").get<int>();
    auto kind_s = jo.at("kind").get<std::string>();
    auto kind = io_kind_from_string(kind_s);
    if (!kind) throw json::other_error::create(501, "unknown io kind '" + kind_s + "'", &jo);
    op.kind = *kind;
    if (op.kind == IoKind::SubCall) op.callee = jo.at("callee").get<std::string>();
    else op.resource = jo.at("resource").get<int>();
    bb.io.push_back(op);
  }
  return bb;
}

}  // namespace detail

inline json to_json(const Design& d) {
  json j;
  j["format_version"] = d.format_version;
  j["top"] = d.top;
  j["fifos"] = json::array();
  for (const auto& f : d.fifos)
    j["fifos"].push_back({{"id", f.id}, {"name", f.name}, {"depth", to_json_value(f.default_depth)}});
  j["axi_ports"] = json::array();
  for (const auto& p : d.axi_ports)
    j["axi_ports"].push_back(
        {{"id", p.id}, {"name", p.name}, {"beat_bytes", p.beat_bytes}, {"latency", p.latency}});
  j["functions"] = json::object();
  for (const auto& [name, fn] : d.functions) {
    json jf;
    jf["blocks"] = json::array();
    for (const auto& bb : fn.blocks) jf["blocks"].push_back(detail::block_to_json(bb));
    if (!fn.pipelines.empty()) {
      jf["pipelines"] = json::array();
      for (const auto& p : fn.pipelines) jf["pipelines"].push_back({{"blocks", p.blocks}, {"ii", p.ii}});
    }
    if (fn.dataflow) {
      json procs = json::array();
      for (const auto& p : fn.dataflow->processes)
        procs.push_back({{"id", p.id},
                         {"instr", p.instr},
                         {"scalar_inputs", p.scalar_inputs},
                         {"channel_inputs", p.channel_inputs},
                         {"scalar_outputs", p.scalar_outputs},
                         {"has_outputs", p.has_outputs}});
      jf["dataflow"] = {{"processes", procs}};
    }
    j["functions"][name] = jf;
  }
  return j;
}

/// Builds a Design from parsed JSON without validating it.
inline Design design_from_json_unchecked(const json& j, const std::string& source = {}) {
  try {
    Design d;
    d.format_version = j.at("format_version").get<int>();
    d.top = j.at("top").get<std::string>();
    for (const auto& jf : j.value("fifos", json::array())) {
      FifoDecl f;
      f.id = jf.at("id").get<int>();
      f.name = jf.value("name", "fifo" + std::to_string(f.id));
      if (jf.contains("depth")) {
        auto depth = depth_from_json(jf.at("depth"));
        if (!depth) throw ParseError(source, 0, "fifo " + std::to_string(f.id) + ": depth must be >= 1 or \"unbounded\"");
        f.default_depth = *depth;
      }
      d.fifos.push_back(f);
    }
    for (const auto& jp : j.value("axi_ports", json::array())) {
      AxiPortDecl p;
      p.id = jp.at("id").get<int>();
      p.name = jp.value("name", "axi" + std::to_string(p.id));
      p.beat_bytes = jp.at("beat_bytes").get<int>();
      p.latency = jp.at("latency").get<int>();
      d.axi_ports.push_back(p);
    }
    for (const auto& [name, jf] : j.at("functions").items()) {
      FunctionSchedule fn;
      fn.name = name;
      for (const auto& jb : jf.at("blocks")) fn.blocks.push_back(detail::block_from_json(jb));
      for (const auto& jp : jf.value("pipelines", json::array()))
        fn.pipelines.push_back({jp.at("blocks").get<std::vector<int>>(), jp.at("ii").get<int>()});
      if (jf.contains("dataflow")) {
        DataflowRegion df;
        for (const auto& jp : jf.at("dataflow").at("processes")) {
          DataflowProcess p;
          p.id = jp.at("id").get<int>();
          p.instr = jp.at("instr").get<int>();
          p.scalar_inputs = jp.value("scalar_inputs", std::vector<int>{});
          p.channel_inputs = jp.value("channel_inputs", std::vector<int>{});
          p.scalar_outputs = jp.value("scalar_outputs", false);
          p.has_outputs = jp.value("has_outputs", true);
          df.processes.push_back(std::move(p));
        }
        fn.dataflow = std::move(df);
      }
      d.functions.emplace(name, std::move(fn));
    }
    return d;
  } catch (const json::exception& e) {
    throw ParseError(source, 0, std::string("malformed design: ") + e.what());
  }
}

inline Design design_from_json(const json& j, const std::string& source = {}) {
  Design d = design_from_json_unchecked(j, source);
  if (auto v = validate(d); !v.empty()) throw ValidationError(std::move(v));
  return d;
}

inline json parse_json_text(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(source, line, e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Design parse_design(std::string_view text, const std::string& source = {}) {
  return design_from_json(parse_json_text(text, source), source);
}

inline Design load_design(const std::filesystem::path& path) {
  return parse_design(read_text_file(path), path.string());
}

inline std::string serialize_design(const Design& d) { return to_json(d).dump(2) + "\n"; }

}  // namespace lsim
