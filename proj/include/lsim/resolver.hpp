#pragma once

// Dynamic schedule resolution: maps every traced block instance of a call to
// monotonically increasing dynamic stages, and every event to one stage.

#include <algorithm>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/error.hpp"
#include "lsim/trace.hpp"

namespace lsim {

struct ResolvedBlock {
  int bb = 0;
  int occurrence = 0;  // 0-based count of earlier instances of this bb in the call
  int static_start = 0;
  int static_end = 0;
  int span = 1;
  int dynamic_start = 0;
  int dynamic_end = 0;
  int delay = 0;
  bool new_iteration = false;
  friend bool operator==(const ResolvedBlock&, const ResolvedBlock&) = default;
};

enum class SimEventKind {
  SubcallStart,
  SubcallEnd,
  FifoRead,
  FifoWrite,
  AxiReadReq,
  AxiRead,
  AxiWriteReq,
  AxiWrite,
  AxiWriteResp,
};

inline std::string_view to_string(SimEventKind k) {
  switch (k) {
    case SimEventKind::SubcallStart: return "subcall_start";
    case SimEventKind::SubcallEnd: return "subcall_end";
    case SimEventKind::FifoRead: return "fifo_read";
    case SimEventKind::FifoWrite: return "fifo_write";
    case SimEventKind::AxiReadReq: return "axi_readreq";
    case SimEventKind::AxiRead: return "axi_read";
    case SimEventKind::AxiWriteReq: return "axi_writereq";
    case SimEventKind::AxiWrite: return "axi_write";
    case SimEventKind::AxiWriteResp: return "axi_writeresp";
  }
  return "?";
}

struct SimEvent {
  SimEventKind kind = SimEventKind::FifoRead;
  int stage = 0;
  int resource = -1;  // fifo id / axi port
  std::uint64_t addr = 0;
  std::uint64_t len = 0;
  int child = -1;  // callee call index for sub-call events
  std::size_t line = 0;
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

/// Resolved schedule for one call. `events` are ordered by stage; within a
/// stage, sub-call ends come last and everything else keeps trace order.
struct DynamicSchedule {
  int call = 0;
  std::string function;
  int parent = -1;
  std::vector<ResolvedBlock> blocks;
  std::vector<SimEvent> events;
  int first_stage = 1;
  int last_stage = 1;

  int stage_count() const { return last_stage - first_stage + 1; }
  friend bool operator==(const DynamicSchedule&, const DynamicSchedule&) = default;
};

// ---------------------------------------------------------------------------
// Dataflow regions
// ---------------------------------------------------------------------------

struct ProcessStages {
  int id = 0;
  int start = 0;
  int end = 0;
  friend bool operator==(const ProcessStages&, const ProcessStages&) = default;
};

/// Start and end stages of every process in a dataflow region, in the
/// region's process order.
///
/// Start: 0 without inputs; one after the latest scalar producer when there
/// are scalar inputs; otherwise one after the earliest channel producer.
/// End: the start stage for processes whose outputs are all scalar; for
/// everyone else, the latest start among the non-scalar-output processes.
inline std::vector<ProcessStages> recompute_dataflow_stages(const DataflowRegion& region) {
  const auto& procs = region.processes;
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < procs.size(); ++i) index[procs[i].id] = i;

  std::vector<std::vector<std::size_t>> consumers(procs.size());
  for (std::size_t i = 0; i < procs.size(); ++i) {
    for (const auto* inputs : {&procs[i].scalar_inputs, &procs[i].channel_inputs})
      for (int q : *inputs) {
        auto it = index.find(q);
        if (it == index.end()) throw TraceError("dataflow process " + std::to_string(procs[i].id) + " reads from unknown process " + std::to_string(q));
        consumers[it->second].push_back(i);
      }
  }

  // Finalize processes in nondecreasing start order: a channel-driven
  // process takes the first producer to finalize (the minimum), a
  // scalar-driven one waits for all of its scalar producers (the maximum).
  std::vector<int> start(procs.size(), -1);
  using Item = std::pair<int, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t i = 0; i < procs.size(); ++i)
    if (procs[i].scalar_inputs.empty() && procs[i].channel_inputs.empty()) pq.emplace(0, i);

  while (!pq.empty()) {
    auto [stage, i] = pq.top();
    pq.pop();
    if (start[i] >= 0) continue;
    start[i] = stage;
    for (std::size_t c : consumers[i]) {
      if (start[c] >= 0) continue;
      const auto& p = procs[c];
      if (!p.scalar_inputs.empty()) {
        int latest = -1;
        bool ready = true;
        for (int q : p.scalar_inputs) {
          int s = start[index[q]];
          if (s < 0) ready = false;
          latest = std::max(latest, s);
        }
        if (ready) pq.emplace(latest + 1, c);
      } else {
        pq.emplace(stage + 1, c);
      }
    }
  }

  for (std::size_t i = 0; i < procs.size(); ++i) {
    if (start[i] >= 0) continue;
    // Anything left is either on a scalar cycle or fed only by processes
    // that never start.
    if (!procs[i].scalar_inputs.empty()) {
      // Walk unstarted scalar producers; revisiting a process means a cycle.
      std::vector<int> seen(procs.size(), 0);
      std::size_t cur = i;
      for (;;) {
        if (seen[cur]) throw TraceError("dataflow region has a cyclic scalar dependency through process " + std::to_string(procs[cur].id));
        seen[cur] = 1;
        auto next = procs[cur].scalar_inputs.end();
        for (auto q = procs[cur].scalar_inputs.begin(); q != procs[cur].scalar_inputs.end(); ++q)
          if (start[index[*q]] < 0) {
            next = q;
            break;
          }
        if (next == procs[cur].scalar_inputs.end()) break;
        cur = index[*next];
      }
    }
    throw TraceError("dataflow process " + std::to_string(procs[i].id) + " never starts: its inputs come from processes that never start");
  }

  int region_end = 0;
  for (std::size_t i = 0; i < procs.size(); ++i)
    if (!(procs[i].has_outputs && procs[i].scalar_outputs)) region_end = std::max(region_end, start[i]);

  std::vector<ProcessStages> out;
  for (std::size_t i = 0; i < procs.size(); ++i) {
    bool scalar_only = procs[i].has_outputs && procs[i].scalar_outputs;
    out.push_back({procs[i].id, start[i], scalar_only ? start[i] : region_end});
  }
  return out;
}

/// The function's schedule with dataflow process calls moved to their
/// recomputed stages. Functions without a dataflow region come back unchanged.
inline FunctionSchedule apply_dataflow_stages(const FunctionSchedule& fn) {
  if (!fn.dataflow) return fn;
  FunctionSchedule out = fn;
  auto stages = recompute_dataflow_stages(*fn.dataflow);
  std::map<int, ProcessStages> by_instr;
  for (std::size_t i = 0; i < stages.size(); ++i) by_instr[fn.dataflow->processes[i].instr] = stages[i];

  for (auto& bb : out.blocks) {
    int lo = 0, hi = 0;
    bool any = false;
    for (auto& in : bb.instrs) {
      auto it = by_instr.find(in.id);
      if (it == by_instr.end()) continue;
      in.stage = it->second.start;
      in.end_stage = it->second.end;
      lo = any ? std::min(lo, in.stage) : in.stage;
      hi = any ? std::max(hi, in.end_stage) : in.end_stage;
      any = true;
    }
    if (!any) continue;
    bb.static_start = lo;
    bb.terminator_stage = hi;
    bb.explicit_span.reset();
    for (auto& in : bb.instrs) {
      if (by_instr.count(in.id)) continue;
      in.stage = std::clamp(in.stage, lo, hi);
      in.end_stage = std::clamp(in.end_stage, in.stage, hi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block resolution
// ---------------------------------------------------------------------------

/// True iff the block instance at `position` starts a new loop iteration:
/// its block was already executed in this call and control reached it along
/// a back edge (block ids do not increase).
inline bool detect_new_iteration(const CallTrace& call, const FunctionSchedule&, std::size_t position) {
  if (position == 0 || position >= call.blocks.size()) return false;
  const int bb = call.blocks[position].bb;
  if (bb > call.blocks[position - 1].bb) return false;
  for (std::size_t i = 0; i < position; ++i)
    if (call.blocks[i].bb == bb) return true;
  return false;
}

namespace detail {

/// Dynamic stage of a static stage inside a resolved block instance.
inline int map_stage(const BasicBlockSched& bb, int static_stage, int dyn_start, int dyn_end) {
  int d = (!bb.out_of_order() || static_stage >= bb.static_start)
              ? dyn_start + (static_stage - bb.static_start)
              : dyn_end - (bb.static_end() - static_stage);
  return std::clamp(d, dyn_start, dyn_end);
}

inline SimEventKind sim_kind(EntryKind k) {
  switch (k) {
    case EntryKind::FifoRead: return SimEventKind::FifoRead;
    case EntryKind::FifoWrite: return SimEventKind::FifoWrite;
    case EntryKind::AxiReadReq: return SimEventKind::AxiReadReq;
    case EntryKind::AxiRead: return SimEventKind::AxiRead;
    case EntryKind::AxiWriteReq: return SimEventKind::AxiWriteReq;
    case EntryKind::AxiWrite: return SimEventKind::AxiWrite;
    case EntryKind::AxiWriteResp: return SimEventKind::AxiWriteResp;
    default: return SimEventKind::SubcallStart;
  }
}

}  // namespace detail

/// Algorithm: delay = static_start - prev.static_end; outside pipelines the
/// delay is clamped to <= 1 (gaps are skipped, overlap is kept, but never
/// before the previous block's dynamic start) and a new iteration forces it
/// to 1; inside a
/// pipeline it is left alone and a new iteration adds the II. Leaving a
/// pipeline resets the previous static/dynamic ends to the region maxima.
///
/// `tree` is only needed to name callees when checking sub-call events; it
/// may be null when the call has no sub-calls.
inline DynamicSchedule resolve_call(const CallTrace& call, const FunctionSchedule& sched, const CallTree* tree = nullptr,
                                    int call_index = 0) {
  DynamicSchedule out;
  out.call = call_index;
  out.function = call.function;
  out.parent = call.parent;
  out.blocks.reserve(call.blocks.size());

  std::vector<int> occurrences(sched.blocks.size(), 0);
  int prev_static_end = 0;
  int prev_dynamic_end = 0;
  int prev_dynamic_start = 1;
  int prev_bb = -1;
  int active_region = -1;
  int region_max_static = 0;
  int region_max_dynamic = 0;
  int region_min_dynamic = 1;
  int max_dynamic_end = 0;

  std::vector<SimEvent> events;
  std::size_t event_count = 0;
  for (const auto& inst : call.blocks) event_count += inst.events.size() * 2;
  events.reserve(event_count);

  for (std::size_t pos = 0; pos < call.blocks.size(); ++pos) {
    const BlockInstance& inst = call.blocks[pos];
    if (inst.bb < 0 || inst.bb >= static_cast<int>(sched.blocks.size()))
      throw TraceError("function " + sched.name + " has no block " + std::to_string(inst.bb));
    const BasicBlockSched& bb = sched.blocks[inst.bb];
    const int span = bb.span();
    if (span < 1) throw TraceError("function " + sched.name + " block " + std::to_string(bb.id) + " has non-positive span");

    const int region = sched.pipeline_of(bb.id);
    if (active_region >= 0 && region != active_region) {
      prev_static_end = region_max_static;
      prev_dynamic_end = region_max_dynamic;
      prev_dynamic_start = region_min_dynamic;
      active_region = -1;
    }

    const bool new_iteration = occurrences[bb.id] > 0 && prev_bb >= 0 && bb.id <= prev_bb;
    int delay = bb.static_start - prev_static_end;
    if (region < 0) delay = std::clamp(delay, prev_dynamic_start - prev_dynamic_end, 1);
    if (new_iteration) delay = region < 0 ? 1 : delay + sched.pipelines[region].ii;
    if (pos == 0) delay = 1;  // the first block opens stage 1

    ResolvedBlock rb;
    rb.bb = bb.id;
    rb.occurrence = occurrences[bb.id]++;
    rb.static_start = bb.static_start;
    rb.static_end = bb.static_end();
    rb.span = span;
    rb.delay = delay;
    rb.new_iteration = new_iteration;
    rb.dynamic_start = prev_dynamic_end + delay;
    rb.dynamic_end = rb.dynamic_start + span - 1;

    if (region >= 0) {
      if (active_region != region) {
        active_region = region;
        region_max_static = rb.static_end;
        region_max_dynamic = rb.dynamic_end;
        region_min_dynamic = rb.dynamic_start;
      } else {
        region_max_static = std::max(region_max_static, rb.static_end);
        region_max_dynamic = std::max(region_max_dynamic, rb.dynamic_end);
        region_min_dynamic = std::min(region_min_dynamic, rb.dynamic_start);
      }
    }
    prev_static_end = rb.static_end;
    prev_dynamic_end = rb.dynamic_end;
    prev_dynamic_start = rb.dynamic_start;
    prev_bb = bb.id;
    max_dynamic_end = std::max(max_dynamic_end, rb.dynamic_end);

    // Events pair up with the block's io ops in order.
    if (inst.events.size() != bb.io.size())
      throw TraceError("trace line " + std::to_string(inst.line) + ": inconsistent schedule/event counts: " +
                       sched.name + " block " + std::to_string(bb.id) + " has " + std::to_string(bb.io.size()) +
                       " io op(s) but the trace shows " + std::to_string(inst.events.size()));
    for (std::size_t k = 0; k < inst.events.size(); ++k) {
      const CallEvent& ev = inst.events[k];
      const IoOp& op = bb.io[k];
      auto kind = io_kind_of(ev.kind);
      bool match = kind && *kind == op.kind;
      if (match && op.kind == IoKind::SubCall)
        match = tree == nullptr || tree->calls.at(ev.child).function == op.callee;
      else if (match)
        match = ev.resource == op.resource;
      if (!match)
        throw TraceError("trace line " + std::to_string(ev.line) + ": " + std::string(to_string(ev.kind)) +
                         " does not match io op " + std::to_string(k) + " (" + std::string(to_string(op.kind)) +
                         ") of " + sched.name + " block " + std::to_string(bb.id));
      const InstrStage* in = bb.instr(op.instr);
      const int stage = detail::map_stage(bb, in->stage, rb.dynamic_start, rb.dynamic_end);
      if (op.kind == IoKind::SubCall) {
        const int end = detail::map_stage(bb, in->end_stage, rb.dynamic_start, rb.dynamic_end);
        events.push_back({SimEventKind::SubcallStart, stage, -1, 0, 0, ev.child, ev.line});
        events.push_back({SimEventKind::SubcallEnd, std::max(stage, end), -1, 0, 0, ev.child, ev.line});
      } else {
        events.push_back({detail::sim_kind(ev.kind), stage, ev.resource, ev.addr, ev.len, -1, ev.line});
      }
    }
    out.blocks.push_back(rb);
  }

  // Stable counting sort on (stage, sub-call ends last): linear in events.
  if (!events.empty()) {
    int lo = events.front().stage, hi = lo;
    for (const auto& e : events) {
      lo = std::min(lo, e.stage);
      hi = std::max(hi, e.stage);
    }
    auto bucket = [lo](const SimEvent& e) {
      return static_cast<std::size_t>(e.stage - lo) * 2 + (e.kind == SimEventKind::SubcallEnd ? 1 : 0);
    };
    std::vector<std::size_t> offset(static_cast<std::size_t>(hi - lo + 1) * 2 + 1, 0);
    for (const auto& e : events) ++offset[bucket(e) + 1];
    for (std::size_t i = 1; i < offset.size(); ++i) offset[i] += offset[i - 1];
    out.events.resize(events.size());
    for (const auto& e : events) out.events[offset[bucket(e)]++] = e;
  }

  out.first_stage = out.blocks.empty() ? 1 : out.blocks.front().dynamic_start;
  out.last_stage = out.blocks.empty() ? out.first_stage : max_dynamic_end;
  return out;
}

/// Resolution of a call whose blocks all lie in `region`; identical to
/// resolve_call but rejects blocks outside the region.
inline DynamicSchedule resolve_pipelined(const CallTrace& call, const FunctionSchedule& sched,
                                         const PipelineRegion& region, const CallTree* tree = nullptr,
                                         int call_index = 0) {
  for (const auto& inst : call.blocks)
    if (std::find(region.blocks.begin(), region.blocks.end(), inst.bb) == region.blocks.end())
      throw TraceError("block " + std::to_string(inst.bb) + " of " + sched.name + " is not in the pipeline region");
  return resolve_call(call, sched, tree, call_index);
}

/// Resolves every call of the tree, indexed like tree.calls.
inline std::vector<DynamicSchedule> resolve_all(const CallTree& tree, const Design& design) {
  std::map<std::string, FunctionSchedule> effective;
  for (const auto& [name, fn] : design.functions)
    if (fn.dataflow) effective.emplace(name, apply_dataflow_stages(fn));

  std::vector<DynamicSchedule> out;
  out.reserve(tree.calls.size());
  for (std::size_t i = 0; i < tree.calls.size(); ++i) {
    const CallTrace& c = tree.calls[i];
    auto it = effective.find(c.function);
    const FunctionSchedule* sched = it != effective.end() ? &it->second : design.function(c.function);
    if (sched == nullptr) throw TraceError("unknown function '" + c.function + "'");
    out.push_back(resolve_call(c, *sched, &tree, static_cast<int>(i)));
  }
  return out;
}

}  // namespace lsim
