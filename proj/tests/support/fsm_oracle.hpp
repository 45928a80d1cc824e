#pragma once

// Brute-force reference: steps every call's FSM one clock cycle at a time
// with explicit token queues, re-trying all FSMs within a cycle until
// nothing changes. Shares no code with the event-driven engine or the
// resolver; it only reads the design and the flat trace.
//
// Supported subset: in-order blocks, no pipelines, no AXI. Dataflow regions
// may use channel inputs only.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/trace.hpp"

namespace oracle {

using lsim::Design;
using lsim::EntryKind;
using lsim::FifoDepth;
using lsim::FlatTrace;

struct Result {
  bool deadlock = false;
  std::optional<std::int64_t> total_latency;
  std::vector<std::optional<std::int64_t>> call_end;  // pre-order call index
  std::map<int, std::int64_t> observed;               // fifo id -> max occupancy
};

namespace detail {

enum class Ev { Read, Write, Start, End };

struct Event {
  Ev kind;
  int fifo = -1;
  int child = -1;
};

struct Block {
  int bb;
  std::vector<lsim::TraceEntry> items;  // io entries; call_enter carries the child index in `bb`
};

struct Call {
  std::string fn;
  int parent = -1;
  std::vector<Block> blocks;
};

inline std::vector<Call> split_calls(const FlatTrace& t) {
  std::vector<Call> calls;
  std::vector<int> stack;
  for (const auto& e : t.entries) {
    switch (e.kind) {
      case EntryKind::CallEnter: {
        int idx = static_cast<int>(calls.size());
        calls.push_back({e.function, stack.empty() ? -1 : stack.back(), {}});
        if (!stack.empty()) {
          lsim::TraceEntry marker = e;
          marker.bb = idx;
          calls[stack.back()].blocks.back().items.push_back(marker);
        }
        stack.push_back(idx);
        break;
      }
      case EntryKind::CallExit: stack.pop_back(); break;
      case EntryKind::TraceBb: calls[stack.back()].blocks.push_back({e.bb, {}}); break;
      default: calls[stack.back()].blocks.back().items.push_back(e); break;
    }
  }
  return calls;
}

// Dataflow start/end per process instr, by plain relaxation.
inline std::map<int, std::pair<int, int>> dataflow_stages(const lsim::DataflowRegion& r) {
  const int n = static_cast<int>(r.processes.size());
  std::map<int, int> start;
  for (const auto& p : r.processes)
    if (p.channel_inputs.empty()) start[p.id] = 0;
  for (int round = 0; round < n + 1; ++round)
    for (const auto& p : r.processes) {
      if (!p.scalar_inputs.empty()) throw std::logic_error("oracle: scalar dataflow inputs unsupported");
      for (int q : p.channel_inputs) {
        auto it = start.find(q);
        if (it == start.end()) continue;
        auto mine = start.find(p.id);
        if (mine == start.end() || it->second + 1 < mine->second) start[p.id] = it->second + 1;
      }
    }
  int end = 0;
  for (const auto& [id, s] : start) end = std::max(end, s);
  std::map<int, std::pair<int, int>> out;
  for (const auto& p : r.processes) out[p.instr] = {start.at(p.id), end};
  return out;
}

struct Fsm {
  int first = 1, last = 1;
  std::map<int, std::vector<Event>> by_stage;
  bool spawned = false, done = false;
  int stage = 0;
  std::size_t next = 0;
  std::int64_t stage_begin = 0, end = 0;
};

inline Fsm build_fsm(const Call& c, const Design& d) {
  const lsim::FunctionSchedule& fn = *d.function(c.fn);
  std::map<int, std::pair<int, int>> df;
  if (fn.dataflow) df = dataflow_stages(*fn.dataflow);

  Fsm m;
  std::map<int, std::vector<Event>> ends;
  std::vector<int> seen(fn.blocks.size(), 0);
  int prev_end_static = 0, prev_end_dyn = 0, prev_start_dyn = 1, prev_bb = -1;
  for (std::size_t i = 0; i < c.blocks.size(); ++i) {
    const auto& sb = fn.blocks.at(c.blocks[i].bb);
    if (sb.out_of_order()) throw std::logic_error("oracle: out-of-order blocks unsupported");
    int lo = sb.static_start, hi = sb.terminator_stage;
    bool has_df = false;
    for (const auto& in : sb.instrs)
      if (auto it = df.find(in.id); it != df.end()) {
        lo = has_df ? std::min(lo, it->second.first) : it->second.first;
        hi = has_df ? std::max(hi, it->second.second) : it->second.second;
        has_df = true;
      }
    auto stage_of = [&](int instr, bool end) {
      if (auto it = df.find(instr); it != df.end()) return end ? it->second.second : it->second.first;
      const auto* in = sb.instr(instr);
      return std::clamp(end ? in->end_stage : in->stage, lo, hi);
    };

    int dyn_start;
    if (i == 0) dyn_start = 1;
    else if (seen[sb.id] && sb.id <= prev_bb) dyn_start = prev_end_dyn + 1;
    else dyn_start = std::max(prev_start_dyn, prev_end_dyn + std::min(lo - prev_end_static, 1));
    const int dyn_end = dyn_start + (hi - lo);
    seen[sb.id] = 1;
    prev_bb = sb.id;
    prev_end_static = hi;
    prev_end_dyn = dyn_end;
    prev_start_dyn = dyn_start;
    if (i == 0) m.first = dyn_start;
    m.last = std::max(m.last, dyn_end);

    const auto& items = c.blocks[i].items;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& op = sb.io.at(k);
      const int at = dyn_start + stage_of(op.instr, false) - lo;
      const auto& e = items[k];
      if (e.kind == EntryKind::CallEnter) {
        m.by_stage[at].push_back({Ev::Start, -1, e.bb});
        const int fin = std::max(at, dyn_start + stage_of(op.instr, true) - lo);
        ends[fin].push_back({Ev::End, -1, e.bb});
      } else if (e.kind == EntryKind::FifoRead) {
        m.by_stage[at].push_back({Ev::Read, e.resource, -1});
      } else if (e.kind == EntryKind::FifoWrite) {
        m.by_stage[at].push_back({Ev::Write, e.resource, -1});
      } else {
        throw std::logic_error("oracle: AXI unsupported");
      }
    }
  }
  for (auto& [s, v] : ends) m.by_stage[s].insert(m.by_stage[s].end(), v.begin(), v.end());
  return m;
}

struct Queue {
  FifoDepth depth;
  std::deque<std::int64_t> tokens;  // commit cycles
  std::vector<std::int64_t> write_log, read_log;
};

}  // namespace detail

inline Result run(const Design& d, const FlatTrace& trace, const std::map<int, FifoDepth>& depths, int vis = 1,
                  std::int64_t max_cycles = 10'000'000) {
  using namespace detail;
  auto calls = split_calls(trace);
  std::vector<Fsm> fsm;
  for (const auto& c : calls) fsm.push_back(build_fsm(c, d));

  std::map<int, Queue> q;
  for (const auto& f : d.fifos) {
    auto it = depths.find(f.id);
    q[f.id].depth = it == depths.end() ? f.default_depth : it->second;
  }

  auto spawn = [&](int i, std::int64_t c) {
    fsm[i].spawned = true;
    fsm[i].stage = fsm[i].first;
    fsm[i].stage_begin = c;
  };
  spawn(0, 0);

  int idle = 0;
  std::int64_t c = 0;
  for (; c < max_cycles; ++c) {
    bool any_progress = false;
    std::vector<char> stepped(fsm.size(), 0);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < fsm.size(); ++i) {
        Fsm& m = fsm[i];
        if (!m.spawned || m.done || stepped[i] || m.stage_begin > c) continue;
        auto& evs = m.by_stage[m.stage];
        while (m.next < evs.size()) {
          const Event& e = evs[m.next];
          bool ok = false;
          switch (e.kind) {
            case Ev::Read: {
              Queue& f = q.at(e.fifo);
              if (!f.tokens.empty() && f.tokens.front() <= c - vis) {
                f.tokens.pop_front();
                f.read_log.push_back(c);
                ok = true;
              }
              break;
            }
            case Ev::Write: {
              Queue& f = q.at(e.fifo);
              std::int64_t occ = static_cast<std::int64_t>(f.tokens.size());
              for (auto r = f.read_log.rbegin(); r != f.read_log.rend() && *r > c - vis; ++r) ++occ;
              if (f.depth.is_unbounded() || occ < f.depth.value()) {
                f.tokens.push_back(c);
                f.write_log.push_back(c);
                ok = true;
              }
              break;
            }
            case Ev::Start: spawn(e.child, c); ok = true; break;
            case Ev::End: ok = fsm[e.child].done && fsm[e.child].end <= c; break;
          }
          if (!ok) break;
          ++m.next;
          changed = any_progress = true;
        }
        if (m.next < evs.size()) continue;
        // Stage complete this cycle.
        stepped[i] = 1;
        changed = any_progress = true;
        m.next = 0;
        if (m.stage == m.last) {
          m.done = true;
          m.end = c;
        } else {
          ++m.stage;
          m.stage_begin = c + 1;
        }
      }
    }
    bool all_done = std::all_of(fsm.begin(), fsm.end(), [](const Fsm& m) { return m.done; });
    if (all_done) break;
    idle = any_progress ? 0 : idle + 1;
    if (idle >= 2) break;
  }

  Result r;
  r.call_end.resize(fsm.size());
  bool all_done = true;
  std::int64_t last = 0;
  for (std::size_t i = 0; i < fsm.size(); ++i) {
    if (fsm[i].done) {
      r.call_end[i] = fsm[i].end;
      last = std::max(last, fsm[i].end);
    } else {
      all_done = false;
    }
  }
  r.deadlock = !all_done;
  if (all_done) r.total_latency = last + 1;
  for (const auto& [id, f] : q) {
    std::int64_t best = 0;
    for (std::size_t w = 0; w < f.write_log.size(); ++w) {
      const auto wc = f.write_log[w];
      std::int64_t writes = std::count_if(f.write_log.begin(), f.write_log.end(), [&](auto x) { return x <= wc; });
      std::int64_t reads = std::count_if(f.read_log.begin(), f.read_log.end(), [&](auto x) { return x <= wc - vis; });
      best = std::max(best, writes - reads);
    }
    r.observed[id] = best;
  }
  return r;
}

}  // namespace oracle
