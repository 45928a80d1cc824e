#pragma once

// Global stall calculation. One simulator per call steps through its
// dynamic stages; a stage costs one cycle unless one of its events stalls
// (sub-call completion, FIFO data/space, AXI readiness). Simulators are
// advanced in ascending (cycle, creation index) order, so shared resources
// always observe a nondecreasing clock.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lsim/axi.hpp"
#include "lsim/design.hpp"
#include "lsim/error.hpp"
#include "lsim/resolver.hpp"

namespace lsim {

using Cycle = std::int64_t;

struct AxiPortConfig {
  std::optional<std::int64_t> latency;  // overrides the design's declared latency
  std::int64_t read_overhead = 0;
  std::int64_t writeresp_overhead = 0;
  std::uint64_t max_burst_len = kDefaultMaxBurstLen;
  friend bool operator==(const AxiPortConfig&, const AxiPortConfig&) = default;
};

struct SimConfig {
  /// Per-fifo overrides of the design's default depths.
  std::map<int, FifoDepth> fifo_depths;
  /// A write at cycle c is readable from c + latency; space freed by a read
  /// at c is writable from c + latency. 0 or 1.
  int fifo_visibility_latency = 1;
  AxiPortConfig axi_default;
  std::map<int, AxiPortConfig> axi_ports;

  FifoDepth depth_of(const FifoDecl& f) const {
    auto it = fifo_depths.find(f.id);
    return it == fifo_depths.end() ? f.default_depth : it->second;
  }

  AxiTiming timing_of(const AxiPortDecl& p) const {
    auto it = axi_ports.find(p.id);
    const AxiPortConfig& c = it == axi_ports.end() ? axi_default : it->second;
    return AxiTiming{c.latency.value_or(p.latency), c.read_overhead, c.writeresp_overhead, c.max_burst_len};
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct CallTiming {
  int call = 0;
  std::string function;
  int parent = -1;
  std::optional<Cycle> start;
  std::optional<Cycle> end;

  std::optional<Cycle> latency() const {
    if (!start || !end) return std::nullopt;
    return *end - *start + 1;
  }
  friend bool operator==(const CallTiming&, const CallTiming&) = default;
};

struct FifoObservation {
  int id = 0;
  std::string name;
  FifoDepth depth;
  std::int64_t observed = 0;  // max occupancy over all cycles
  std::int64_t writes = 0;
  std::int64_t reads = 0;
  friend bool operator==(const FifoObservation&, const FifoObservation&) = default;
};

struct BlockedSimulator {
  int call = 0;
  std::string function;
  std::string event;     // "fifo_write", "subcall_end", ...
  std::string resource;  // fifo name, callee, or axi port name
  int stage = 0;
  Cycle cycle = 0;
  friend bool operator==(const BlockedSimulator&, const BlockedSimulator&) = default;
};

/// `from` waits on `resource`, which only `to` can release.
struct WaitEdge {
  int from = 0;
  std::string resource;
  int to = 0;
  friend bool operator==(const WaitEdge&, const WaitEdge&) = default;
};

struct DeadlockDiagnosis {
  std::vector<BlockedSimulator> blocked;
  std::vector<WaitEdge> edges;
  std::vector<int> cycle;  // calls on a wait-for cycle, empty if none found
  friend bool operator==(const DeadlockDiagnosis&, const DeadlockDiagnosis&) = default;
};

struct SimReport {
  std::optional<Cycle> total_latency;  // empty on deadlock
  std::vector<CallTiming> calls;       // indexed by call
  std::vector<FifoObservation> fifos;  // design order
  std::optional<DeadlockDiagnosis> deadlock;
  friend bool operator==(const SimReport&, const SimReport&) = default;
};

namespace detail {

class StallEngine {
 public:
  StallEngine(const std::vector<DynamicSchedule>& schedules, const Design& design, const SimConfig& config)
      : schedules_(schedules), design_(design), vis_(config.fifo_visibility_latency) {
    if (vis_ != 0 && vis_ != 1) throw SimError("fifo visibility latency must be 0 or 1");
    if (schedules.empty()) throw SimError("no call schedules to simulate");
    for (std::size_t i = 0; i < schedules.size(); ++i)
      if (schedules[i].call != static_cast<int>(i)) throw SimError("schedules must be indexed by call");

    for (std::size_t i = 0; i < design.fifos.size(); ++i) {
      fifo_index_[design.fifos[i].id] = i;
      fifos_.emplace_back();
      fifos_.back().depth = config.depth_of(design.fifos[i]);
    }
    for (std::size_t i = 0; i < design.axi_ports.size(); ++i) {
      const auto& p = design.axi_ports[i];
      port_index_[p.id] = i;
      ports_.emplace_back(AxiPortModel(static_cast<std::uint64_t>(p.beat_bytes), config.timing_of(p)));
    }
    sim_of_call_.assign(schedules.size(), -1);
  }

  SimReport run() {
    spawn(0, 0);
    while (!queue_.empty()) {
      auto [cycle, order, sim] = queue_.top();
      queue_.pop();
      if (cycle < now_) throw SimError("internal: clock moved backwards");
      now_ = cycle;
      advance(sim);
    }
    return report();
  }

 private:
  enum class Wait { None, FifoData, FifoSpace, Callee, AxiAdmit };

  struct Sim {
    int call = 0;
    Cycle start = 0;
    Cycle offset = 0;  // stall cycles so far
    std::size_t cursor = 0;
    bool done = false;
    Cycle end = 0;
    Wait wait = Wait::None;
    // AXI requests issued by this call, per port, awaiting data / response.
    std::map<int, std::deque<AxiPortModel::RequestId>> reads, writes, resps;
  };

  struct FifoState {
    FifoDepth depth;
    std::vector<Cycle> writes;  // commit cycles, nondecreasing
    std::vector<Cycle> reads;   // consume cycles, nondecreasing
    std::vector<int> waiting_data;
    std::vector<int> waiting_space;
  };

  struct Item {
    Cycle cycle;
    int order;
    int sim;
    bool operator>(const Item& o) const { return std::tie(cycle, order) > std::tie(o.cycle, o.order); }
  };

  const DynamicSchedule& sched_of(const Sim& s) const { return schedules_[s.call]; }

  Cycle nominal(const Sim& s) const {
    const auto& d = sched_of(s);
    return s.start + (d.events[s.cursor].stage - d.first_stage) + s.offset;
  }

  void push(int sim, Cycle c) { queue_.push({c, sim, sim}); }

  void spawn(int call, Cycle start) {
    if (sim_of_call_[call] >= 0) throw SimError("call " + std::to_string(call) + " started twice");
    int idx = static_cast<int>(sims_.size());
    sims_.push_back(Sim{});
    sims_.back().call = call;
    sims_.back().start = start;
    sim_of_call_[call] = idx;
    push(idx, start);
  }

  void wake(std::vector<int>& waiters) {
    for (int w : waiters) {
      sims_[w].wait = Wait::None;
      push(w, now_);
    }
    waiters.clear();
  }

  void finish(int idx) {
    Sim& s = sims_[idx];
    const auto& d = sched_of(s);
    s.done = true;
    s.end = s.start + (d.last_stage - d.first_stage) + s.offset;
    auto it = callee_waiters_.find(s.call);
    if (it != callee_waiters_.end()) {
      wake(it->second);
      callee_waiters_.erase(it);
    }
  }

  FifoState& fifo(int id) {
    auto it = fifo_index_.find(id);
    if (it == fifo_index_.end()) throw SimError("undeclared fifo " + std::to_string(id));
    return fifos_[it->second];
  }

  AxiPortModel& port(int id) {
    auto it = port_index_.find(id);
    if (it == port_index_.end()) throw SimError("undeclared axi port " + std::to_string(id));
    return ports_[it->second];
  }

  static AxiPortModel::RequestId front(std::map<int, std::deque<AxiPortModel::RequestId>>& m, int port,
                                      const SimEvent& ev, const char* what) {
    auto& q = m[port];
    if (q.empty())
      throw SimError("trace line " + std::to_string(ev.line) + ": " + what + " on axi port " + std::to_string(port) +
                     " with no matching outstanding request");
    return q.front();
  }

  // Runs sim `idx` at now_ until it must wait for a later cycle or park.
  void advance(int idx) {
    for (;;) {
      Sim& s = sims_[idx];
      const auto& d = sched_of(s);
      if (s.cursor >= d.events.size()) {
        finish(idx);
        return;
      }
      const SimEvent& ev = d.events[s.cursor];
      const Cycle t = nominal(s);
      if (t > now_) {
        push(idx, t);
        return;
      }

      // Earliest cycle the event can complete; nullopt parks the simulator.
      std::optional<Cycle> ready;
      switch (ev.kind) {
        case SimEventKind::SubcallStart:
        case SimEventKind::AxiReadReq:
        case SimEventKind::AxiWriteReq:
          ready = now_;
          break;
        case SimEventKind::SubcallEnd: {
          int callee = sim_of_call_.at(ev.child);
          if (callee < 0) throw SimError("sub-call end before its start for call " + std::to_string(ev.child));
          if (sims_[callee].done) ready = sims_[callee].end;
          else {
            s.wait = Wait::Callee;
            callee_waiters_[ev.child].push_back(idx);
          }
          break;
        }
        case SimEventKind::FifoRead: {
          FifoState& f = fifo(ev.resource);
          const std::size_t k = f.reads.size();
          if (k < f.writes.size()) ready = f.writes[k] + vis_;
          else {
            s.wait = Wait::FifoData;
            f.waiting_data.push_back(idx);
          }
          break;
        }
        case SimEventKind::FifoWrite: {
          FifoState& f = fifo(ev.resource);
          if (f.depth.is_unbounded() || static_cast<std::int64_t>(f.writes.size()) < f.depth.value()) {
            ready = now_;
          } else {
            const std::size_t k = f.writes.size() - static_cast<std::size_t>(f.depth.value());
            if (k < f.reads.size()) ready = f.reads[k] + vis_;
            else {
              s.wait = Wait::FifoSpace;
              f.waiting_space.push_back(idx);
            }
          }
          break;
        }
        case SimEventKind::AxiRead:
        case SimEventKind::AxiWrite: {
          auto& q = ev.kind == SimEventKind::AxiRead ? s.reads : s.writes;
          auto id = front(q, ev.resource, ev, ev.kind == SimEventKind::AxiRead ? "axi_read" : "axi_write");
          ready = port(ev.resource).beat_ready(id);
          if (!ready) {
            s.wait = Wait::AxiAdmit;
            admit_waiters_[{ev.resource, id}].push_back(idx);
          }
          break;
        }
        case SimEventKind::AxiWriteResp: {
          auto id = front(s.resps, ev.resource, ev, "axi_writeresp");
          ready = port(ev.resource).resp_ready(id);
          if (!ready)
            throw SimError("trace line " + std::to_string(ev.line) + ": axi_writeresp before all write beats");
          break;
        }
      }
      if (!ready) return;  // parked

      const Cycle release = std::max({t, *ready, now_});
      s.offset += release - t;
      if (release > now_) {
        push(idx, release);
        return;
      }
      complete(idx, ev);
      ++sims_[idx].cursor;
    }
  }

  void complete(int idx, const SimEvent& ev) {
    Sim& s = sims_[idx];
    switch (ev.kind) {
      case SimEventKind::SubcallStart:
        spawn(ev.child, now_);
        break;
      case SimEventKind::SubcallEnd:
        break;
      case SimEventKind::FifoRead: {
        FifoState& f = fifo(ev.resource);
        f.reads.push_back(now_);
        wake(f.waiting_space);
        break;
      }
      case SimEventKind::FifoWrite: {
        FifoState& f = fifo(ev.resource);
        f.writes.push_back(now_);
        wake(f.waiting_data);
        break;
      }
      case SimEventKind::AxiReadReq:
      case SimEventKind::AxiWriteReq: {
        const bool rd = ev.kind == SimEventKind::AxiReadReq;
        auto id = port(ev.resource).request(rd ? AxiDir::Read : AxiDir::Write, ev.addr, ev.len, now_, s.call);
        (rd ? s.reads : s.writes)[ev.resource].push_back(id);
        break;
      }
      case SimEventKind::AxiRead:
      case SimEventKind::AxiWrite: {
        auto& q = (ev.kind == SimEventKind::AxiRead ? s.reads : s.writes)[ev.resource];
        auto id = q.front();
        AxiPortModel& p = port(ev.resource);
        auto admitted = p.complete_beat(id, now_);
        if (p.get(id).beats_done == p.get(id).beats) {
          q.pop_front();
          if (ev.kind == SimEventKind::AxiWrite) s.resps[ev.resource].push_back(id);
        }
        for (auto a : admitted) {
          auto it = admit_waiters_.find({ev.resource, a});
          if (it != admit_waiters_.end()) {
            wake(it->second);
            admit_waiters_.erase(it);
          }
        }
        break;
      }
      case SimEventKind::AxiWriteResp: {
        auto& q = s.resps[ev.resource];
        port(ev.resource).complete_resp(q.front());
        q.pop_front();
        break;
      }
    }
  }

  // Max over write cycles c of writes(<= c) - reads(<= c - vis).
  std::int64_t observed_occupancy(const FifoState& f) const {
    std::int64_t best = 0;
    std::size_t r = 0;
    for (std::size_t w = 0; w < f.writes.size(); ++w) {
      const Cycle c = f.writes[w];
      if (w + 1 < f.writes.size() && f.writes[w + 1] == c) continue;
      while (r < f.reads.size() && f.reads[r] <= c - vis_) ++r;
      best = std::max<std::int64_t>(best, static_cast<std::int64_t>(w + 1) - static_cast<std::int64_t>(r));
    }
    return best;
  }

  std::string fifo_name(int id) const {
    const FifoDecl* f = design_.fifo(id);
    return f ? f->name : std::to_string(id);
  }

  std::string port_name(int id) const {
    const AxiPortDecl* p = design_.axi_port(id);
    return p ? p->name : std::to_string(id);
  }

  DeadlockDiagnosis diagnose() const {
    DeadlockDiagnosis diag;
    // Owner simulator of each call's pending work: itself once started,
    // otherwise the nearest started ancestor (who has yet to launch it).
    auto owner = [&](int call) {
      while (call >= 0 && sim_of_call_[call] < 0) call = schedules_[call].parent;
      return call;
    };
    auto remaining_from = [&](int call) -> std::size_t {
      int s = sim_of_call_[call];
      return s < 0 ? 0 : sims_[s].cursor;
    };
    // Calls whose unexecuted events include `kind` on `resource`.
    auto releasers = [&](SimEventKind kind, int resource) {
      std::set<int> out;
      for (std::size_t c = 0; c < schedules_.size(); ++c) {
        int sc = sim_of_call_[c];
        if (sc >= 0 && sims_[sc].done) continue;
        const auto& evs = schedules_[c].events;
        for (std::size_t i = remaining_from(static_cast<int>(c)); i < evs.size(); ++i)
          if (evs[i].kind == kind && evs[i].resource == resource) {
            out.insert(owner(static_cast<int>(c)));
            break;
          }
      }
      return out;
    };

    std::map<int, std::vector<int>> adj;
    for (const Sim& s : sims_) {
      if (s.done) continue;
      const auto& d = sched_of(s);
      const SimEvent& ev = d.events[s.cursor];
      BlockedSimulator b;
      b.call = s.call;
      b.function = d.function;
      b.event = std::string(to_string(ev.kind));
      b.stage = ev.stage;
      b.cycle = nominal(s);
      std::set<int> to;
      switch (ev.kind) {
        case SimEventKind::FifoRead:
          b.resource = fifo_name(ev.resource);
          to = releasers(SimEventKind::FifoWrite, ev.resource);
          break;
        case SimEventKind::FifoWrite:
          b.resource = fifo_name(ev.resource);
          to = releasers(SimEventKind::FifoRead, ev.resource);
          break;
        case SimEventKind::SubcallEnd:
          b.resource = schedules_[ev.child].function;
          to.insert(ev.child);
          break;
        default:
          b.resource = port_name(ev.resource);
          for (SimEventKind k : {SimEventKind::AxiRead, SimEventKind::AxiWrite})
            for (int c : releasers(k, ev.resource))
              if (c != s.call) to.insert(c);
          break;
      }
      for (int c : to) {
        diag.edges.push_back({s.call, b.resource, c});
        adj[s.call].push_back(c);
      }
      diag.blocked.push_back(std::move(b));
    }
    std::sort(diag.blocked.begin(), diag.blocked.end(),
              [](const BlockedSimulator& a, const BlockedSimulator& b) { return a.call < b.call; });
    std::sort(diag.edges.begin(), diag.edges.end(), [](const WaitEdge& a, const WaitEdge& b) {
      return std::tie(a.from, a.to, a.resource) < std::tie(b.from, b.to, b.resource);
    });

    // First wait-for cycle by DFS from the lowest call id.
    std::map<int, int> color;
    std::vector<int> path;
    std::function<bool(int)> dfs = [&](int u) {
      color[u] = 1;
      path.push_back(u);
      for (int v : adj[u]) {
        if (color[v] == 1) {
          auto it = std::find(path.begin(), path.end(), v);
          diag.cycle.assign(it, path.end());
          return true;
        }
        if (color[v] == 0 && dfs(v)) return true;
      }
      color[u] = 2;
      path.pop_back();
      return false;
    };
    for (const auto& b : diag.blocked)
      if (color[b.call] == 0 && dfs(b.call)) break;
    return diag;
  }

  SimReport report() const {
    SimReport r;
    bool all_done = true;
    for (std::size_t c = 0; c < schedules_.size(); ++c) {
      CallTiming t;
      t.call = static_cast<int>(c);
      t.function = schedules_[c].function;
      t.parent = schedules_[c].parent;
      int s = sim_of_call_[c];
      if (s >= 0) {
        t.start = sims_[s].start;
        if (sims_[s].done) t.end = sims_[s].end;
      }
      if (!t.end) all_done = false;
      r.calls.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < design_.fifos.size(); ++i) {
      const auto& f = fifos_[i];
      r.fifos.push_back({design_.fifos[i].id, design_.fifos[i].name, f.depth, observed_occupancy(f),
                         static_cast<std::int64_t>(f.writes.size()), static_cast<std::int64_t>(f.reads.size())});
    }
    if (all_done) {
      Cycle end = 0;
      for (const auto& t : r.calls) end = std::max(end, *t.end);
      r.total_latency = end - *r.calls[0].start + 1;
    } else {
      r.deadlock = diagnose();
    }
    return r;
  }

  const std::vector<DynamicSchedule>& schedules_;
  const Design& design_;
  const int vis_;
  Cycle now_ = 0;
  std::vector<Sim> sims_;
  std::vector<int> sim_of_call_;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
  std::map<int, std::size_t> fifo_index_;
  std::vector<FifoState> fifos_;
  std::map<int, std::size_t> port_index_;
  std::vector<AxiPortModel> ports_;
  std::map<int, std::vector<int>> callee_waiters_;
  std::map<std::pair<int, AxiPortModel::RequestId>, std::vector<int>> admit_waiters_;
};

}  // namespace detail

/// Runs the global stall calculation. A deadlock is reported in the result,
/// not thrown; inconsistent inputs throw SimError.
inline SimReport simulate(const std::vector<DynamicSchedule>& schedules, const Design& design,
                          const SimConfig& config) {
  return detail::StallEngine(schedules, design, config).run();
}

/// Stage-1 and resolution artifacts that stay valid across depth changes.
struct StallCache {
  const Design* design = nullptr;
  std::vector<DynamicSchedule> schedules;
  SimConfig config;  // baseline; depth maps override its fifo depths
};

/// Recomputes stalls only, with `depths` replacing the configured FIFO depths.
inline SimReport resimulate_with_depths(const StallCache& cache, const std::map<int, FifoDepth>& depths) {
  SimConfig cfg = cache.config;
  for (const auto& [id, d] : depths) {
    if (cache.design->fifo(id) == nullptr) throw SimError("unknown fifo " + std::to_string(id));
    cfg.fifo_depths[id] = d;
  }
  return simulate(cache.schedules, *cache.design, cfg);
}

struct OptimalDepths {
  std::map<int, FifoDepth> depths;        // fifo id -> optimal depth
  std::optional<Cycle> min_latency;       // empty if the unbounded run deadlocks
  SimReport unbounded;                    // the all-unbounded run itself
};

/// Runs with every FIFO unbounded; each FIFO's optimal depth is its observed
/// occupancy there (at least 1), and that run's latency is the minimum.
inline OptimalDepths compute_optimal_depths(const StallCache& cache) {
  std::map<int, FifoDepth> all;
  for (const auto& f : cache.design->fifos) all[f.id] = FifoDepth::unbounded();
  OptimalDepths out;
  out.unbounded = resimulate_with_depths(cache, all);
  for (const auto& f : out.unbounded.fifos) out.depths[f.id] = FifoDepth::bounded(std::max<std::int64_t>(f.observed, 1));
  out.min_latency = out.unbounded.total_latency;
  return out;
}

}  // namespace lsim
