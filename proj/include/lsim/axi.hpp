#pragma once

// AXI master port timing: bursts split at 4 KB pages and at the burst length
// cap, at most 16 outstanding bursts per port with a FIFO-ordered pending
// queue, and fixed overheads on top of the declared interface latency.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "lsim/error.hpp"

namespace lsim {

inline constexpr std::uint64_t kAxiPageBytes = 4096;
inline constexpr int kRctlCapacity = 16;
inline constexpr std::uint64_t kDefaultMaxBurstLen = 256;

/// Number of bursts needed for `beats` beats starting at `addr`.
inline std::uint64_t burst_count(std::uint64_t addr, std::uint64_t beats, std::uint64_t beat_bytes,
                                 std::uint64_t max_burst_len = kDefaultMaxBurstLen) {
  if (beats == 0) throw SimError("axi request with zero beats");
  if (beat_bytes == 0 || (beat_bytes & (beat_bytes - 1)) != 0) throw SimError("beat size must be a power of two");
  if (max_burst_len == 0) throw SimError("max burst length must be positive");
  if (addr % beat_bytes != 0)
    throw SimError("misaligned axi address " + std::to_string(addr) + " for " + std::to_string(beat_bytes) + "-byte beats");

  std::uint64_t count = 0;
  while (beats > 0) {
    const std::uint64_t to_page = (kAxiPageBytes - addr % kAxiPageBytes) / beat_bytes;
    const std::uint64_t n = std::min({beats, std::max<std::uint64_t>(to_page, 1), max_burst_len});
    ++count;
    addr += n * beat_bytes;
    beats -= n;
  }
  return count;
}

struct AxiTiming {
  std::int64_t latency = 1;
  std::int64_t read_overhead = 0;
  std::int64_t writeresp_overhead = 0;
  std::uint64_t max_burst_len = kDefaultMaxBurstLen;
  friend bool operator==(const AxiTiming&, const AxiTiming&) = default;
};

enum class AxiDir { Read, Write };

/// Per-port controller state. All methods take the cycle at which the caller
/// acts; callers must present cycles in nondecreasing order.
class AxiPortModel {
 public:
  using RequestId = std::size_t;

  struct Request {
    AxiDir dir = AxiDir::Read;
    std::uint64_t addr = 0;
    std::uint64_t beats = 0;
    std::uint64_t bursts = 0;
    int owner = -1;
    std::int64_t issue_cycle = 0;
    std::optional<std::int64_t> outstanding_cycle;
    std::uint64_t beats_done = 0;
    std::int64_t last_beat_cycle = 0;
    bool resp_done = false;
  };

  AxiPortModel(std::uint64_t beat_bytes, AxiTiming timing) : beat_bytes_(beat_bytes), timing_(timing) {}

  /// Issues a request. It becomes outstanding immediately when the rctl has
  /// room and nothing is pending ahead of it; otherwise it waits in order.
  RequestId request(AxiDir dir, std::uint64_t addr, std::uint64_t beats, std::int64_t cycle, int owner = -1) {
    Request r;
    r.dir = dir;
    r.addr = addr;
    r.beats = beats;
    r.bursts = burst_count(addr, beats, beat_bytes_, timing_.max_burst_len);
    r.owner = owner;
    r.issue_cycle = cycle;
    RequestId id = requests_.size();
    requests_.push_back(r);
    pending_.push_back(id);
    admit(cycle);
    return id;
  }

  /// Earliest cycle the next data beat of `id` can complete, or nullopt
  /// while the request is still pending.
  std::optional<std::int64_t> beat_ready(RequestId id) const {
    const Request& r = requests_.at(id);
    if (!r.outstanding_cycle) return std::nullopt;
    if (r.beats_done >= r.beats) throw SimError("axi data beat beyond the end of its request");
    const auto i = static_cast<std::int64_t>(r.beats_done);
    if (r.dir == AxiDir::Read) return *r.outstanding_cycle + timing_.latency + timing_.read_overhead + i;
    return *r.outstanding_cycle + i;
  }

  /// Records a data beat at `cycle`. Returns the requests that became
  /// outstanding because this beat finished its request.
  std::vector<RequestId> complete_beat(RequestId id, std::int64_t cycle) {
    Request& r = requests_.at(id);
    ++r.beats_done;
    r.last_beat_cycle = cycle;
    if (r.beats_done < r.beats) return {};
    rctl_ -= charge(r);
    return admit(cycle);
  }

  /// Earliest cycle the write response of `id` can be accepted.
  std::optional<std::int64_t> resp_ready(RequestId id) const {
    const Request& r = requests_.at(id);
    if (r.dir != AxiDir::Write || r.beats_done < r.beats) return std::nullopt;
    return r.last_beat_cycle + timing_.latency + timing_.writeresp_overhead;
  }

  void complete_resp(RequestId id) { requests_.at(id).resp_done = true; }

  int rctl_depth() const { return rctl_; }
  std::size_t pending_count() const { return pending_.size(); }
  const Request& get(RequestId id) const { return requests_.at(id); }
  const AxiTiming& timing() const { return timing_; }

 private:
  // A request needing more bursts than the rctl holds runs alone and fills it.
  static int charge(const Request& r) { return static_cast<int>(std::min<std::uint64_t>(r.bursts, kRctlCapacity)); }

  std::vector<RequestId> admit(std::int64_t cycle) {
    std::vector<RequestId> admitted;
    while (!pending_.empty()) {
      Request& r = requests_[pending_.front()];
      if (rctl_ + charge(r) > kRctlCapacity) break;
      rctl_ += charge(r);
      r.outstanding_cycle = cycle;
      admitted.push_back(pending_.front());
      pending_.pop_front();
    }
    return admitted;
  }

  std::uint64_t beat_bytes_;
  AxiTiming timing_;
  std::vector<Request> requests_;
  std::deque<RequestId> pending_;
  int rctl_ = 0;
};

}  // namespace lsim
