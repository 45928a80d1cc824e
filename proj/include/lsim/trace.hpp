#pragma once

// Flat trace wire format and the per-call hierarchy built from it.
//
// One entry per line, space separated:
//   trace_bb <fn> <bb>
//   fifo_read <id> | fifo_write <id>
//   axi_readreq <port> <addr> <len> | axi_writereq <port> <addr> <len>
//   axi_read <port> | axi_write <port> | axi_writeresp <port>
//   call_enter <fn> | call_exit <fn>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/error.hpp"

namespace lsim {

enum class EntryKind {
  TraceBb,
  FifoRead,
  FifoWrite,
  AxiReadReq,
  AxiRead,
  AxiWriteReq,
  AxiWrite,
  AxiWriteResp,
  CallEnter,
  CallExit,
};

inline std::string_view to_string(EntryKind k) {
  switch (k) {
    case EntryKind::TraceBb: return "trace_bb";
    case EntryKind::FifoRead: return "fifo_read";
    case EntryKind::FifoWrite: return "fifo_write";
    case EntryKind::AxiReadReq: return "axi_readreq";
    case EntryKind::AxiRead: return "axi_read";
    case EntryKind::AxiWriteReq: return "axi_writereq";
    case EntryKind::AxiWrite: return "axi_write";
    case EntryKind::AxiWriteResp: return "axi_writeresp";
    case EntryKind::CallEnter: return "call_enter";
    case EntryKind::CallExit: return "call_exit";
  }
  return "?";
}

/// Maps an I/O entry to the schedule's op kind. CallEnter maps to SubCall.
inline std::optional<IoKind> io_kind_of(EntryKind k) {
  switch (k) {
    case EntryKind::FifoRead: return IoKind::FifoRead;
    case EntryKind::FifoWrite: return IoKind::FifoWrite;
    case EntryKind::AxiReadReq: return IoKind::AxiReadReq;
    case EntryKind::AxiRead: return IoKind::AxiRead;
    case EntryKind::AxiWriteReq: return IoKind::AxiWriteReq;
    case EntryKind::AxiWrite: return IoKind::AxiWrite;
    case EntryKind::AxiWriteResp: return IoKind::AxiWriteResp;
    case EntryKind::CallEnter: return IoKind::SubCall;
    default: return std::nullopt;
  }
}

inline EntryKind entry_kind_of(IoKind k) {
  switch (k) {
    case IoKind::FifoRead: return EntryKind::FifoRead;
    case IoKind::FifoWrite: return EntryKind::FifoWrite;
    case IoKind::AxiReadReq: return EntryKind::AxiReadReq;
    case IoKind::AxiRead: return EntryKind::AxiRead;
    case IoKind::AxiWriteReq: return EntryKind::AxiWriteReq;
    case IoKind::AxiWrite: return EntryKind::AxiWrite;
    case IoKind::AxiWriteResp: return EntryKind::AxiWriteResp;
    case IoKind::SubCall: return EntryKind::CallEnter;
  }
  return EntryKind::CallEnter;
}

struct TraceEntry {
  EntryKind kind = EntryKind::TraceBb;
  std::string function;  // trace_bb, call_enter, call_exit
  int bb = -1;
  int resource = -1;
  std::uint64_t addr = 0;
  std::uint64_t len = 0;
  std::size_t line = 0;  // 1-based source line
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct FlatTrace {
  std::vector<TraceEntry> entries;
  friend bool operator==(const FlatTrace&, const FlatTrace&) = default;
};

inline void write_entry(std::ostream& os, const TraceEntry& e) {
  os << to_string(e.kind);
  switch (e.kind) {
    case EntryKind::TraceBb: os << ' ' << e.function << ' ' << e.bb; break;
    case EntryKind::CallEnter:
    case EntryKind::CallExit: os << ' ' << e.function; break;
    case EntryKind::AxiReadReq:
    case EntryKind::AxiWriteReq: os << ' ' << e.resource << ' ' << e.addr << ' ' << e.len; break;
    default: os << ' ' << e.resource; break;
  }
  os << '\n';
}

inline void write_flat_trace(std::ostream& os, const FlatTrace& t) {
  for (const auto& e : t.entries) write_entry(os, e);
}

namespace detail {

// At most five fields are kept; a fifth means too many operands.
struct Fields {
  std::array<std::string_view, 5> v;
  std::size_t n = 0;

  std::size_t size() const { return n; }
  bool empty() const { return n == 0; }
  std::string_view operator[](std::size_t i) const { return v[i]; }
};

inline Fields split_fields(std::string_view line) {
  Fields out;
  std::size_t i = 0;
  while (i < line.size() && out.n < out.v.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.v[out.n++] = line.substr(i, j - i);
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Parses one non-blank line; throws ParseError carrying `line_no`.
inline TraceEntry parse_trace_line(std::string_view text, std::size_t line_no, const std::string& source = {}) {
  auto f = detail::split_fields(text);
  auto bad = [&](const std::string& why) { return ParseError(source, line_no, why + ": '" + std::string(text) + "'"); };
  if (f.empty()) throw bad("empty entry");

  TraceEntry e;
  e.line = line_no;
  auto want = [&](std::size_t n) {
    if (f.size() != n) throw bad("expected " + std::to_string(n - 1) + " operand(s)");
  };
  auto num = [&](std::string_view s, auto& out) {
    if (!detail::parse_number(s, out)) throw bad("bad number '" + std::string(s) + "'");
  };

  const std::string_view k = f[0];
  if (k == "trace_bb") {
    want(3);
    e.kind = EntryKind::TraceBb;
    e.function = std::string(f[1]);
    num(f[2], e.bb);
    if (e.bb < 0) throw bad("negative basic block id");
  } else if (k == "call_enter" || k == "call_exit") {
    want(2);
    e.kind = k == "call_enter" ? EntryKind::CallEnter : EntryKind::CallExit;
    e.function = std::string(f[1]);
  } else if (k == "axi_readreq" || k == "axi_writereq") {
    want(4);
    e.kind = k == "axi_readreq" ? EntryKind::AxiReadReq : EntryKind::AxiWriteReq;
    num(f[1], e.resource);
    num(f[2], e.addr);
    num(f[3], e.len);
  } else {
    if (k == "fifo_read") e.kind = EntryKind::FifoRead;
    else if (k == "fifo_write") e.kind = EntryKind::FifoWrite;
    else if (k == "axi_read") e.kind = EntryKind::AxiRead;
    else if (k == "axi_write") e.kind = EntryKind::AxiWrite;
    else if (k == "axi_writeresp") e.kind = EntryKind::AxiWriteResp;
    else throw bad("unknown entry kind '" + std::string(k) + "'");
    want(2);
    num(f[1], e.resource);
  }
  if (e.resource < -1) throw bad("negative resource id");
  return e;
}

/// Single pass over the text. Blank lines are skipped but still counted so
/// that entry line numbers match the file.
inline FlatTrace parse_flat_trace(std::string_view text, const std::string& source = {}) {
  FlatTrace t;
  t.entries.reserve(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 1);
  std::vector<std::size_t> open;  // indices of unmatched call_enter entries
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    TraceEntry e = parse_trace_line(line, line_no, source);
    if (e.kind == EntryKind::CallEnter) {
      open.push_back(t.entries.size());
    } else if (e.kind == EntryKind::CallExit) {
      if (open.empty()) throw ParseError(source, line_no, "call_exit " + e.function + " without matching call_enter");
      const TraceEntry& enter = t.entries[open.back()];
      if (enter.function != e.function)
        throw ParseError(source, line_no, "call_exit " + e.function + " does not match call_enter " +
                                              enter.function + " on line " + std::to_string(enter.line));
      open.pop_back();
    }
    t.entries.push_back(std::move(e));
  }
  if (!open.empty())
    throw ParseError(source, t.entries[open.back()].line, "unbalanced call nesting: call_enter " +
                                                             t.entries[open.back()].function + " has no call_exit");
  return t;
}

inline FlatTrace parse_flat_trace(std::istream& in, const std::string& source = {}) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_flat_trace(std::string_view(text), source);
}

inline FlatTrace load_flat_trace(const std::filesystem::path& path) {
  return parse_flat_trace(std::string_view(read_text_file(path)), path.string());
}

// ---------------------------------------------------------------------------
// Hierarchical form
// ---------------------------------------------------------------------------

/// An I/O event or sub-call inside one executed block. Sub-calls have kind
/// CallEnter and `child` set to the callee's index in the CallTree.
struct CallEvent {
  EntryKind kind = EntryKind::FifoRead;
  int resource = -1;
  std::uint64_t addr = 0;
  std::uint64_t len = 0;
  int child = -1;
  std::size_t line = 0;
  friend bool operator==(const CallEvent&, const CallEvent&) = default;
};

struct BlockInstance {
  int bb = 0;
  std::size_t line = 0;
  std::vector<CallEvent> events;
  friend bool operator==(const BlockInstance&, const BlockInstance&) = default;
};

struct CallTrace {
  std::string function;
  int parent = -1;
  std::size_t enter_line = 0;
  std::size_t exit_line = 0;
  std::vector<BlockInstance> blocks;
  friend bool operator==(const CallTrace&, const CallTrace&) = default;
};

/// Calls in pre-order (call_enter order); calls[0] is the top-level call.
struct CallTree {
  std::vector<CallTrace> calls;
  const CallTrace& root() const { return calls.front(); }
  friend bool operator==(const CallTree&, const CallTree&) = default;
};

inline CallTree build_call_tree(const FlatTrace& trace, const Design& design) {
  CallTree tree;
  if (trace.entries.empty()) throw TraceError("no top-level call: trace is empty");

  auto where = [](const TraceEntry& e) { return "trace line " + std::to_string(e.line) + ": "; };
  std::vector<int> stack;  // indices into tree.calls
  std::vector<const FunctionSchedule*> sched_stack;

  for (const auto& e : trace.entries) {
    if (stack.empty()) {
      if (!tree.calls.empty())
        throw TraceError(where(e) + "entry after the top-level call returned; only one top-level call is supported");
      if (e.kind != EntryKind::CallEnter) throw TraceError(where(e) + "no top-level call: trace must begin with call_enter " + design.top);
      if (e.function != design.top)
        throw TraceError(where(e) + "top-level call to '" + e.function + "' but design top is '" + design.top + "'");
    }
    switch (e.kind) {
      case EntryKind::CallEnter: {
        const FunctionSchedule* fn = design.function(e.function);
        if (fn == nullptr) throw TraceError(where(e) + "unknown function '" + e.function + "'");
        int idx = static_cast<int>(tree.calls.size());
        CallTrace c;
        c.function = e.function;
        c.enter_line = e.line;
        if (!stack.empty()) {
          CallTrace& parent = tree.calls[stack.back()];
          if (parent.blocks.empty()) throw TraceError(where(e) + "sub-call outside any block");
          c.parent = stack.back();
          CallEvent ev;
          ev.kind = EntryKind::CallEnter;
          ev.child = idx;
          ev.line = e.line;
          parent.blocks.back().events.push_back(ev);
        }
        tree.calls.push_back(std::move(c));
        stack.push_back(idx);
        sched_stack.push_back(fn);
        break;
      }
      case EntryKind::CallExit: {
        CallTrace& c = tree.calls[stack.back()];
        if (c.function != e.function)
          throw TraceError(where(e) + "call_exit " + e.function + " closes call of " + c.function);
        if (c.blocks.empty()) throw TraceError(where(e) + "call of " + c.function + " executed no blocks");
        c.exit_line = e.line;
        stack.pop_back();
        sched_stack.pop_back();
        break;
      }
      case EntryKind::TraceBb: {
        CallTrace& c = tree.calls[stack.back()];
        if (e.function != c.function)
          throw TraceError(where(e) + "trace_bb for " + e.function + " inside a call of " + c.function);
        if (e.bb >= static_cast<int>(sched_stack.back()->blocks.size()))
          throw TraceError(where(e) + "function " + e.function + " has no block " + std::to_string(e.bb));
        c.blocks.push_back(BlockInstance{e.bb, e.line, {}});
        break;
      }
      default: {
        CallTrace& c = tree.calls[stack.back()];
        if (c.blocks.empty()) throw TraceError(where(e) + "event outside any block");
        CallEvent ev;
        ev.kind = e.kind;
        ev.resource = e.resource;
        ev.addr = e.addr;
        ev.len = e.len;
        ev.line = e.line;
        c.blocks.back().events.push_back(ev);
        break;
      }
    }
  }
  if (!stack.empty()) throw TraceError("unbalanced call nesting: trace ends inside " + tree.calls[stack.back()].function);
  return tree;
}

namespace detail {

inline void flatten_into(const CallTree& tree, int idx, FlatTrace& out) {
  const CallTrace& c = tree.calls[idx];
  out.entries.push_back({EntryKind::CallEnter, c.function, -1, -1, 0, 0, c.enter_line});
  for (const auto& b : c.blocks) {
    out.entries.push_back({EntryKind::TraceBb, c.function, b.bb, -1, 0, 0, b.line});
    for (const auto& ev : b.events) {
      if (ev.kind == EntryKind::CallEnter) {
        flatten_into(tree, ev.child, out);
      } else {
        out.entries.push_back({ev.kind, {}, -1, ev.resource, ev.addr, ev.len, ev.line});
      }
    }
  }
  out.entries.push_back({EntryKind::CallExit, c.function, -1, -1, 0, 0, c.exit_line});
}

}  // namespace detail

inline FlatTrace flatten(const CallTree& tree) {
  FlatTrace out;
  if (!tree.calls.empty()) detail::flatten_into(tree, 0, out);
  return out;
}

}  // namespace lsim
