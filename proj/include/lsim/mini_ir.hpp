#pragma once

// Stage 1: a deterministic interpreter for a small imperative IR whose
// functions and blocks line up 1:1 with the Design's schedules. Executing a
// program emits the flat trace consumed by stage 2.

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsim/design.hpp"
#include "lsim/error.hpp"
#include "lsim/trace.hpp"

namespace lsim {

inline constexpr std::int64_t kDefaultStepBudget = 100'000'000;
inline constexpr int kMaxCallDepth = 1024;

enum class OpCode {
  // compute
  Mov, Add, Sub, Mul, Div, Rem, And, Or, Xor, Shl, Shr, Lt, Le, Gt, Ge, Eq, Ne,
  // I/O
  FifoRead, FifoWrite, AxiReadReq, AxiRead, AxiWriteReq, AxiWrite, AxiWriteResp, Call,
  // terminators
  Br, Jmp, Ret,
};

namespace detail {

struct OpName {
  OpCode code;
  std::string_view name;
};

inline constexpr OpName kOpNames[] = {
    {OpCode::Mov, "mov"},   {OpCode::Add, "add"},   {OpCode::Sub, "sub"},
    {OpCode::Mul, "mul"},   {OpCode::Div, "div"},   {OpCode::Rem, "rem"},
    {OpCode::And, "and"},   {OpCode::Or, "or"},     {OpCode::Xor, "xor"},
    {OpCode::Shl, "shl"},   {OpCode::Shr, "shr"},   {OpCode::Lt, "lt"},
    {OpCode::Le, "le"},     {OpCode::Gt, "gt"},     {OpCode::Ge, "ge"},
    {OpCode::Eq, "eq"},     {OpCode::Ne, "ne"},     {OpCode::FifoRead, "fifo_read"},
    {OpCode::FifoWrite, "fifo_write"},               {OpCode::AxiReadReq, "axi_readreq"},
    {OpCode::AxiRead, "axi_read"},                   {OpCode::AxiWriteReq, "axi_writereq"},
    {OpCode::AxiWrite, "axi_write"},                 {OpCode::AxiWriteResp, "axi_writeresp"},
    {OpCode::Call, "call"}, {OpCode::Br, "br"},     {OpCode::Jmp, "jmp"},
    {OpCode::Ret, "ret"},
};

}  // namespace detail

inline std::string_view to_string(OpCode c) {
  for (const auto& n : detail::kOpNames)
    if (n.code == c) return n.name;
  return "?";
}

inline bool is_terminator(OpCode c) { return c == OpCode::Br || c == OpCode::Jmp || c == OpCode::Ret; }
inline bool is_binary(OpCode c) { return c >= OpCode::Add && c <= OpCode::Ne; }

/// The schedule op kind an I/O opcode corresponds to, if any.
inline std::optional<IoKind> io_kind_of(OpCode c) {
  switch (c) {
    case OpCode::FifoRead: return IoKind::FifoRead;
    case OpCode::FifoWrite: return IoKind::FifoWrite;
    case OpCode::AxiReadReq: return IoKind::AxiReadReq;
    case OpCode::AxiRead: return IoKind::AxiRead;
    case OpCode::AxiWriteReq: return IoKind::AxiWriteReq;
    case OpCode::AxiWrite: return IoKind::AxiWrite;
    case OpCode::AxiWriteResp: return IoKind::AxiWriteResp;
    case OpCode::Call: return IoKind::SubCall;
    default: return std::nullopt;
  }
}

/// Register reference or immediate.
struct Operand {
  int reg = -1;  // register slot, -1 for an immediate
  std::int64_t imm = 0;
  bool is_reg() const { return reg >= 0; }
  friend bool operator==(const Operand&, const Operand&) = default;
};

struct MiniOp {
  OpCode code = OpCode::Mov;
  int dst = -1;                // destination register slot
  std::vector<Operand> args;   // operands; meaning depends on the opcode
  int resource = -1;           // fifo id / axi port
  std::string callee;          // Call
  int target = -1;             // Jmp, Br (then)
  int else_target = -1;        // Br (else)
  friend bool operator==(const MiniOp&, const MiniOp&) = default;
};

struct MiniBlock {
  std::vector<MiniOp> ops;
  friend bool operator==(const MiniBlock&, const MiniBlock&) = default;
};

struct MiniFunction {
  std::string name;
  std::vector<std::string> registers;  // slot -> name; params occupy the first slots
  int param_count = 0;
  std::vector<MiniBlock> blocks;
  friend bool operator==(const MiniFunction&, const MiniFunction&) = default;
};

struct MiniProgram {
  std::map<std::string, MiniFunction> functions;
  std::vector<std::int64_t> entry_args;
  std::map<std::uint64_t, std::int64_t> memory;  // initial AXI memory, keyed by beat address
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

class RegisterTable {
 public:
  explicit RegisterTable(MiniFunction& fn) : fn_(fn) {
    for (std::size_t i = 0; i < fn.registers.size(); ++i) slots_[fn.registers[i]] = static_cast<int>(i);
  }
  int slot(const std::string& name) {
    auto [it, inserted] = slots_.emplace(name, static_cast<int>(fn_.registers.size()));
    if (inserted) fn_.registers.push_back(name);
    return it->second;
  }

 private:
  MiniFunction& fn_;
  std::unordered_map<std::string, int> slots_;
};

inline Operand operand_from_json(const json& j, RegisterTable& regs) {
  if (j.is_string()) return Operand{regs.slot(j.get<std::string>()), 0};
  if (j.is_number_integer()) return Operand{-1, j.get<std::int64_t>()};
  throw json::type_error::create(302, "operand must be a register name or an integer", &j);
}

inline MiniOp op_from_json(const json& j, RegisterTable& regs) {
  MiniOp op;
  auto name = j.at("op").get<std::string>();
  bool found = false;
  for (const auto& n : kOpNames) {
    if (n.name == name) {
      op.code = n.code;
      found = true;
    }
  }
  if (!found) throw json::other_error::create(501, "unknown op '" + name + "'", &j);

  auto arg = [&](const char* key) { op.args.push_back(operand_from_json(j.at(key), regs)); };
  auto dst = [&] { op.dst = regs.slot(j.at("dst").get<std::string>()); };
  switch (op.code) {
    case OpCode::Mov: dst(); arg("a"); break;
    case OpCode::FifoRead: op.resource = j.at("fifo").get<int>(); dst(); break;
    case OpCode::FifoWrite: op.resource = j.at("fifo").get<int>(); arg("value"); break;
    case OpCode::AxiReadReq:
    case OpCode::AxiWriteReq:
      op.resource = j.at("port").get<int>();
      arg("addr");
      arg("len");
      break;
    case OpCode::AxiRead: op.resource = j.at("port").get<int>(); dst(); break;
    case OpCode::AxiWrite: op.resource = j.at("port").get<int>(); arg("value"); break;
    case OpCode::AxiWriteResp: op.resource = j.at("port").get<int>(); break;
    case OpCode::Call:
      op.callee = j.at("fn").get<std::string>();
      for (const auto& a : j.value("args", json::array())) op.args.push_back(operand_from_json(a, regs));
      if (j.contains("dst")) dst();
      break;
    case OpCode::Br:
      arg("cond");
      op.target = j.at("then").get<int>();
      op.else_target = j.at("else").get<int>();
      break;
    case OpCode::Jmp: op.target = j.at("target").get<int>(); break;
    case OpCode::Ret:
      if (j.contains("value")) arg("value");
      break;
    default:
      dst();
      arg("a");
      arg("b");
      break;
  }
  return op;
}

}  // namespace detail

inline MiniProgram program_from_json(const json& j, const std::string& source = {}) {
  try {
    if (j.at("format_version").get<int>() != 1) throw ParseError(source, 0, "unsupported program format_version");
    MiniProgram p;
    p.entry_args = j.value("entry_args", std::vector<std::int64_t>{});
    const json memory = j.value("memory", json::object());
    for (const auto& [addr, value] : memory.items())
      p.memory[std::stoull(addr)] = value.get<std::int64_t>();
    for (const auto& [name, jf] : j.at("functions").items()) {
      MiniFunction fn;
      fn.name = name;
      fn.registers = jf.value("params", std::vector<std::string>{});
      fn.param_count = static_cast<int>(fn.registers.size());
      detail::RegisterTable regs(fn);
      for (const auto& jb : jf.at("blocks")) {
        MiniBlock b;
        for (const auto& jo : jb) b.ops.push_back(detail::op_from_json(jo, regs));
        fn.blocks.push_back(std::move(b));
      }
      p.functions.emplace(name, std::move(fn));
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(source, 0, std::string("malformed program: ") + e.what());
  } catch (const std::logic_error& e) {  // std::stoull
    throw ParseError(source, 0, std::string("malformed program: ") + e.what());
  }
}

inline MiniProgram parse_program(std::string_view text, const std::string& source = {}) {
  return program_from_json(parse_json_text(text, source), source);
}

inline MiniProgram load_program(const std::filesystem::path& path) {
  return parse_program(read_text_file(path), path.string());
}

/// Checks that every program block is well formed and performs exactly the
/// I/O ops its schedule declares, in order.
inline std::vector<std::string> check_alignment(const MiniProgram& prog, const Design& design) {
  std::vector<std::string> out;
  for (const auto& [name, sched] : design.functions) {
    auto it = prog.functions.find(name);
    if (it == prog.functions.end()) {
      out.push_back("program lacks function " + name);
      continue;
    }
    const MiniFunction& fn = it->second;
    if (fn.blocks.size() != sched.blocks.size()) {
      out.push_back("function " + name + ": program has " + std::to_string(fn.blocks.size()) +
                    " blocks, schedule has " + std::to_string(sched.blocks.size()));
      continue;
    }
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
      const std::string where = "function " + name + " block " + std::to_string(b);
      const auto& ops = fn.blocks[b].ops;
      if (ops.empty() || !is_terminator(ops.back().code)) out.push_back(where + ": must end with br, jmp or ret");
      std::vector<const MiniOp*> io;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (is_terminator(ops[i].code) && i + 1 != ops.size()) out.push_back(where + ": terminator before end of block");
        for (int t : {ops[i].target, ops[i].else_target})
          if ((ops[i].code == OpCode::Br || ops[i].code == OpCode::Jmp) && t != -1 &&
              (t < 0 || t >= static_cast<int>(fn.blocks.size())))
            out.push_back(where + ": branch to missing block " + std::to_string(t));
        if (io_kind_of(ops[i].code)) io.push_back(&ops[i]);
      }
      const auto& want = sched.blocks[b].io;
      bool ok = io.size() == want.size();
      for (std::size_t i = 0; ok && i < io.size(); ++i) {
        ok = *io_kind_of(io[i]->code) == want[i].kind &&
             (want[i].kind == IoKind::SubCall ? io[i]->callee == want[i].callee : io[i]->resource == want[i].resource);
      }
      if (!ok) out.push_back(where + ": I/O ops do not match the schedule's io list");
    }
  }
  for (const auto& [name, fn] : prog.functions)
    if (design.function(name) == nullptr) out.push_back("program function " + name + " has no schedule");
  return out;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct ExecStats {
  std::int64_t steps = 0;
  std::int64_t blocks = 0;
  std::int64_t events = 0;  // I/O, call_enter and call_exit entries
};

struct ExecResult {
  FlatTrace trace;
  ExecStats stats;
  std::map<int, std::deque<std::int64_t>> fifo_leftovers;
  std::map<std::uint64_t, std::int64_t> memory;
  std::int64_t return_value = 0;
};

namespace detail {

struct AxiCursor {
  std::uint64_t addr = 0;
  std::uint64_t remaining = 0;
};

class Interpreter {
 public:
  Interpreter(const MiniProgram& prog, const Design& design, std::int64_t budget)
      : prog_(prog), design_(design), budget_(budget) {
    result_.memory = prog.memory;
  }

  ExecResult run(const std::vector<std::int64_t>& args) {
    result_.return_value = call(design_.top, args, 0);
    for (auto& [id, q] : fifos_)
      if (!q.empty()) result_.fifo_leftovers[id] = q;
    return std::move(result_);
  }

 private:
  void emit(TraceEntry e) {
    e.line = result_.trace.entries.size() + 1;
    if (e.kind == EntryKind::TraceBb) ++result_.stats.blocks;
    else ++result_.stats.events;
    result_.trace.entries.push_back(std::move(e));
  }

  std::int64_t call(const std::string& name, const std::vector<std::int64_t>& args, int depth) {
    if (depth > kMaxCallDepth) throw ExecError("call depth exceeds " + std::to_string(kMaxCallDepth) + " in " + name);
    const MiniFunction& fn = prog_.functions.at(name);
    if (static_cast<int>(args.size()) != fn.param_count)
      throw ExecError("function " + name + " expects " + std::to_string(fn.param_count) + " argument(s), got " +
                      std::to_string(args.size()));
    std::vector<std::int64_t> regs(fn.registers.size(), 0);
    std::copy(args.begin(), args.end(), regs.begin());
    auto val = [&](const Operand& o) { return o.is_reg() ? regs[o.reg] : o.imm; };

    emit({EntryKind::CallEnter, name});
    int bb = 0;
    std::int64_t ret = 0;
    for (;;) {
      emit({EntryKind::TraceBb, name, bb});
      const auto& ops = fn.blocks[bb].ops;
      int next = -1;
      for (const MiniOp& op : ops) {
        if (++result_.stats.steps > budget_)
          throw ExecError("step budget of " + std::to_string(budget_) + " exceeded in " + name + " block " +
                          std::to_string(bb) + " (likely non-termination)");
        switch (op.code) {
          case OpCode::Mov: regs[op.dst] = val(op.args[0]); break;
          case OpCode::FifoRead: {
            auto& q = fifos_[op.resource];
            if (q.empty())
              throw ExecError("functional FIFO underflow: " + name + " block " + std::to_string(bb) +
                              " reads empty fifo " + std::to_string(op.resource));
            regs[op.dst] = q.front();
            q.pop_front();
            emit({EntryKind::FifoRead, {}, -1, op.resource});
            break;
          }
          case OpCode::FifoWrite:
            fifos_[op.resource].push_back(val(op.args[0]));
            emit({EntryKind::FifoWrite, {}, -1, op.resource});
            break;
          case OpCode::AxiReadReq:
          case OpCode::AxiWriteReq: {
            auto addr = val(op.args[0]);
            auto len = val(op.args[1]);
            if (addr < 0 || len < 1)
              throw ExecError(name + ": " + std::string(to_string(op.code)) + " needs addr >= 0 and len >= 1");
            auto& q = op.code == OpCode::AxiReadReq ? reads_[op.resource] : writes_[op.resource];
            q.push_back({static_cast<std::uint64_t>(addr), static_cast<std::uint64_t>(len)});
            emit({op.code == OpCode::AxiReadReq ? EntryKind::AxiReadReq : EntryKind::AxiWriteReq, {}, -1,
                  op.resource, static_cast<std::uint64_t>(addr), static_cast<std::uint64_t>(len)});
            break;
          }
          case OpCode::AxiRead: {
            auto& c = front_cursor(reads_, op.resource, name, "axi_read");
            auto it = result_.memory.find(c.addr);
            regs[op.dst] = it == result_.memory.end() ? 0 : it->second;
            advance(reads_[op.resource], op.resource);
            emit({EntryKind::AxiRead, {}, -1, op.resource});
            break;
          }
          case OpCode::AxiWrite: {
            auto& c = front_cursor(writes_, op.resource, name, "axi_write");
            result_.memory[c.addr] = val(op.args[0]);
            c.addr += beat_bytes(op.resource);
            --c.remaining;
            if (c.remaining == 0) {
              awaiting_resp_[op.resource]++;
              writes_[op.resource].pop_front();
            }
            emit({EntryKind::AxiWrite, {}, -1, op.resource});
            break;
          }
          case OpCode::AxiWriteResp:
            if (awaiting_resp_[op.resource] == 0)
              throw ExecError(name + ": axi_writeresp on port " + std::to_string(op.resource) +
                              " without a completed write request");
            --awaiting_resp_[op.resource];
            emit({EntryKind::AxiWriteResp, {}, -1, op.resource});
            break;
          case OpCode::Call: {
            std::vector<std::int64_t> a;
            a.reserve(op.args.size());
            for (const auto& o : op.args) a.push_back(val(o));
            auto r = call(op.callee, a, depth + 1);
            if (op.dst >= 0) regs[op.dst] = r;
            break;
          }
          case OpCode::Br: next = val(op.args[0]) != 0 ? op.target : op.else_target; break;
          case OpCode::Jmp: next = op.target; break;
          case OpCode::Ret: ret = op.args.empty() ? 0 : val(op.args[0]); break;
          default: regs[op.dst] = binary(op.code, val(op.args[0]), val(op.args[1]), name); break;
        }
      }
      if (ops.back().code == OpCode::Ret) break;
      bb = next;
    }
    emit({EntryKind::CallExit, name});
    return ret;
  }

  static std::int64_t binary(OpCode c, std::int64_t a, std::int64_t b, const std::string& fn) {
    switch (c) {
      case OpCode::Add: return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
      case OpCode::Sub: return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
      case OpCode::Mul: return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
      case OpCode::Div:
      case OpCode::Rem:
        if (b == 0) throw ExecError(fn + ": division by zero");
        return c == OpCode::Div ? a / b : a % b;
      case OpCode::And: return a & b;
      case OpCode::Or: return a | b;
      case OpCode::Xor: return a ^ b;
      case OpCode::Shl: return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) << (b & 63));
      case OpCode::Shr: return a >> (b & 63);
      case OpCode::Lt: return a < b;
      case OpCode::Le: return a <= b;
      case OpCode::Gt: return a > b;
      case OpCode::Ge: return a >= b;
      case OpCode::Eq: return a == b;
      case OpCode::Ne: return a != b;
      default: return 0;
    }
  }

  std::uint64_t beat_bytes(int port) const {
    const auto* p = design_.axi_port(port);
    return p ? static_cast<std::uint64_t>(p->beat_bytes) : 1;
  }

  AxiCursor& front_cursor(std::map<int, std::deque<AxiCursor>>& m, int port, const std::string& fn, const char* what) {
    auto& q = m[port];
    if (q.empty()) throw ExecError(fn + ": " + what + " on port " + std::to_string(port) + " without an open request");
    return q.front();
  }

  void advance(std::deque<AxiCursor>& q, int port) {
    q.front().addr += beat_bytes(port);
    if (--q.front().remaining == 0) q.pop_front();
  }

  const MiniProgram& prog_;
  const Design& design_;
  std::int64_t budget_;
  ExecResult result_;
  std::map<int, std::deque<std::int64_t>> fifos_;
  std::map<int, std::deque<AxiCursor>> reads_;
  std::map<int, std::deque<AxiCursor>> writes_;
  std::map<int, int> awaiting_resp_;
};

}  // namespace detail

/// Runs the design's top function and records the flat trace. FIFOs are
/// unbounded value queues here; depths only matter in stage 2.
inline ExecResult execute_program(const MiniProgram& program, const Design& design,
                                  const std::vector<std::int64_t>& entry_args,
                                  std::int64_t step_budget = kDefaultStepBudget) {
  if (step_budget <= 0) throw ExecError("step budget must be positive");
  if (auto v = check_alignment(program, design); !v.empty()) throw ValidationError(std::move(v));
  return detail::Interpreter(program, design, step_budget).run(entry_args);
}

inline FlatTrace execute(const MiniProgram& program, const Design& design, const std::vector<std::int64_t>& entry_args,
                         std::int64_t step_budget = kDefaultStepBudget) {
  return execute_program(program, design, entry_args, step_budget).trace;
}

}  // namespace lsim
