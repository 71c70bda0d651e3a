#include "scm/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "scm/timing.hpp"

namespace scm {

std::string resource_name(const MachineConfig& cfg, uint32_t ordinal) {
  if (ordinal == 0) return "SU";
  if (ordinal <= cfg.cu_count) return "CU#" + std::to_string(ordinal - 1);
  return "MCU#" + std::to_string(ordinal - 1 - cfg.cu_count);
}

namespace {

constexpr int64_t kNoSeq = -1;

uint64_t ceil_div(uint64_t a, uint64_t b) { return b ? (a + b - 1) / b : 0; }

uint64_t cost_cycles(const CostModel& costs, const std::string& name,
                     uint64_t operand_bytes, bool is_memory,
                     uint64_t mem_bytes) {
  CodeletCost c = costs.lookup(name);
  double var = c.cycles_per_byte * double(operand_bytes);
  uint64_t total = c.fixed_cycles + uint64_t(std::ceil(var));
  if (is_memory)
    total += costs.mem_latency_cycles +
             ceil_div(mem_bytes, costs.mem_bytes_per_cycle);
  return total;
}

// ---------------------------------------------------------------------------
// Shared functional codelet execution.

struct CodeletOutcome {
  uint64_t mem_bytes = 0;
  std::vector<uint64_t> pushed_bytes;  // per slot
};

CodeletOutcome execute_codelet(const CodeletDefinition& def,
                               const std::vector<std::span<const uint8_t>>& in,
                               const std::vector<std::span<uint8_t>>& out,
                               const std::vector<uint64_t>& stream_in_len,
                               MainMemory* mem, size_t chunk_bytes) {
  if (!def.impl)
    throw runtime_fault("codelet '" + def.name + "' has no implementation");
  std::vector<ExecContext::Operand> ops(def.slots.size());
  for (size_t i = 0; i < def.slots.size(); ++i) {
    ops[i].slot = def.slots[i];
    if (def.slots[i].dir != Direction::WRITE)
      ops[i].in.assign(in[i].begin(), in[i].end());
    if (def.slots[i].dir != Direction::READ)
      ops[i].out.assign(out[i].size(), 0);
    ops[i].stream_in_bytes = stream_in_len[i];
  }
  ExecContext ctx(std::move(ops), def.kind == CodeletKind::MEMORY ? mem : nullptr,
                  chunk_bytes);
  def.impl(ctx);
  CodeletOutcome outcome;
  outcome.pushed_bytes.assign(def.slots.size(), 0);
  for (size_t i = 0; i < def.slots.size(); ++i) {
    if (def.slots[i].dir != Direction::READ) {
      auto committed = ctx.out(i);
      std::copy(committed.begin(), committed.end(), out[i].begin());
    }
    if (def.slots[i].stream && def.slots[i].dir == Direction::WRITE)
      outcome.pushed_bytes[i] = ctx.pushed_bytes(i);
  }
  outcome.mem_bytes = ctx.memory_bytes();
  return outcome;
}

// ---------------------------------------------------------------------------
// Control-op arithmetic: 64-bit two's complement on the low 8 bytes; the
// destination's upper 56 bytes are zeroed.

struct ControlEffect {
  bool writes = false;
  uint64_t value = 0;
  int64_t next_pc = 0;
};

ControlEffect eval_control(const ControlPayload& c,
                           const std::function<uint64_t(RegisterName)>& read,
                           int64_t pc) {
  ControlEffect e;
  e.next_pc = pc + 1;
  switch (c.op) {
    case ControlOp::LDIMM:
      e.writes = true;
      e.value = uint64_t(c.imm);
      break;
    case ControlOp::ADD:
      e.writes = true;
      e.value = read(c.regs[1]) + read(c.regs[2]);
      break;
    case ControlOp::SUB:
      e.writes = true;
      e.value = read(c.regs[1]) - read(c.regs[2]);
      break;
    case ControlOp::MULT:
      e.writes = true;
      e.value = read(c.regs[1]) * read(c.regs[2]);
      break;
    case ControlOp::BREQ:
      if (read(c.regs[0]) == read(c.regs[1])) e.next_pc = c.target;
      break;
    case ControlOp::BRNE:
      if (read(c.regs[0]) != read(c.regs[1])) e.next_pc = c.target;
      break;
    case ControlOp::BRLT:
      if (int64_t(read(c.regs[0])) < int64_t(read(c.regs[1])))
        e.next_pc = c.target;
      break;
    case ControlOp::JMPLBL:
      e.next_pc = c.target;
      break;
    case ControlOp::COMMIT:
      e.next_pc = -1;  // halt
      break;
  }
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sequential oracle.

FinalState run_sequential(const Program& p, const Machine& m,
                          const Registry& reg) {
  Machine mach(m.cfg);
  mach.regs = m.regs;
  mach.mem = m.mem;
  const MachineConfig& cfg = mach.cfg;

  FinalState fs;
  fs.cause = TerminationCause::END_OF_PROGRAM;
  int64_t pc = 0;
  uint64_t executed = 0;
  while (pc >= 0 && size_t(pc) < p.instructions.size()) {
    if (++executed > cfg.max_dynamic_instructions)
      throw runtime_fault("dynamic instruction limit exceeded (" +
                          std::to_string(cfg.max_dynamic_instructions) + ")");
    const Instruction& ins = p.instructions[size_t(pc)];
    if (ins.kind == InstrKind::CONTROL) {
      auto read = [&](RegisterName r) { return load_u64(mach.regs.view(r)); };
      ControlEffect e = eval_control(ins.control, read, pc);
      if (e.writes) {
        auto dst = mach.regs.mutate(ins.control.regs[0]);
        std::fill(dst.begin(), dst.end(), 0);
        store_u64(dst, e.value);
      }
      if (e.next_pc < 0 && ins.control.op == ControlOp::COMMIT) {
        fs.cause = TerminationCause::COMMIT;
        pc = -1;
      } else {
        pc = e.next_pc;
      }
      continue;
    }
    const CodeletDefinition& def = reg.lookup(ins.name);
    std::vector<std::span<const uint8_t>> in(def.slots.size());
    std::vector<std::span<uint8_t>> out(def.slots.size());
    std::vector<uint64_t> stream_len(def.slots.size(), 0);
    std::vector<std::vector<uint8_t>> out_bufs(def.slots.size());
    for (size_t i = 0; i < def.slots.size(); ++i) {
      RegisterName r = ins.operands[i];
      if (def.slots[i].dir != Direction::WRITE) in[i] = mach.regs.view(r);
      if (def.slots[i].dir != Direction::READ) {
        out_bufs[i].assign(cfg.reg_bytes(r.cls), 0);
        out[i] = out_bufs[i];
      }
      // Streaming flags are ignored here: a streamed input reads the whole
      // register.
      stream_len[i] = cfg.reg_bytes(r.cls);
    }
    try {
      execute_codelet(def, in, out, stream_len, &mach.mem,
                      cfg.fifo_chunk_bytes);
    } catch (const sandbox_violation&) {
      throw;
    } catch (const runtime_fault& e) {
      throw runtime_fault("instruction " + std::to_string(pc) + " (" +
                          ins.name + "): " + e.what());
    }
    for (size_t i = 0; i < def.slots.size(); ++i)
      if (def.slots[i].dir != Direction::READ)
        mach.regs.write(ins.operands[i], out_bufs[i]);
    ++pc;
  }
  fs.committed = executed;
  for (uint32_t i = 0; i < cfg.regs_per_class; ++i) {
    fs.regs64.push_back(mach.regs.read({RegClass::BYTES64, i}));
    fs.regsl.push_back(mach.regs.read({RegClass::LINES2048, i}));
  }
  fs.memory = mach.mem.bytes();
  return fs;
}

// ---------------------------------------------------------------------------
// Pipelined discrete-event executor.

namespace {

struct Channel {
  RegClass cls = RegClass::LINES2048;
  uint32_t phys = 0;
  int64_t producer_seq = kNoSeq;
  size_t producer_slot = 0;
  int64_t consumer_seq = kNoSeq;
  size_t consumer_slot = 0;
  bool paired = false;    // a stream reader claimed this channel
  bool unpaired = false;  // fell back to a whole-register dependency
  bool producer_dispatched = false;
  uint64_t bytes = 0;
  uint32_t n_chunks = 0;
  uint32_t pushes_done = 0;
  uint32_t pops_done = 0;
  std::vector<uint64_t> push_end;
  int64_t waiting_push = kNoSeq;  // parked producer
  int64_t waiting_pop = kNoSeq;   // parked consumer
};

struct PhysReg {
  std::vector<uint8_t> buf;
  int64_t writer_seq = kNoSeq;
  std::vector<uint64_t> readers_since;  // reader seqs since last writer
  int open_channel = -1;                // unresolved stream channel, if any
  // renaming bookkeeping
  bool free = false;
  bool superseded = false;
};

struct Dyn {
  uint64_t seq = 0;
  uint64_t sidx = 0;
  const Instruction* ins = nullptr;
  const CodeletDefinition* def = nullptr;
  InstrKind kind = InstrKind::CONTROL;

  // per operand, kNoPhys when not applicable
  std::vector<int64_t> read_phys;
  std::vector<int64_t> write_phys;
  std::vector<int64_t> dep_writer;   // per operand writer seq at fetch
  std::vector<int> channel_by_slot;  // paired input / own output channel

  std::vector<uint64_t> war_wait;  // reader seqs that must finish first
  int64_t waw_wait = kNoSeq;

  enum class St { WAITING, QUEUED, RUNNING, PARKED, DONE } st = St::WAITING;
  int resource = -1;
  uint64_t memcod_ord = 0;  // fetch-order rank among memory codelets
  bool started = false;
  bool functional_done = false;
  bool stream_paired_any = false;
  uint64_t start = 0, end = 0;
  uint64_t cost = 0;

  struct Item {
    int ch = -1;
    bool is_push = false;
    uint32_t chunk = 0;
    uint64_t cost = 1;
  };
  std::vector<Item> items;
  size_t item_idx = 0;
};

struct Event {
  uint64_t time = 0;
  uint64_t serial = 0;
  enum class Type { CONTROL_DONE, ITEM_DONE, COMPLETION } type;
  uint64_t seq = 0;
  bool operator>(const Event& o) const {
    return std::tie(time, serial) > std::tie(o.time, o.serial);
  }
};

class PipelineSim {
 public:
  PipelineSim(const Program& p, const Machine& m, const Registry& reg,
              const CostModel& costs)
      : prog_(p), registry_(reg), costs_(costs), cfg_(m.cfg), mem_(m.mem) {
    uint32_t phys_count =
        cfg_.renaming_enabled ? cfg_.physical_regs_per_class : cfg_.regs_per_class;
    for (int cls = 0; cls < 2; ++cls) {
      auto& pool = pool_[cls];
      pool.resize(phys_count);
      size_t bytes = cfg_.reg_bytes(RegClass(cls));
      for (uint32_t i = 0; i < phys_count; ++i) {
        pool[i].buf.assign(bytes, 0);
        pool[i].free = i >= cfg_.regs_per_class;
      }
      arch_map_[cls].resize(cfg_.regs_per_class);
      for (uint32_t i = 0; i < cfg_.regs_per_class; ++i)
        arch_map_[cls][i] = i;
      // seed architectural values
      for (uint32_t i = 0; i < cfg_.regs_per_class; ++i) {
        auto v = m.regs.view({RegClass(cls), i});
        std::copy(v.begin(), v.end(), pool[i].buf.begin());
      }
    }
    resource_busy_.assign(1 + cfg_.cu_count + cfg_.mcu_count, false);
  }

  RunResult run();

 private:
  // -- fetch side -----------------------------------------------------------
  void pump();
  bool try_fetch_one();
  bool fetch_control(const Instruction& ins);
  void fetch_codelet(const Instruction& ins);
  void resolve_open_channel(PhysReg& pr, bool wake);
  void resolve_all_open_channels();
  bool rescue_unpaired_channels();
  int64_t alloc_phys(RegClass cls);

  // -- issue/execute side ---------------------------------------------------
  bool dyn_ready(Dyn& d, uint64_t& ready_cycle);
  void assign_resources();
  void start_exec(Dyn& d, int res);
  void run_functional(Dyn& d);
  void build_items(Dyn& d);
  void run_items(Dyn& d, uint64_t t);
  void complete_dyn(Dyn& d, uint64_t t);
  void handle_event(const Event& ev);
  void maybe_free_phys();

  void push_event(uint64_t time, Event::Type type, uint64_t seq) {
    events_.push({time, serial_++, type, seq});
  }
  void emit(uint32_t res, const Dyn& d, uint64_t s, uint64_t e, EventKind k,
            int32_t chunk = -1, bool is_push = false) {
    trace_.push_back({resource_name(cfg_, res), res, d.seq, d.sidx,
                      d.kind == InstrKind::CONTROL
                          ? std::string(mnemonic(d.ins->control.op))
                          : d.ins->name,
                      s, e, k, chunk, is_push});
    makespan_ = std::max(makespan_, e);
  }

  PhysReg& phys(RegClass cls, int64_t id) { return pool_[int(cls)][size_t(id)]; }
  Dyn* dyn_of(int64_t seq) {
    return seq < 0 ? nullptr : &dyns_[size_t(seq)];
  }
  bool seq_done(int64_t seq) {
    Dyn* d = dyn_of(seq);
    return !d || d->st == Dyn::St::DONE;
  }
  uint64_t seq_end(int64_t seq) {
    Dyn* d = dyn_of(seq);
    return d ? d->end : 0;
  }

  const Program& prog_;
  const Registry& registry_;
  const CostModel& costs_;
  MachineConfig cfg_;
  MainMemory mem_;

  std::vector<PhysReg> pool_[2];
  std::vector<uint32_t> arch_map_[2];
  std::vector<Channel> channels_;
  std::deque<Dyn> dyns_;
  std::vector<uint64_t> retiring_phys_[2];  // superseded, waiting to free

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  uint64_t serial_ = 0;
  uint64_t now_ = 0;
  uint64_t makespan_ = 0;

  // resources: ordinal 0 is the SU, then CUs, then MCUs
  std::vector<bool> resource_busy_;

  int64_t pc_ = 0;
  bool halted_ = false;
  bool control_in_flight_ = false;
  TerminationCause cause_ = TerminationCause::END_OF_PROGRAM;
  uint64_t su_free_ = 0;
  uint64_t committed_ = 0;
  uint32_t inflight_ = 0;
  uint64_t fetched_ = 0;
  uint64_t memcods_fetched_ = 0;
  uint64_t memcods_started_ = 0;
  bool fetch_stalled_ = false;
  uint64_t stall_begin_ = 0;

  std::vector<ScheduleEntry> schedule_;
  std::vector<TraceEvent> trace_;
};

int64_t PipelineSim::alloc_phys(RegClass cls) {
  auto& pool = pool_[int(cls)];
  for (size_t i = 0; i < pool.size(); ++i)
    if (pool[i].free) {
      pool[i].free = false;
      pool[i].superseded = false;
      pool[i].writer_seq = kNoSeq;
      pool[i].readers_since.clear();
      pool[i].open_channel = -1;
      return int64_t(i);
    }
  return kNoSeq;
}

void PipelineSim::resolve_all_open_channels() {
  // Fetch has halted: no reader can ever pair a still-open channel, so
  // every one degrades to a whole-register write.
  for (auto& pool : pool_)
    for (PhysReg& pr : pool) resolve_open_channel(pr, true);
}

void PipelineSim::resolve_open_channel(PhysReg& pr, bool wake) {
  if (pr.open_channel < 0) return;
  Channel& ch = channels_[size_t(pr.open_channel)];
  if (!ch.paired && !ch.unpaired) {
    ch.unpaired = true;
    if (wake && ch.waiting_push != kNoSeq) {
      Dyn& prod = *dyn_of(ch.waiting_push);
      ch.waiting_push = kNoSeq;
      if (prod.st == Dyn::St::PARKED) prod.st = Dyn::St::QUEUED;
    }
  }
  pr.open_channel = -1;
}

bool PipelineSim::fetch_control(const Instruction& ins) {
  const ControlPayload& c = ins.control;
  // Source registers read the architectural (fetch-order) mapping.
  std::vector<RegisterName> sources;
  RegisterName dest{};
  bool has_dest = false;
  switch (c.op) {
    case ControlOp::LDIMM:
      dest = c.regs[0];
      has_dest = true;
      break;
    case ControlOp::ADD:
    case ControlOp::SUB:
    case ControlOp::MULT:
      dest = c.regs[0];
      has_dest = true;
      sources = {c.regs[1], c.regs[2]};
      break;
    case ControlOp::BREQ:
    case ControlOp::BRNE:
    case ControlOp::BRLT:
      sources = {c.regs[0], c.regs[1]};
      break;
    case ControlOp::JMPLBL:
    case ControlOp::COMMIT:
      break;
  }
  for (RegisterName r : sources) {
    PhysReg& pr = phys(r.cls, arch_map_[int(r.cls)][r.index]);
    if (!seq_done(pr.writer_seq)) {
      if (!fetch_stalled_) {
        fetch_stalled_ = true;
        stall_begin_ = std::max(now_, su_free_);
      }
      return false;
    }
  }
  int64_t dest_phys = kNoSeq;
  int64_t old_dest_phys = kNoSeq;
  if (has_dest) {
    old_dest_phys = arch_map_[int(dest.cls)][dest.index];
    PhysReg& old_pr = phys(dest.cls, old_dest_phys);
    if (cfg_.renaming_enabled) {
      dest_phys = alloc_phys(dest.cls);
      if (dest_phys == kNoSeq) {
        if (!fetch_stalled_) {
          fetch_stalled_ = true;
          stall_begin_ = std::max(now_, su_free_);
        }
        return false;  // wait for a physical register to free
      }
    } else {
      // scoreboard: wait for the old value's readers and writer
      if (!seq_done(old_pr.writer_seq)) {
        if (!fetch_stalled_) {
          fetch_stalled_ = true;
          stall_begin_ = std::max(now_, su_free_);
        }
        return false;
      }
      for (uint64_t rseq : old_pr.readers_since)
        if (!seq_done(int64_t(rseq))) {
          if (!fetch_stalled_) {
            fetch_stalled_ = true;
            stall_begin_ = std::max(now_, su_free_);
          }
          return false;
        }
      dest_phys = old_dest_phys;
    }
  }

  // Ready: execute on the SU now.
  uint64_t seq = fetched_++;
  if (fetched_ > cfg_.max_dynamic_instructions)
    throw runtime_fault("dynamic instruction limit exceeded (" +
                        std::to_string(cfg_.max_dynamic_instructions) + ")");
  dyns_.emplace_back();
  Dyn& d = dyns_.back();
  d.seq = seq;
  d.sidx = uint64_t(pc_);
  d.ins = &ins;
  d.kind = InstrKind::CONTROL;
  d.st = Dyn::St::RUNNING;
  d.resource = 0;

  uint64_t start = std::max(now_, su_free_);
  if (fetch_stalled_) {
    if (start > stall_begin_)
      emit(0, d, stall_begin_, start, EventKind::STALL);
    fetch_stalled_ = false;
  }
  auto read = [&](RegisterName r) {
    return load_u64(phys(r.cls, arch_map_[int(r.cls)][r.index]).buf);
  };
  ControlEffect e = eval_control(c, read, pc_);
  if (e.writes) {
    if (cfg_.renaming_enabled) {
      PhysReg& old_pr = phys(dest.cls, old_dest_phys);
      old_pr.superseded = true;
      resolve_open_channel(old_pr, true);
      retiring_phys_[int(dest.cls)].push_back(uint64_t(old_dest_phys));
      arch_map_[int(dest.cls)][dest.index] = uint32_t(dest_phys);
    }
    PhysReg& pr = phys(dest.cls, dest_phys);
    resolve_open_channel(pr, true);
    std::fill(pr.buf.begin(), pr.buf.end(), 0);
    store_u64(pr.buf, e.value);
    pr.writer_seq = int64_t(seq);
    pr.readers_since.clear();
  }
  d.start = start;
  d.end = start + std::max<uint64_t>(1, costs_.control_op_cycles);
  su_free_ = d.end;
  emit(0, d, d.start, d.end, EventKind::EXECUTE);
  schedule_.push_back({d.seq, d.sidx, mnemonic(c.op), "SU", InstrKind::CONTROL,
                       d.start, d.end, false});
  if (e.next_pc < 0) {
    halted_ = true;
    cause_ = TerminationCause::COMMIT;
    resolve_all_open_channels();
  } else {
    pc_ = e.next_pc;
  }
  control_in_flight_ = true;
  push_event(d.end, Event::Type::CONTROL_DONE, seq);
  return true;
}

void PipelineSim::fetch_codelet(const Instruction& ins) {
  const CodeletDefinition& def = registry_.lookup(ins.name);
  uint64_t seq = fetched_;

  // Renaming allocations first; bail without side effects if the pool is dry.
  std::vector<int64_t> fresh(def.slots.size(), kNoSeq);
  if (cfg_.renaming_enabled) {
    std::vector<int64_t> allocated;
    bool ok = true;
    for (size_t i = 0; i < def.slots.size() && ok; ++i) {
      if (def.slots[i].dir == Direction::READ) continue;
      fresh[i] = alloc_phys(ins.operands[i].cls);
      if (fresh[i] == kNoSeq)
        ok = false;
      else
        allocated.push_back(int64_t(i));
    }
    if (!ok) {
      for (int64_t i : allocated) {
        PhysReg& pr = phys(ins.operands[size_t(i)].cls, fresh[size_t(i)]);
        pr.free = true;
      }
      if (!fetch_stalled_) {
        fetch_stalled_ = true;
        stall_begin_ = std::max(now_, su_free_);
      }
      return;
    }
  }
  fetched_++;
  if (fetched_ > cfg_.max_dynamic_instructions)
    throw runtime_fault("dynamic instruction limit exceeded (" +
                        std::to_string(cfg_.max_dynamic_instructions) + ")");
  fetch_stalled_ = false;
  dyns_.emplace_back();
  Dyn& d = dyns_.back();
  d.seq = seq;
  d.sidx = uint64_t(pc_);
  d.ins = &ins;
  d.def = &def;
  d.kind = ins.kind;
  if (d.kind == InstrKind::MEMCOD) d.memcod_ord = memcods_fetched_++;
  d.read_phys.assign(def.slots.size(), kNoSeq);
  d.write_phys.assign(def.slots.size(), kNoSeq);
  d.dep_writer.assign(def.slots.size(), kNoSeq);
  d.channel_by_slot.assign(def.slots.size(), -1);

  // Reads first: they see the mapping before this instruction's own writes.
  for (size_t i = 0; i < def.slots.size(); ++i) {
    const OperandSlot& slot = def.slots[i];
    if (slot.dir == Direction::WRITE) continue;
    RegisterName r = ins.operands[i];
    int64_t pid = arch_map_[int(r.cls)][r.index];
    PhysReg& pr = phys(r.cls, pid);
    d.read_phys[i] = pid;
    d.dep_writer[i] = pr.writer_seq;
    bool first_reader = pr.readers_since.empty();
    if (pr.open_channel >= 0 && first_reader) {
      Channel& ch = channels_[size_t(pr.open_channel)];
      if (slot.stream && slot.dir == Direction::READ) {
        ch.paired = true;
        ch.consumer_seq = int64_t(seq);
        ch.consumer_slot = i;
        d.channel_by_slot[i] = pr.open_channel;
        d.stream_paired_any = true;
        pr.open_channel = -1;  // one consumer per pairing
      } else {
        resolve_open_channel(pr, true);  // mismatch: whole-register fallback
      }
    } else if (pr.open_channel >= 0) {
      resolve_open_channel(pr, true);
    }
    pr.readers_since.push_back(seq);
  }
  for (size_t i = 0; i < def.slots.size(); ++i) {
    const OperandSlot& slot = def.slots[i];
    if (slot.dir == Direction::READ) continue;
    RegisterName r = ins.operands[i];
    int cls = int(r.cls);
    int64_t old_pid = arch_map_[cls][r.index];
    PhysReg& old_pr = phys(r.cls, old_pid);
    if (cfg_.renaming_enabled) {
      // a superseded writer's unresolved stream can never pair now
      resolve_open_channel(old_pr, true);
      old_pr.superseded = true;
      retiring_phys_[cls].push_back(uint64_t(old_pid));
      int64_t pid = fresh[i];
      arch_map_[cls][r.index] = uint32_t(pid);
      PhysReg& pr = phys(r.cls, pid);
      pr.writer_seq = int64_t(seq);
      pr.readers_since.clear();
      d.write_phys[i] = pid;
    } else {
      resolve_open_channel(old_pr, true);
      for (uint64_t rseq : old_pr.readers_since)
        if (rseq != seq) d.war_wait.push_back(rseq);
      if (old_pr.writer_seq != kNoSeq) d.waw_wait = old_pr.writer_seq;
      old_pr.writer_seq = int64_t(seq);
      old_pr.readers_since.clear();
      d.write_phys[i] = old_pid;
    }
    if (slot.stream && slot.dir == Direction::WRITE) {
      Channel ch;
      ch.cls = r.cls;
      ch.phys = uint32_t(d.write_phys[i]);
      ch.producer_seq = int64_t(seq);
      ch.producer_slot = i;
      channels_.push_back(ch);
      int id = int(channels_.size()) - 1;
      phys(r.cls, d.write_phys[i]).open_channel = id;
      d.channel_by_slot[i] = id;
    }
  }
  ++inflight_;
}

bool PipelineSim::try_fetch_one() {
  if (halted_ || control_in_flight_) return false;
  if (pc_ < 0 || size_t(pc_) >= prog_.instructions.size()) {
    halted_ = true;
    cause_ = TerminationCause::END_OF_PROGRAM;
    resolve_all_open_channels();
    return false;
  }
  const Instruction& ins = prog_.instructions[size_t(pc_)];
  if (ins.kind == InstrKind::CONTROL) return fetch_control(ins);
  if (inflight_ >= cfg_.max_inflight) {
    if (!fetch_stalled_) {
      fetch_stalled_ = true;
      stall_begin_ = std::max(now_, su_free_);
    }
    return false;
  }
  uint64_t before = fetched_;
  fetch_codelet(ins);
  if (fetched_ == before) return false;
  ++pc_;
  return true;
}

bool PipelineSim::dyn_ready(Dyn& d, uint64_t& ready_cycle) {
  ready_cycle = now_;
  // Main memory is shared state outside the register scoreboard: memory
  // codelets must take their memory effects in program order.
  if (d.kind == InstrKind::MEMCOD && !d.started &&
      d.memcod_ord > memcods_started_)
    return false;
  for (size_t i = 0; i < d.dep_writer.size(); ++i) {
    if (d.read_phys[i] == kNoSeq) continue;
    int ch_id = d.channel_by_slot[i];
    bool paired_input = ch_id >= 0 && d.def->slots[i].dir == Direction::READ;
    if (paired_input) {
      Channel& ch = channels_[size_t(ch_id)];
      if (!ch.producer_dispatched) return false;
      if (ch.n_chunks == 0) {
        if (!seq_done(ch.producer_seq)) return false;
        ready_cycle = std::max(ready_cycle, seq_end(ch.producer_seq));
      } else {
        if (ch.pushes_done == 0) return false;
        ready_cycle = std::max(ready_cycle, ch.push_end[0]);
      }
      continue;
    }
    int64_t w = d.dep_writer[i];
    if (w != kNoSeq) {
      if (!seq_done(w)) return false;
      ready_cycle =
          std::max(ready_cycle, seq_end(w) + costs_.dispatch_cycles);
    }
  }
  for (uint64_t rseq : d.war_wait) {
    if (!seq_done(int64_t(rseq))) return false;
    ready_cycle = std::max(ready_cycle, seq_end(int64_t(rseq)));
  }
  if (d.waw_wait != kNoSeq) {
    if (!seq_done(d.waw_wait)) return false;
    ready_cycle = std::max(ready_cycle, seq_end(d.waw_wait));
  }
  return true;
}

void PipelineSim::assign_resources() {
  // CUs run compute codelets, MCUs memory codelets; lowest sequence first.
  for (int pass = 0; pass < 2; ++pass) {
    InstrKind want = pass == 0 ? InstrKind::COD : InstrKind::MEMCOD;
    uint32_t first = pass == 0 ? 1 : 1 + cfg_.cu_count;
    uint32_t count = pass == 0 ? cfg_.cu_count : cfg_.mcu_count;
    for (uint32_t r = first; r < first + count; ++r) {
      if (resource_busy_[r]) continue;
      Dyn* best = nullptr;
      for (Dyn& d : dyns_) {
        if (d.kind != want) continue;
        if (d.st != Dyn::St::QUEUED) continue;
        if (!best || d.seq < best->seq) best = &d;
      }
      if (best) start_exec(*best, int(r));
    }
  }
}

void PipelineSim::start_exec(Dyn& d, int res) {
  d.resource = res;
  d.st = Dyn::St::RUNNING;
  resource_busy_[size_t(res)] = true;
  uint64_t t0 = now_;
  if (!d.started) {
    uint64_t ready_cycle = 0;
    bool ok = dyn_ready(d, ready_cycle);
    assert(ok);
    (void)ok;
    t0 = std::max(now_, ready_cycle);
    d.start = t0;
    d.started = true;
    run_functional(d);
    build_items(d);
    if (d.kind == InstrKind::MEMCOD) ++memcods_started_;
  }
  if (d.items.empty()) {
    d.end = d.start + std::max<uint64_t>(1, d.cost);
    emit(uint32_t(res), d, d.start, d.end, EventKind::EXECUTE);
    push_event(d.end, Event::Type::COMPLETION, d.seq);
  } else {
    run_items(d, t0);
  }
}

void PipelineSim::run_functional(Dyn& d) {
  const CodeletDefinition& def = *d.def;
  std::vector<std::span<const uint8_t>> in(def.slots.size());
  std::vector<std::span<uint8_t>> out(def.slots.size());
  std::vector<uint64_t> stream_len(def.slots.size(), 0);
  std::vector<std::vector<uint8_t>> out_bufs(def.slots.size());
  uint64_t operand_bytes = 0;
  for (size_t i = 0; i < def.slots.size(); ++i) {
    size_t bytes = cfg_.reg_bytes(def.slots[i].cls);
    if (def.slots[i].dir != Direction::WRITE)
      in[i] = phys(def.slots[i].cls, d.read_phys[i]).buf;
    if (def.slots[i].dir != Direction::READ) {
      out_bufs[i].assign(bytes, 0);
      out[i] = out_bufs[i];
    }
    int ch_id = d.channel_by_slot[i];
    if (ch_id >= 0 && def.slots[i].dir == Direction::READ) {
      // materialized view stays class-sized; only the cost uses streamed bytes
      stream_len[i] = bytes;
      operand_bytes += channels_[size_t(ch_id)].bytes;
    } else if (def.slots[i].stream && def.slots[i].dir == Direction::READ) {
      stream_len[i] = bytes;  // fallback: whole register
      operand_bytes += bytes;
    } else {
      stream_len[i] = bytes;
      if (!(def.slots[i].stream && def.slots[i].dir == Direction::WRITE))
        operand_bytes += bytes;
    }
  }
  CodeletOutcome outcome;
  try {
    outcome = execute_codelet(def, in, out, stream_len, &mem_,
                              cfg_.fifo_chunk_bytes);
  } catch (const sandbox_violation&) {
    throw;
  } catch (const runtime_fault& e) {
    throw runtime_fault("instruction " + std::to_string(d.sidx) + " (" +
                        def.name + "): " + e.what());
  }
  for (size_t i = 0; i < def.slots.size(); ++i) {
    if (def.slots[i].dir == Direction::READ) continue;
    PhysReg& pr = phys(def.slots[i].cls, d.write_phys[i]);
    std::copy(out_bufs[i].begin(), out_bufs[i].end(), pr.buf.begin());
    int ch_id = d.channel_by_slot[i];
    if (ch_id >= 0 && def.slots[i].dir == Direction::WRITE) {
      Channel& ch = channels_[size_t(ch_id)];
      ch.bytes = outcome.pushed_bytes[i];
      ch.n_chunks = uint32_t(ceil_div(ch.bytes, cfg_.fifo_chunk_bytes));
      ch.push_end.assign(ch.n_chunks, 0);
      ch.producer_dispatched = true;
      operand_bytes += ch.bytes;
    }
  }
  d.cost = cost_cycles(costs_, def.name, operand_bytes,
                       def.kind == CodeletKind::MEMORY, outcome.mem_bytes);
}

void PipelineSim::build_items(Dyn& d) {
  struct Raw {
    double frac;
    size_t slot;
    Dyn::Item item;
  };
  std::vector<Raw> raw;
  for (size_t i = 0; i < d.channel_by_slot.size(); ++i) {
    int ch_id = d.channel_by_slot[i];
    if (ch_id < 0) continue;
    Channel& ch = channels_[size_t(ch_id)];
    bool is_push = d.def->slots[i].dir == Direction::WRITE;
    if (is_push && ch.unpaired) continue;  // plain whole-register write
    for (uint32_t c = 0; c < ch.n_chunks; ++c)
      raw.push_back({(c + 0.5) / double(ch.n_chunks), i,
                     {ch_id, is_push, c, 1}});
  }
  if (raw.empty()) return;
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    return a.frac < b.frac || (a.frac == b.frac && a.slot < b.slot);
  });
  uint64_t n = raw.size();
  uint64_t base = d.cost / n, rem = d.cost % n;
  d.items.reserve(raw.size());
  for (uint64_t i = 0; i < n; ++i) {
    raw[i].item.cost = std::max<uint64_t>(1, base + (i < rem ? 1 : 0));
    d.items.push_back(raw[i].item);
  }
}

void PipelineSim::run_items(Dyn& d, uint64_t t) {
  while (d.item_idx < d.items.size()) {
    Dyn::Item& item = d.items[d.item_idx];
    Channel& ch = channels_[size_t(item.ch)];
    if (item.is_push) {
      bool blocked = !ch.unpaired &&
                     ch.pushes_done - ch.pops_done >= cfg_.fifo_depth_chunks;
      if (blocked) {
        ch.waiting_push = int64_t(d.seq);
        d.st = Dyn::St::PARKED;
        resource_busy_[size_t(d.resource)] = false;
        d.resource = -1;
        return;
      }
    } else {
      if (ch.pushes_done <= item.chunk) {
        ch.waiting_pop = int64_t(d.seq);
        d.st = Dyn::St::PARKED;
        resource_busy_[size_t(d.resource)] = false;
        d.resource = -1;
        return;
      }
      t = std::max(t, ch.push_end[item.chunk]);
    }
    uint64_t end = t + item.cost;
    emit(uint32_t(d.resource), d, t, end, EventKind::STREAM_CHUNK,
         int32_t(item.chunk), item.is_push);
    push_event(end, Event::Type::ITEM_DONE, d.seq);
    return;  // one in-flight item at a time
  }
  complete_dyn(d, t);
}

void PipelineSim::complete_dyn(Dyn& d, uint64_t t) {
  d.end = std::max(t, d.start + 1);
  d.st = Dyn::St::DONE;
  if (d.resource >= 0) resource_busy_[size_t(d.resource)] = false;
  ++committed_;
  --inflight_;
  schedule_.push_back({d.seq, d.sidx, d.ins->name,
                       resource_name(cfg_, d.resource < 0 ? 0 : uint32_t(d.resource)),
                       d.kind, d.start, d.end, d.stream_paired_any});
  makespan_ = std::max(makespan_, d.end);
  // producers of empty or unpaired streams unblock their readers here
  for (int ch_id : d.channel_by_slot) {
    if (ch_id < 0) continue;
    Channel& ch = channels_[size_t(ch_id)];
    if (ch.producer_seq == int64_t(d.seq) && ch.waiting_pop != kNoSeq) {
      Dyn& cons = *dyn_of(ch.waiting_pop);
      ch.waiting_pop = kNoSeq;
      if (cons.st == Dyn::St::PARKED) cons.st = Dyn::St::QUEUED;
    }
  }
  maybe_free_phys();
}

void PipelineSim::maybe_free_phys() {
  if (!cfg_.renaming_enabled) return;
  for (int cls = 0; cls < 2; ++cls) {
    auto& list = retiring_phys_[cls];
    for (size_t i = 0; i < list.size();) {
      PhysReg& pr = pool_[cls][list[i]];
      bool writer_ok = seq_done(pr.writer_seq);
      bool readers_ok = true;
      for (uint64_t rseq : pr.readers_since)
        if (!seq_done(int64_t(rseq))) {
          readers_ok = false;
          break;
        }
      if (pr.superseded && writer_ok && readers_ok) {
        pr.free = true;
        pr.superseded = false;
        list[i] = list.back();
        list.pop_back();
      } else {
        ++i;
      }
    }
  }
}

void PipelineSim::handle_event(const Event& ev) {
  now_ = std::max(now_, ev.time);
  Dyn& d = dyns_[size_t(ev.seq)];
  switch (ev.type) {
    case Event::Type::CONTROL_DONE:
      d.st = Dyn::St::DONE;
      ++committed_;
      control_in_flight_ = false;
      maybe_free_phys();
      break;
    case Event::Type::COMPLETION:
      complete_dyn(d, ev.time);
      break;
    case Event::Type::ITEM_DONE: {
      Dyn::Item& item = d.items[d.item_idx];
      Channel& ch = channels_[size_t(item.ch)];
      if (item.is_push) {
        ch.push_end[item.chunk] = ev.time;
        ch.pushes_done++;
        if (ch.waiting_pop != kNoSeq) {
          Dyn& cons = *dyn_of(ch.waiting_pop);
          ch.waiting_pop = kNoSeq;
          if (cons.st == Dyn::St::PARKED) cons.st = Dyn::St::QUEUED;
        }
      } else {
        ch.pops_done++;
        if (ch.waiting_push != kNoSeq) {
          Dyn& prod = *dyn_of(ch.waiting_push);
          ch.waiting_push = kNoSeq;
          if (prod.st == Dyn::St::PARKED) prod.st = Dyn::St::QUEUED;
        }
      }
      d.item_idx++;
      run_items(d, ev.time);
      break;
    }
  }
}

void PipelineSim::pump() {
  bool progress = true;
  while (progress) {
    progress = false;
    while (try_fetch_one()) progress = true;
    for (Dyn& d : dyns_) {
      if (d.st != Dyn::St::WAITING) continue;
      uint64_t ready_cycle = 0;
      if (dyn_ready(d, ready_cycle)) {
        d.st = Dyn::St::QUEUED;
        progress = true;
      }
    }
    size_t events_before = serial_;
    assign_resources();
    if (serial_ != events_before) progress = true;
  }
}

bool PipelineSim::rescue_unpaired_channels() {
  // Quiescent with work pending: any channel that never found its reader can
  // no longer pair (the reader is unreachable without the producer's
  // completion), so degrade it to a whole-register write.
  bool changed = false;
  for (size_t id = 0; id < channels_.size(); ++id) {
    Channel& ch = channels_[id];
    if (ch.paired || ch.unpaired) continue;
    ch.unpaired = true;
    changed = true;
    PhysReg& pr = pool_[int(ch.cls)][ch.phys];
    if (pr.open_channel == int(id)) pr.open_channel = -1;
    if (ch.waiting_push != kNoSeq) {
      Dyn& prod = *dyn_of(ch.waiting_push);
      ch.waiting_push = kNoSeq;
      if (prod.st == Dyn::St::PARKED) prod.st = Dyn::St::QUEUED;
    }
  }
  return changed;
}

RunResult PipelineSim::run() {
  pump();
  while (true) {
    if (events_.empty()) {
      bool done = halted_ && inflight_ == 0 && !control_in_flight_;
      if (done || !rescue_unpaired_channels()) break;
      pump();
      continue;
    }
    Event ev = events_.top();
    events_.pop();
    handle_event(ev);
    pump();
  }
  if (!halted_ || inflight_ > 0 || control_in_flight_) {
    std::ostringstream msg;
    msg << "deadlock: no runnable work;";
    for (const Dyn& d : dyns_)
      if (d.st != Dyn::St::DONE)
        msg << " seq " << d.seq << " ("
            << (d.kind == InstrKind::CONTROL ? "control" : d.ins->name)
            << ") state "
            << (d.st == Dyn::St::PARKED ? "parked" : "waiting") << ";";
    if (!halted_) msg << " fetch blocked at pc " << pc_ << ";";
    throw deadlock_error(msg.str());
  }

  RunResult result;
  FinalState& fs = result.final_state;
  fs.cause = cause_;
  fs.committed = committed_;
  for (uint32_t i = 0; i < cfg_.regs_per_class; ++i) {
    fs.regs64.push_back(pool_[0][arch_map_[0][i]].buf);
    fs.regsl.push_back(pool_[1][arch_map_[1][i]].buf);
  }
  fs.memory = mem_.bytes();
  std::sort(schedule_.begin(), schedule_.end(),
            [](const ScheduleEntry& a, const ScheduleEntry& b) {
              return a.seq < b.seq;
            });
  result.schedule = std::move(schedule_);
  result.trace = std::move(trace_);
  result.makespan = makespan_;
  return result;
}

}  // namespace

namespace detail {

RunResult simulate_core(const Program& p, const Machine& m,
                        const Registry& reg, const CostModel& costs) {
  return PipelineSim(p, m, reg, costs).run();
}

}  // namespace detail

RunResult run_pipelined(const Program& p, const Machine& m,
                        const Registry& reg) {
  CostModel defaults;
  return detail::simulate_core(p, m, reg, defaults);
}

}  // namespace scm
