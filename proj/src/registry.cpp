#include "scm/registry.hpp"

#include <algorithm>

namespace scm {

ExecContext::Operand& ExecContext::at(size_t i) {
  if (i >= operands_.size()) throw runtime_fault("operand index out of range");
  return operands_[i];
}

const ExecContext::Operand& ExecContext::at(size_t i) const {
  return const_cast<ExecContext*>(this)->at(i);
}

std::span<const uint8_t> ExecContext::in(size_t i) const {
  const Operand& op = at(i);
  if (op.slot.dir == Direction::WRITE)
    throw runtime_fault("reading a WRITE-only operand");
  return op.in;
}

std::span<uint8_t> ExecContext::out(size_t i) {
  Operand& op = at(i);
  if (op.slot.dir == Direction::READ)
    throw runtime_fault("writing a READ-only operand");
  return op.out;
}

void ExecContext::push_chunk(size_t i, std::span<const uint8_t> chunk) {
  Operand& op = at(i);
  if (!(op.slot.stream && op.slot.dir == Direction::WRITE))
    throw runtime_fault("push_chunk on a non-streamed-output operand");
  if (op.pushed_bytes + chunk.size() > op.out.size())
    throw runtime_fault("stream overflows register capacity");
  std::copy(chunk.begin(), chunk.end(), op.out.begin() + op.pushed_bytes);
  op.pushed_bytes += chunk.size();
}

std::optional<std::span<const uint8_t>> ExecContext::pop_chunk(size_t i) {
  Operand& op = at(i);
  if (!(op.slot.stream && op.slot.dir == Direction::READ))
    throw runtime_fault("pop_chunk on a non-streamed-input operand");
  if (op.pop_cursor >= op.stream_in_bytes) return std::nullopt;
  size_t n = std::min<size_t>(fifo_chunk_bytes_,
                              op.stream_in_bytes - op.pop_cursor);
  std::span<const uint8_t> chunk(op.in.data() + op.pop_cursor, n);
  op.pop_cursor += n;
  return chunk;
}

MainMemory& ExecContext::memory() {
  if (!mem_)
    throw sandbox_violation(
        "compute codelet attempted main-memory access");
  return *mem_;
}

std::vector<uint8_t> ExecContext::mem_load(uint64_t addr, uint64_t len) {
  auto data = memory().load(addr, len);
  mem_bytes_ += len;
  return data;
}

void ExecContext::mem_store(uint64_t addr, std::span<const uint8_t> data) {
  memory().store(addr, data);
  mem_bytes_ += data.size();
}

void Registry::add(CodeletDefinition def) {
  if (def.name.empty()) throw std::invalid_argument("codelet name is empty");
  if (defs_.count(def.name))
    throw std::invalid_argument("duplicate codelet name '" + def.name + "'");
  for (const OperandSlot& s : def.slots) {
    if (s.stream && s.cls != RegClass::LINES2048)
      throw std::invalid_argument("streamed operand must be a line register ('" +
                                  def.name + "')");
    if (s.stream && s.dir == Direction::READWRITE)
      throw std::invalid_argument(
          "streamed operand cannot be READWRITE ('" + def.name + "')");
  }
  defs_.emplace(def.name, std::move(def));
}

const CodeletDefinition& Registry::lookup(const std::string& name) const {
  const CodeletDefinition* def = find(name);
  if (!def) throw std::out_of_range("unknown codelet '" + name + "'");
  return *def;
}

const CodeletDefinition* Registry::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  out.reserve(defs_.size());
  for (auto& [name, def] : defs_) out.push_back(name);
  return out;
}

namespace {

// addr/len live in the low 8 bytes of their 64-byte registers.
void builtin_load(ExecContext& ctx) {
  uint64_t addr = ctx.in_u64(1);
  uint64_t len = ctx.in_u64(2);
  auto dst = ctx.out(0);
  if (len > dst.size())
    throw runtime_fault("LoadContiguous length exceeds register size");
  auto data = ctx.mem_load(addr, len);
  std::copy(data.begin(), data.end(), dst.begin());
}

void builtin_store(ExecContext& ctx) {
  uint64_t addr = ctx.in_u64(1);
  uint64_t len = ctx.in_u64(2);
  auto src = ctx.in(0);
  if (len > src.size())
    throw runtime_fault("StoreContiguous length exceeds register size");
  ctx.mem_store(addr, src.subspan(0, len));
}

void builtin_stream(ExecContext& ctx) {
  uint64_t addr = ctx.in_u64(1);
  uint64_t len = ctx.in_u64(2);
  size_t cap = ctx.out(0).size();
  if (len > cap)
    throw runtime_fault("StreamContiguous length exceeds register size");
  uint64_t off = 0;
  while (off < len) {
    uint64_t n = std::min<uint64_t>(ctx.fifo_chunk_bytes(), len - off);
    auto data = ctx.mem_load(addr + off, n);
    ctx.push_chunk(0, data);
    off += n;
  }
}

}  // namespace

void register_builtins(Registry& reg) {
  using D = Direction;
  using C = RegClass;
  reg.add({kLoadContiguous,
           CodeletKind::MEMORY,
           {{C::LINES2048, D::WRITE, false},
            {C::BYTES64, D::READ, false},
            {C::BYTES64, D::READ, false}},
           builtin_load});
  reg.add({kStoreContiguous,
           CodeletKind::MEMORY,
           {{C::LINES2048, D::READ, false},
            {C::BYTES64, D::READ, false},
            {C::BYTES64, D::READ, false}},
           builtin_store});
  reg.add({kStreamContiguous,
           CodeletKind::MEMORY,
           {{C::LINES2048, D::WRITE, true},
            {C::BYTES64, D::READ, false},
            {C::BYTES64, D::READ, false}},
           builtin_stream});
}

}  // namespace scm
