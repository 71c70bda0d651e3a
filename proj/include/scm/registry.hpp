#ifndef SCM_REGISTRY_HPP
#define SCM_REGISTRY_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scm/machine.hpp"

namespace scm {

enum class Direction : uint8_t { READ, WRITE, READWRITE };
enum class CodeletKind : uint8_t { COMPUTE, MEMORY };

/// One declared operand of a codelet: register class, data direction and
/// whether the operand may be streamed through a FIFO overlay.
struct OperandSlot {
  RegClass cls = RegClass::BYTES64;
  Direction dir = Direction::READ;
  bool stream = false;
};

class ExecContext;
using CodeletImpl = std::function<void(ExecContext&)>;

struct CodeletDefinition {
  std::string name;
  CodeletKind kind = CodeletKind::COMPUTE;
  std::vector<OperandSlot> slots;
  CodeletImpl impl;  // may be empty for signature-only entries (cmd_check)
};

/// Per-operand view handed to a codelet implementation. Inputs are
/// isolated copies; outputs are committed to the register file by the
/// engine after the callback returns. Only MEMORY codelets get a main
/// memory handle; a COMPUTE codelet calling memory() receives the
/// sandbox-violation error.
class ExecContext {
 public:
  struct Operand {
    OperandSlot slot;
    std::vector<uint8_t> in;       // READ/READWRITE value (class size)
    std::vector<uint8_t> out;      // WRITE/READWRITE buffer (class size)
    uint64_t stream_in_bytes = 0;  // logical length of a streamed input
    uint64_t pushed_bytes = 0;     // appended through push_chunk
    size_t pop_cursor = 0;
  };

  ExecContext(std::vector<Operand> operands, MainMemory* mem,
              size_t fifo_chunk_bytes)
      : operands_(std::move(operands)),
        mem_(mem),
        fifo_chunk_bytes_(fifo_chunk_bytes) {}

  size_t operand_count() const { return operands_.size(); }
  const OperandSlot& slot(size_t i) const { return at(i).slot; }

  /// Full input view of operand i (class-size buffer). For a paired
  /// streamed input this is the concatenation of all chunks padded with
  /// zeros to the class size, so implementations behave identically with
  /// and without streaming.
  std::span<const uint8_t> in(size_t i) const;
  std::span<uint8_t> out(size_t i);

  uint64_t in_u64(size_t i) const { return load_u64(in(i)); }
  void out_u64(size_t i, uint64_t v) { store_u64(out(i), v); }

  /// Appends a chunk to a streamed output operand.
  void push_chunk(size_t i, std::span<const uint8_t> chunk);
  /// Pops the next chunk of a streamed input; nullopt at end-of-stream.
  std::optional<std::span<const uint8_t>> pop_chunk(size_t i);

  MainMemory& memory();
  std::vector<uint8_t> mem_load(uint64_t addr, uint64_t len);
  void mem_store(uint64_t addr, std::span<const uint8_t> data);

  uint64_t memory_bytes() const { return mem_bytes_; }
  size_t fifo_chunk_bytes() const { return fifo_chunk_bytes_; }
  uint64_t pushed_bytes(size_t i) const { return at(i).pushed_bytes; }
  uint64_t stream_in_bytes(size_t i) const { return at(i).stream_in_bytes; }

 private:
  Operand& at(size_t i);
  const Operand& at(size_t i) const;

  std::vector<Operand> operands_;
  MainMemory* mem_ = nullptr;  // null for COMPUTE codelets
  size_t fifo_chunk_bytes_ = 64;
  uint64_t mem_bytes_ = 0;
};

/// Write-once name -> definition table. Built-in memory codelets
/// (LoadContiguous, StoreContiguous, StreamContiguous) are added with
/// register_builtins.
class Registry {
 public:
  void add(CodeletDefinition def);
  const CodeletDefinition& lookup(const std::string& name) const;
  const CodeletDefinition* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, CodeletDefinition> defs_;
};

void register_builtins(Registry& reg);

/// Names for the built-in memory codelets.
inline constexpr const char* kLoadContiguous = "LoadContiguous";
inline constexpr const char* kStoreContiguous = "StoreContiguous";
inline constexpr const char* kStreamContiguous = "StreamContiguous";

}  // namespace scm

#endif  // SCM_REGISTRY_HPP
