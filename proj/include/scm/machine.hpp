#ifndef SCM_MACHINE_HPP
#define SCM_MACHINE_HPP

#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scm/errors.hpp"

namespace scm {

enum class RegClass : uint8_t { BYTES64, LINES2048 };

/// Architectural register id. The textual forms are R64B_<i> and R2048L_<i>.
struct RegisterName {
  RegClass cls = RegClass::BYTES64;
  uint32_t index = 0;
  auto operator<=>(const RegisterName&) const = default;
};

std::string to_string(RegisterName r);

struct MachineConfig {
  uint32_t cu_count = 4;
  uint32_t mcu_count = 1;
  uint32_t regs_per_class = 32;
  uint32_t line_bytes = 64;
  uint32_t lines_per_l_register = 2048;
  uint64_t main_memory_bytes = uint64_t(1) << 26;
  uint32_t fifo_chunk_bytes = 64;
  uint32_t fifo_depth_chunks = 16;
  bool renaming_enabled = false;
  uint32_t physical_regs_per_class = 64;
  uint32_t max_inflight = 64;
  uint64_t max_dynamic_instructions = 10'000'000;

  size_t reg_bytes(RegClass cls) const {
    return cls == RegClass::BYTES64 ? 64
                                    : size_t(lines_per_l_register) * line_bytes;
  }

  /// Throws std::invalid_argument on an inconsistent configuration.
  void check() const;

  /// Every field is optional in the JSON; missing fields keep their default.
  static MachineConfig from_json_text(const std::string& text);
  static MachineConfig from_json_file(const std::string& path);
};

/// Fixed pool of oversized byte-buffer registers, one array per class.
/// Buffers never change length; a fresh file is all zero bytes.
class RegisterFile {
 public:
  explicit RegisterFile(const MachineConfig& cfg);

  std::vector<uint8_t> read(RegisterName r) const;
  void write(RegisterName r, std::span<const uint8_t> data);

  std::span<const uint8_t> view(RegisterName r) const;
  std::span<uint8_t> mutate(RegisterName r);

  uint32_t count(RegClass cls) const;
  size_t reg_bytes(RegClass cls) const { return cfg_reg_bytes_[size_t(cls)]; }

 private:
  std::vector<uint8_t>& buffer(RegisterName r);
  const std::vector<uint8_t>& buffer(RegisterName r) const;

  std::vector<std::vector<uint8_t>> regs64_;
  std::vector<std::vector<uint8_t>> regsl_;
  size_t cfg_reg_bytes_[2];
};

/// Flat little-endian byte space. Only memory-codelet execution contexts
/// ever hold a reference to it.
class MainMemory {
 public:
  explicit MainMemory(uint64_t bytes) : data_(bytes, 0) {}

  std::vector<uint8_t> load(uint64_t addr, uint64_t len) const;
  void store(uint64_t addr, std::span<const uint8_t> data);

  std::span<const uint8_t> view(uint64_t addr, uint64_t len) const;
  uint64_t size() const { return data_.size(); }
  const std::vector<uint8_t>& bytes() const { return data_; }
  std::vector<uint8_t>& bytes() { return data_; }

 private:
  void check_range(uint64_t addr, uint64_t len) const;
  std::vector<uint8_t> data_;
};

/// Bounded chunk queue backing a streamed register for one
/// producer/consumer pairing. Full/empty are not errors: try_push and
/// try_pop report the blocking condition and the caller yields.
class FifoChannel {
 public:
  enum class PushResult { OK, FULL, CLOSED };
  enum class PopResult { OK, EMPTY, END_OF_STREAM };

  FifoChannel(size_t chunk_bytes, size_t capacity_chunks)
      : chunk_bytes_(chunk_bytes), capacity_(capacity_chunks) {}

  PushResult try_push(std::span<const uint8_t> chunk);
  PopResult try_pop(std::vector<uint8_t>& out);
  void close();  // sets end-of-stream; further pushes are rejected

  size_t size() const { return queue_.size(); }
  size_t capacity() const { return capacity_; }
  size_t chunk_bytes() const { return chunk_bytes_; }
  bool closed() const { return closed_; }
  uint64_t total_pushed_bytes() const { return pushed_bytes_; }
  uint64_t total_popped_bytes() const { return popped_bytes_; }

 private:
  size_t chunk_bytes_;
  size_t capacity_;
  std::deque<std::vector<uint8_t>> queue_;
  bool closed_ = false;
  uint64_t pushed_bytes_ = 0;
  uint64_t popped_bytes_ = 0;
};

/// Named region of a memory image.
struct Segment {
  uint64_t offset = 0;
  uint64_t length = 0;
};

using SegmentMap = std::map<std::string, Segment>;

/// Raw blob + JSON sidecar mapping symbolic names to {offset, length}.
void load_memory_image(MainMemory& mem, const std::string& blob_path,
                       const std::string& descriptor_path, SegmentMap* out);
void dump_memory_image(const MainMemory& mem, const std::string& blob_path);

SegmentMap parse_segment_descriptor(const std::string& json_text);

/// All architectural state the engines operate on.
struct Machine {
  explicit Machine(const MachineConfig& c)
      : cfg(c), regs(c), mem(c.main_memory_bytes) {}

  MachineConfig cfg;
  RegisterFile regs;
  MainMemory mem;
};

// Little-endian helpers used throughout the model.
uint64_t load_u64(std::span<const uint8_t> bytes);
void store_u64(std::span<uint8_t> bytes, uint64_t value);

}  // namespace scm

#endif  // SCM_MACHINE_HPP
