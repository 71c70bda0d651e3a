#include "scm/machine.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace scm {

std::string to_string(RegisterName r) {
  return (r.cls == RegClass::BYTES64 ? "R64B_" : "R2048L_") +
         std::to_string(r.index);
}

void MachineConfig::check() const {
  auto positive = [](uint64_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be > 0");
  };
  positive(cu_count, "cu_count");
  positive(mcu_count, "mcu_count");
  positive(regs_per_class, "regs_per_class");
  positive(line_bytes, "line_bytes");
  positive(lines_per_l_register, "lines_per_l_register");
  positive(main_memory_bytes, "main_memory_bytes");
  positive(fifo_chunk_bytes, "fifo_chunk_bytes");
  positive(fifo_depth_chunks, "fifo_depth_chunks");
  positive(max_inflight, "max_inflight");
  if ((uint64_t(lines_per_l_register) * line_bytes) % fifo_chunk_bytes != 0)
    throw std::invalid_argument(
        "fifo_chunk_bytes must divide lines_per_l_register * line_bytes");
  if (renaming_enabled && physical_regs_per_class < regs_per_class)
    throw std::invalid_argument(
        "physical_regs_per_class must be >= regs_per_class when renaming is "
        "enabled");
}

MachineConfig MachineConfig::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object())
    throw std::invalid_argument("machine config must be a JSON object");
  static const char* known[] = {
      "cu_count",          "mcu_count",        "regs_per_class",
      "line_bytes",        "lines_per_l_register", "main_memory_bytes",
      "fifo_chunk_bytes",  "fifo_depth_chunks", "renaming_enabled",
      "physical_regs_per_class", "max_inflight", "max_dynamic_instructions"};
  for (auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return key == k;
        }) == std::end(known))
      throw std::invalid_argument("unknown machine config key '" + key + "'");
  }
  MachineConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("cu_count", cfg.cu_count);
  get("mcu_count", cfg.mcu_count);
  get("regs_per_class", cfg.regs_per_class);
  get("line_bytes", cfg.line_bytes);
  get("lines_per_l_register", cfg.lines_per_l_register);
  get("main_memory_bytes", cfg.main_memory_bytes);
  get("fifo_chunk_bytes", cfg.fifo_chunk_bytes);
  get("fifo_depth_chunks", cfg.fifo_depth_chunks);
  get("renaming_enabled", cfg.renaming_enabled);
  get("physical_regs_per_class", cfg.physical_regs_per_class);
  get("max_inflight", cfg.max_inflight);
  get("max_dynamic_instructions", cfg.max_dynamic_instructions);
  cfg.check();
  return cfg;
}

MachineConfig MachineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

RegisterFile::RegisterFile(const MachineConfig& cfg) {
  cfg_reg_bytes_[size_t(RegClass::BYTES64)] = 64;
  cfg_reg_bytes_[size_t(RegClass::LINES2048)] =
      cfg.reg_bytes(RegClass::LINES2048);
  // Architectural namespace only; the engine keeps its own physical pool
  // when renaming is on.
  regs64_.assign(cfg.regs_per_class, std::vector<uint8_t>(64, 0));
  regsl_.assign(cfg.regs_per_class,
                std::vector<uint8_t>(cfg.reg_bytes(RegClass::LINES2048), 0));
}

std::vector<uint8_t>& RegisterFile::buffer(RegisterName r) {
  auto& pool = r.cls == RegClass::BYTES64 ? regs64_ : regsl_;
  if (r.index >= pool.size())
    throw runtime_fault("register index out of range: " + to_string(r));
  return pool[r.index];
}

const std::vector<uint8_t>& RegisterFile::buffer(RegisterName r) const {
  return const_cast<RegisterFile*>(this)->buffer(r);
}

std::vector<uint8_t> RegisterFile::read(RegisterName r) const {
  return buffer(r);
}

void RegisterFile::write(RegisterName r, std::span<const uint8_t> data) {
  auto& buf = buffer(r);
  if (data.size() != buf.size())
    throw runtime_fault("register write length mismatch on " + to_string(r) +
                        ": got " + std::to_string(data.size()) + ", want " +
                        std::to_string(buf.size()));
  std::copy(data.begin(), data.end(), buf.begin());
}

std::span<const uint8_t> RegisterFile::view(RegisterName r) const {
  return buffer(r);
}

std::span<uint8_t> RegisterFile::mutate(RegisterName r) { return buffer(r); }

uint32_t RegisterFile::count(RegClass cls) const {
  return uint32_t(cls == RegClass::BYTES64 ? regs64_.size() : regsl_.size());
}

void MainMemory::check_range(uint64_t addr, uint64_t len) const {
  if (addr > data_.size() || len > data_.size() - addr)
    throw runtime_fault("memory access out of bounds: [" +
                        std::to_string(addr) + ", " +
                        std::to_string(addr + len) + ") of " +
                        std::to_string(data_.size()));
}

std::vector<uint8_t> MainMemory::load(uint64_t addr, uint64_t len) const {
  check_range(addr, len);
  return std::vector<uint8_t>(data_.begin() + addr, data_.begin() + addr + len);
}

void MainMemory::store(uint64_t addr, std::span<const uint8_t> data) {
  check_range(addr, data.size());
  std::copy(data.begin(), data.end(), data_.begin() + addr);
}

std::span<const uint8_t> MainMemory::view(uint64_t addr, uint64_t len) const {
  check_range(addr, len);
  return std::span<const uint8_t>(data_.data() + addr, len);
}

FifoChannel::PushResult FifoChannel::try_push(std::span<const uint8_t> chunk) {
  if (closed_) return PushResult::CLOSED;
  if (queue_.size() >= capacity_) return PushResult::FULL;
  if (chunk.size() > chunk_bytes_)
    throw runtime_fault("fifo chunk larger than channel chunk size");
  queue_.emplace_back(chunk.begin(), chunk.end());
  pushed_bytes_ += chunk.size();
  return PushResult::OK;
}

FifoChannel::PopResult FifoChannel::try_pop(std::vector<uint8_t>& out) {
  if (queue_.empty())
    return closed_ ? PopResult::END_OF_STREAM : PopResult::EMPTY;
  out = std::move(queue_.front());
  queue_.pop_front();
  popped_bytes_ += out.size();
  return PopResult::OK;
}

void FifoChannel::close() { closed_ = true; }

SegmentMap parse_segment_descriptor(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  SegmentMap out;
  for (auto& [name, val] : j.items()) {
    Segment s;
    s.offset = val.at("offset").get<uint64_t>();
    s.length = val.at("length").get<uint64_t>();
    out[name] = s;
  }
  return out;
}

void load_memory_image(MainMemory& mem, const std::string& blob_path,
                       const std::string& descriptor_path, SegmentMap* out) {
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open memory image: " + blob_path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(blob)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() > mem.size())
    throw std::runtime_error("memory image larger than main memory");
  mem.store(0, bytes);

  std::ifstream desc(descriptor_path);
  if (!desc)
    throw std::runtime_error("cannot open image descriptor: " +
                             descriptor_path);
  std::string text((std::istreambuf_iterator<char>(desc)),
                   std::istreambuf_iterator<char>());
  SegmentMap segments = parse_segment_descriptor(text);
  for (auto& [name, seg] : segments) {
    if (seg.offset > mem.size() || seg.length > mem.size() - seg.offset)
      throw std::runtime_error("segment '" + name + "' out of memory bounds");
  }
  if (out) *out = std::move(segments);
}

void dump_memory_image(const MainMemory& mem, const std::string& blob_path) {
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob)
    throw std::runtime_error("cannot open dump target: " + blob_path);
  blob.write(reinterpret_cast<const char*>(mem.bytes().data()),
             std::streamsize(mem.bytes().size()));
  if (!blob) throw std::runtime_error("short write to: " + blob_path);
}

uint64_t load_u64(std::span<const uint8_t> bytes) {
  uint64_t v = 0;
  size_t n = std::min<size_t>(8, bytes.size());
  for (size_t i = 0; i < n; ++i) v |= uint64_t(bytes[i]) << (8 * i);
  return v;
}

void store_u64(std::span<uint8_t> bytes, uint64_t value) {
  size_t n = std::min<size_t>(8, bytes.size());
  for (size_t i = 0; i < n; ++i) bytes[i] = uint8_t(value >> (8 * i));
}

}  // namespace scm
