#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "scm/machine.hpp"

using namespace scm;

TEST_CASE("config defaults are sane and checked") {
  MachineConfig cfg;
  CHECK_NOTHROW(cfg.check());
  CHECK(cfg.reg_bytes(RegClass::BYTES64) == 64);
  CHECK(cfg.reg_bytes(RegClass::LINES2048) == 2048 * 64);
  MachineConfig bad = cfg;
  bad.cu_count = 0;
  CHECK_THROWS(bad.check());
  bad = cfg;
  bad.renaming_enabled = true;
  bad.physical_regs_per_class = bad.regs_per_class - 1;
  CHECK_THROWS(bad.check());
}

TEST_CASE("config loads from JSON and rejects junk") {
  MachineConfig cfg = MachineConfig::from_json_text(
      R"({"cu_count": 2, "mcu_count": 3, "renaming_enabled": true,
          "lines_per_l_register": 16})");
  CHECK(cfg.cu_count == 2);
  CHECK(cfg.mcu_count == 3);
  CHECK(cfg.renaming_enabled);
  CHECK(cfg.reg_bytes(RegClass::LINES2048) == 16 * 64);
  CHECK_THROWS(MachineConfig::from_json_text("not json"));
  CHECK_THROWS(MachineConfig::from_json_text(R"({"cu_count": 0})"));
  CHECK_THROWS(MachineConfig::from_json_text(R"({"no_such_knob": 1})"));
}

TEST_CASE("register file reads and writes with bounds checks") {
  MachineConfig cfg;
  RegisterFile rf(cfg);
  RegisterName r{RegClass::BYTES64, 3};
  std::vector<uint8_t> v(64, 0xAB);
  rf.write(r, v);
  CHECK(rf.read(r) == v);
  CHECK(rf.read({RegClass::BYTES64, 4}) == std::vector<uint8_t>(64, 0));
  CHECK_THROWS_AS(rf.read({RegClass::BYTES64, 99}), runtime_fault);
  CHECK_THROWS_AS(rf.write(r, std::vector<uint8_t>(63, 0)), runtime_fault);
}

TEST_CASE("main memory is bounds checked with no wraparound") {
  MainMemory mem(1024);
  std::vector<uint8_t> data{1, 2, 3, 4};
  mem.store(1020, data);
  CHECK(mem.load(1020, 4) == data);
  CHECK_THROWS_AS(mem.store(1021, data), runtime_fault);
  CHECK_THROWS_AS(mem.load(1021, 4), runtime_fault);
  // offset + length overflow must not wrap
  CHECK_THROWS_AS(mem.load(UINT64_MAX - 1, 16), runtime_fault);
}

TEST_CASE("fifo channel push/pop/close semantics") {
  FifoChannel ch(64, 2);
  std::vector<uint8_t> chunk(64, 7), out;
  CHECK(ch.try_push(chunk) == FifoChannel::PushResult::OK);
  CHECK(ch.try_push(chunk) == FifoChannel::PushResult::OK);
  CHECK(ch.try_push(chunk) == FifoChannel::PushResult::FULL);
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::OK);
  CHECK(out == chunk);
  CHECK(ch.try_push(chunk) == FifoChannel::PushResult::OK);
  ch.close();
  CHECK(ch.try_push(chunk) == FifoChannel::PushResult::CLOSED);
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::OK);
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::OK);
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::END_OF_STREAM);
  CHECK(ch.total_pushed_bytes() == ch.total_popped_bytes());
}

TEST_CASE("empty closed channel reports immediate end-of-stream") {
  FifoChannel ch(64, 4);
  ch.close();
  std::vector<uint8_t> out;
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::END_OF_STREAM);
}

TEST_CASE("empty open channel reports EMPTY, oversized chunk rejected") {
  FifoChannel ch(64, 4);
  std::vector<uint8_t> out;
  CHECK(ch.try_pop(out) == FifoChannel::PopResult::EMPTY);
  CHECK_THROWS_AS(ch.try_push(std::vector<uint8_t>(65, 0)), runtime_fault);
}

TEST_CASE("memory image round trip with segment descriptor") {
  MachineConfig cfg;
  cfg.main_memory_bytes = 4096;
  MainMemory mem(cfg.main_memory_bytes);
  std::string blob = "/tmp/scm_test_blob.bin";
  std::string desc = "/tmp/scm_test_blob.json";
  {
    std::ofstream b(blob, std::ios::binary);
    for (int i = 0; i < 256; ++i) b.put(char(i));
    std::ofstream d(desc);
    d << R"({"a": {"offset": 0, "length": 128},
             "b": {"offset": 1024, "length": 128}})";
  }
  SegmentMap segs;
  load_memory_image(mem, blob, desc, &segs);
  CHECK(segs.at("a").offset == 0);
  CHECK(segs.at("b").offset == 1024);
  // the blob is loaded contiguously at address 0
  CHECK(mem.load(128, 1)[0] == 128);
  std::string dumped = "/tmp/scm_test_dump.bin";
  dump_memory_image(mem, dumped);
  std::ifstream in(dumped, std::ios::binary);
  in.seekg(0, std::ios::end);
  CHECK(uint64_t(in.tellg()) == cfg.main_memory_bytes);
  std::remove(blob.c_str());
  std::remove(desc.c_str());
  std::remove(dumped.c_str());
}

TEST_CASE("little-endian u64 helpers") {
  std::vector<uint8_t> buf(8, 0);
  store_u64(buf, 0x0102030405060708ULL);
  CHECK(buf[0] == 8);
  CHECK(buf[7] == 1);
  CHECK(load_u64(buf) == 0x0102030405060708ULL);
}
