#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scm/registry.hpp"

using namespace scm;

namespace {

ExecContext make_ctx(std::vector<ExecContext::Operand> ops,
                     MainMemory* mem = nullptr) {
  return ExecContext(std::move(ops), mem, 64);
}

ExecContext::Operand read_op(std::vector<uint8_t> data, bool stream = false) {
  ExecContext::Operand op;
  op.slot = {RegClass::LINES2048, Direction::READ, stream};
  op.stream_in_bytes = data.size();
  op.in = std::move(data);
  return op;
}

ExecContext::Operand write_op(size_t size, bool stream = false) {
  ExecContext::Operand op;
  op.slot = {RegClass::LINES2048, Direction::WRITE, stream};
  op.out.assign(size, 0);
  return op;
}

}  // namespace

TEST_CASE("registry add/lookup and signature checks") {
  Registry reg;
  reg.add({"Foo", CodeletKind::COMPUTE,
           {{RegClass::LINES2048, Direction::WRITE, false}},
           nullptr});
  CHECK(reg.find("Foo") != nullptr);
  CHECK(reg.find("Bar") == nullptr);
  CHECK_THROWS_AS(reg.lookup("Bar"), std::out_of_range);
  CHECK_THROWS(reg.add({"Foo", CodeletKind::COMPUTE, {}, nullptr}));  // dup
  // streamed operands must be line registers and not READWRITE
  CHECK_THROWS(reg.add({"S1", CodeletKind::COMPUTE,
                        {{RegClass::BYTES64, Direction::WRITE, true}},
                        nullptr}));
  CHECK_THROWS(reg.add({"S2", CodeletKind::COMPUTE,
                        {{RegClass::LINES2048, Direction::READWRITE, true}},
                        nullptr}));
}

TEST_CASE("builtins are registered") {
  Registry reg;
  register_builtins(reg);
  CHECK(reg.lookup(kLoadContiguous).kind == CodeletKind::MEMORY);
  CHECK(reg.lookup(kStoreContiguous).slots.size() == 3);
  CHECK(reg.lookup(kStreamContiguous).slots[0].stream);
}

TEST_CASE("direction guards on operand access") {
  auto ctx = make_ctx({read_op({1, 2, 3}), write_op(8)});
  CHECK(ctx.in(0).size() == 3);
  CHECK_THROWS_AS(ctx.out(0), runtime_fault);  // READ-only
  CHECK_THROWS_AS(ctx.in(1), runtime_fault);   // WRITE-only
  CHECK_THROWS_AS(ctx.in(2), runtime_fault);   // out of range
  ctx.out(1)[0] = 42;
  CHECK(ctx.out(1)[0] == 42);
}

TEST_CASE("streamed output appends chunks up to capacity") {
  auto ctx = make_ctx({write_op(128, true)});
  std::vector<uint8_t> chunk(64, 9);
  ctx.push_chunk(0, chunk);
  ctx.push_chunk(0, chunk);
  CHECK(ctx.pushed_bytes(0) == 128);
  CHECK_THROWS_AS(ctx.push_chunk(0, chunk), runtime_fault);  // overflow
  auto ctx2 = make_ctx({write_op(128, false)});
  CHECK_THROWS_AS(ctx2.push_chunk(0, chunk), runtime_fault);  // not streamed
}

TEST_CASE("streamed input pops chunk-sized views then end-of-stream") {
  std::vector<uint8_t> data(100);
  for (size_t i = 0; i < data.size(); ++i) data[i] = uint8_t(i);
  auto ctx = make_ctx({read_op(data, true)});
  auto c1 = ctx.pop_chunk(0);
  REQUIRE(c1.has_value());
  CHECK(c1->size() == 64);
  CHECK((*c1)[63] == 63);
  auto c2 = ctx.pop_chunk(0);
  REQUIRE(c2.has_value());
  CHECK(c2->size() == 36);  // remainder
  CHECK(!ctx.pop_chunk(0).has_value());
  auto ctx2 = make_ctx({read_op({}, true)});
  CHECK(!ctx2.pop_chunk(0).has_value());  // empty stream ends immediately
}

TEST_CASE("compute codelets are sandboxed away from main memory") {
  auto ctx = make_ctx({write_op(64)});  // no memory handle
  CHECK_THROWS_AS(ctx.memory(), sandbox_violation);
  CHECK_THROWS_AS(ctx.mem_load(0, 8), sandbox_violation);
  CHECK_THROWS_AS(ctx.mem_store(0, std::vector<uint8_t>(8, 0)),
                  sandbox_violation);
}

TEST_CASE("memory codelets track touched bytes") {
  MainMemory mem(1024);
  auto ctx = make_ctx({write_op(64)}, &mem);
  ctx.mem_store(0, std::vector<uint8_t>(100, 1));
  auto back = ctx.mem_load(0, 50);
  CHECK(back == std::vector<uint8_t>(50, 1));
  CHECK(ctx.memory_bytes() == 150);
  CHECK_THROWS_AS(ctx.mem_load(1000, 100), runtime_fault);  // out of bounds
}
