#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "scm/engine.hpp"
#include "scm/spgemm.hpp"

using namespace scm;

namespace {

Registry full_registry() {
  Registry reg;
  register_builtins(reg);
  register_spgemm_codelets(reg);
  register_stub_codelets(reg);
  return reg;
}

MachineConfig test_config() {
  MachineConfig cfg;
  cfg.main_memory_bytes = 1 << 20;
  return cfg;
}

// Runs one variant functionally and returns the stored C region.
std::vector<uint8_t> run_variant(Variant v, const SparseMatrix& A,
                                 const SparseMatrix& B, const Registry& reg,
                                 const MachineConfig& cfg) {
  VariantBuild build = build_variant(v, A, B, cfg);
  Machine m(cfg);
  m.mem.store(0, build.memory_image);
  validate(build.program, reg, cfg);
  FinalState fs = run_sequential(build.program, m, reg);
  return {fs.memory.begin() + long(build.c_addr),
          fs.memory.begin() + long(build.c_addr + build.c_len)};
}

constexpr Variant kAll[] = {Variant::T1, Variant::T2, Variant::T3, Variant::T4,
                            Variant::T5};

}  // namespace

TEST_CASE("random matrices are seeded, bounded and format-independent") {
  SparseMatrix a = random_sparse(16, 16, 0.25, 5, SparseFormat::CSR);
  SparseMatrix b = random_sparse(16, 16, 0.25, 5, SparseFormat::CSR);
  CHECK(densify(a) == densify(b));  // same seed, same matrix
  SparseMatrix c = random_sparse(16, 16, 0.25, 5, SparseFormat::CSC);
  CHECK(densify(a) == densify(c));  // format does not change content
  CHECK_NOTHROW(a.check());
  CHECK_NOTHROW(c.check());
  for (double v : a.val) {
    CHECK(std::abs(v) >= 1e-6);
    CHECK(std::abs(v) <= 1.0);
  }
  CHECK(random_sparse(8, 8, 0.0, 1, SparseFormat::CSR).nnz() == 0);
  CHECK(random_sparse(8, 8, 1.0, 1, SparseFormat::CSR).nnz() == 64);
}

TEST_CASE("dense oracle obeys the identity law") {
  SparseMatrix I;
  I.rows = I.cols = 8;
  I.format = SparseFormat::CSC;
  for (uint64_t i = 0; i <= 8; ++i) I.ptr.push_back(i);
  for (uint64_t i = 0; i < 8; ++i) {
    I.idx.push_back(i);
    I.val.push_back(1.0);
  }
  SparseMatrix B = random_sparse(8, 8, 0.4, 11, SparseFormat::CSR);
  CHECK(dense_oracle(I, B) == densify(B));
  SparseMatrix Z = random_sparse(8, 8, 0.0, 0, SparseFormat::CSC);
  CHECK(dense_oracle(Z, B) == std::vector<double>(64, 0.0));
  SparseMatrix bad = random_sparse(4, 7, 0.5, 3, SparseFormat::CSC);
  CHECK_THROWS(dense_oracle(bad, B));  // shape mismatch
}

TEST_CASE("raw serialization round trips") {
  SparseMatrix m = random_sparse(13, 9, 0.3, 21, SparseFormat::CSC);
  SparseMatrix back = parse_raw(serialize_raw(m), SparseFormat::CSC);
  CHECK(back.rows == m.rows);
  CHECK(back.ptr == m.ptr);
  CHECK(back.idx == m.idx);
  CHECK(back.val == m.val);
  CHECK_THROWS_AS(parse_raw(std::vector<uint8_t>(10, 0), SparseFormat::CSC),
                  runtime_fault);
}

TEST_CASE("packed block round trips and rejects bad headers") {
  std::vector<PackedRecord> recs{{1, 2, 0.5}, {3, 4, -0.25}};
  CHECK(unpack_block(pack_block(recs)) == recs);
  CHECK(unpack_block(pack_block({})).empty());
  std::vector<uint8_t> bogus(8, 0xFF);  // huge count, no records
  CHECK_THROWS_AS(unpack_block(bogus), runtime_fault);
}

TEST_CASE("recode preserves the matrix and sorts by (row, col)") {
  SparseMatrix m = random_sparse(12, 12, 0.35, 33, SparseFormat::CSC);
  auto csc = csc_to_records(m);
  auto csr = recode_csc_to_csr(csc);
  CHECK(csr.size() == csc.size());
  CHECK(std::is_sorted(csr.begin(), csr.end(),
                       [](const PackedRecord& a, const PackedRecord& b) {
                         return std::tie(a.index0, a.index1) <
                                std::tie(b.index0, b.index1);
                       }));
  CHECK(densify_records(csr, 12, 12) == densify(m));
  CHECK(recode_csc_to_csr({}).empty());
  auto single = recode_csc_to_csr({{3, 5, 1.5}});
  CHECK(single == std::vector<PackedRecord>{{5, 3, 1.5}});
}

TEST_CASE("every variant matches the dense oracle") {
  Registry reg = full_registry();
  MachineConfig cfg = test_config();
  SparseMatrix A = random_sparse(16, 16, 0.25, 101, SparseFormat::CSC);
  SparseMatrix B = random_sparse(16, 16, 0.25, 102, SparseFormat::CSR);
  std::vector<double> want = dense_oracle(A, B);
  for (Variant v : kAll) {
    auto c_bytes = run_variant(v, A, B, reg, cfg);
    auto got = densify_records(unpack_block(c_bytes), 16, 16);
    double err = 0;
    for (size_t i = 0; i < want.size(); ++i)
      err = std::max(err, std::abs(got[i] - want[i]));
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("variants store byte-identical results") {
  Registry reg = full_registry();
  MachineConfig cfg = test_config();
  SparseMatrix A = random_sparse(16, 16, 0.5, 201, SparseFormat::CSC);
  SparseMatrix B = random_sparse(16, 16, 0.5, 202, SparseFormat::CSR);
  auto first = run_variant(Variant::T1, A, B, reg, cfg);
  for (Variant v : {Variant::T2, Variant::T3, Variant::T4, Variant::T5})
    CHECK(run_variant(v, A, B, reg, cfg) == first);
}

TEST_CASE("degenerate scales work") {
  Registry reg = full_registry();
  MachineConfig cfg = test_config();
  SparseMatrix A1 = random_sparse(1, 1, 1.0, 7, SparseFormat::CSC);
  SparseMatrix B1 = random_sparse(1, 1, 1.0, 8, SparseFormat::CSR);
  auto got = densify_records(
      unpack_block(run_variant(Variant::T2, A1, B1, reg, cfg)), 1, 1);
  CHECK(std::abs(got[0] - densify(A1)[0] * densify(B1)[0]) <= 1e-12);
  SparseMatrix Az = random_sparse(8, 8, 0.0, 1, SparseFormat::CSC);
  SparseMatrix Bz = random_sparse(8, 8, 0.0, 2, SparseFormat::CSR);
  for (Variant v : kAll) {
    auto bytes = run_variant(v, Az, Bz, reg, cfg);
    CHECK(unpack_block(bytes).empty());
  }
}

TEST_CASE("variant program texts contain the advertised instructions") {
  MachineConfig cfg = test_config();
  SparseMatrix A = random_sparse(16, 16, 0.25, 1, SparseFormat::CSC);
  SparseMatrix B = random_sparse(16, 16, 0.25, 2, SparseFormat::CSR);
  std::string t2 = build_variant(Variant::T2, A, B, cfg).program_text;
  CHECK(t2.find("MEMCOD StreamCSCBlock_2048L") != std::string::npos);
  CHECK(t2.find("COD spOuterMatMult_2048L") != std::string::npos);
  std::string t3 = build_variant(Variant::T3, A, B, cfg).program_text;
  CHECK(t3.find("MEMCOD ConvertCSCBlock_2048L R2048L_3, R64B_7, R64B_23;") !=
        std::string::npos);
  std::string t4 = build_variant(Variant::T4, A, B, cfg).program_text;
  CHECK(t4.find("COD Comp0_2048L") != std::string::npos);
}

TEST_CASE("oversized matrices are rejected") {
  MachineConfig cfg = test_config();
  // 80x80 dense result needs 8 + 24*6400 bytes > the 131072-byte register
  SparseMatrix A = random_sparse(80, 80, 0.1, 1, SparseFormat::CSC);
  SparseMatrix B = random_sparse(80, 80, 0.1, 2, SparseFormat::CSR);
  CHECK_THROWS_AS(build_variant(Variant::T2, A, B, cfg),
                  std::invalid_argument);
}

TEST_CASE("generated programs are deterministic, valid and terminating") {
  Registry reg = full_registry();
  MachineConfig cfg;
  cfg.lines_per_l_register = 64;
  cfg.main_memory_bytes = 1 << 20;
  GeneratorLimits limits;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Program p1 = generate_random_program(seed, limits, cfg);
    Program p2 = generate_random_program(seed, limits, cfg);
    CHECK(p1 == p2);
    CHECK(p1.instructions.size() <= limits.max_instructions + 10);
    CHECK_NOTHROW(validate(p1, reg, cfg));
    Machine m(cfg);
    CHECK_NOTHROW(run_sequential(p1, m, reg));  // terminates under the guard
  }
}
