#ifndef SCM_SPGEMM_HPP
#define SCM_SPGEMM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scm/isa.hpp"
#include "scm/machine.hpp"
#include "scm/registry.hpp"

namespace scm {

// ---------------------------------------------------------------------------
// Sparse matrices.

enum class SparseFormat : uint8_t { CSR, CSC };

/// Compressed sparse matrix. ptr has (rows+1) entries for CSR and (cols+1)
/// for CSC; within each segment idx is strictly increasing.
struct SparseMatrix {
  uint64_t rows = 0;
  uint64_t cols = 0;
  SparseFormat format = SparseFormat::CSR;
  std::vector<uint64_t> ptr;
  std::vector<uint64_t> idx;
  std::vector<double> val;

  uint64_t nnz() const { return val.size(); }
  void check() const;  // throws std::invalid_argument on broken invariants
};

/// SplitMix64: tiny, seedable, reproducible across implementations.
struct SplitMix64 {
  uint64_t state = 0;
  explicit SplitMix64(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform double in [0, 1).
  double next_double() { return double(next() >> 11) * 0x1.0p-53; }
};

/// Per-entry Bernoulli(density) occupancy, values uniform in [-1, 1] with
/// |v| >= 1e-6 (resampled); entries visited row-major so the same seed
/// yields the same matrix in either format.
SparseMatrix random_sparse(uint64_t rows, uint64_t cols, double density,
                           uint64_t seed, SparseFormat format);

SparseMatrix convert(const SparseMatrix& m, SparseFormat to);

/// Row-major rows*cols dense expansion.
std::vector<double> densify(const SparseMatrix& m);

/// Brute-force C[i][j] = sum_k A[i][k]*B[k][j] over densified operands.
std::vector<double> dense_oracle(const SparseMatrix& A, const SparseMatrix& B);

// ---------------------------------------------------------------------------
// In-memory and in-register layouts.

/// Raw image: u64 rows, cols, nnz, then ptr, idx, val arrays (all 8-byte LE).
std::vector<uint8_t> serialize_raw(const SparseMatrix& m);
SparseMatrix parse_raw(std::span<const uint8_t> bytes, SparseFormat format);

/// One 24-byte record of a PackedBlock.
struct PackedRecord {
  uint64_t index0 = 0;
  uint64_t index1 = 0;
  double value = 0.0;
  bool operator==(const PackedRecord&) const = default;
};

/// u64 count header followed by count 24-byte records.
std::vector<uint8_t> pack_block(const std::vector<PackedRecord>& records);
std::vector<PackedRecord> unpack_block(std::span<const uint8_t> bytes);

/// CSC matrix as records (index0=col, index1=row), sorted by (col, row).
std::vector<PackedRecord> csc_to_records(const SparseMatrix& m);
/// CSR matrix as records (index0=row, index1=col), sorted by (row, col).
std::vector<PackedRecord> csr_to_records(const SparseMatrix& m);

/// CSC-order block (index0=col) -> CSR-order block (index0=row), same
/// (row, col, value) multiset.
std::vector<PackedRecord> recode_csc_to_csr(
    const std::vector<PackedRecord>& block);

/// Densify a packed block of (row, col, value) records into rows*cols.
std::vector<double> densify_records(const std::vector<PackedRecord>& records,
                                    uint64_t rows, uint64_t cols);

// ---------------------------------------------------------------------------
// Codelet set and the five program variants.

/// Registers the sparse-GEMM codelet family (LoadData*/StoreData,
/// Fetch/Convert/Stream* memory codelets, Comp0/Comp1 and the
/// spOuterMatMult/PartialsSum compute families).
void register_spgemm_codelets(Registry& reg);

enum class Variant : uint8_t { T1, T2, T3, T4, T5 };
const char* variant_name(Variant v);

struct VariantBuild {
  std::string program_text;
  Program program;
  std::vector<uint8_t> memory_image;  // loaded at address 0
  uint64_t c_addr = 0;
  uint64_t c_len = 0;  // fixed-size result region, zero-padded
};

/// Builds a runnable single-block program for variant v computing C = A*B.
/// A is consumed in CSC form; B in CSR form (T2/T4/T5) or CSC form with an
/// in-pipeline recode (T1/T3). All five variants store byte-identical C.
VariantBuild build_variant(Variant v, const SparseMatrix& A,
                           const SparseMatrix& B, const MachineConfig& cfg);

// ---------------------------------------------------------------------------
// Random-program generator for engine property tests.

struct GeneratorLimits {
  uint32_t max_instructions = 200;
  uint32_t max_loop_trips = 64;
  uint64_t memory_region_bytes = 1 << 20;  // builtin codelets stay below this
};

/// Deterministic pure compute stubs (byte-wise add/xor/rotate, stream
/// producer/consumer) used by generated programs.
void register_stub_codelets(Registry& reg);

/// Seed-deterministic, valid, terminating program over the stub set, the
/// built-in memory codelets and CONTROL ops.
Program generate_random_program(uint64_t seed, const GeneratorLimits& limits,
                                const MachineConfig& cfg);

}  // namespace scm

#endif  // SCM_SPGEMM_HPP
