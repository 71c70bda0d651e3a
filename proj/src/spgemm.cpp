#include "scm/spgemm.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>
#include <stdexcept>

namespace scm {

// ---------------------------------------------------------------------------
// Sparse matrices.

void SparseMatrix::check() const {
  uint64_t segments = format == SparseFormat::CSR ? rows : cols;
  uint64_t bound = format == SparseFormat::CSR ? cols : rows;
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("matrix dimensions must be positive");
  if (ptr.size() != segments + 1 || ptr.front() != 0 || ptr.back() != nnz())
    throw std::invalid_argument("broken ptr array");
  if (idx.size() != val.size()) throw std::invalid_argument("idx/val mismatch");
  for (size_t s = 0; s < segments; ++s) {
    if (ptr[s] > ptr[s + 1]) throw std::invalid_argument("ptr not monotone");
    for (uint64_t k = ptr[s]; k < ptr[s + 1]; ++k) {
      if (idx[k] >= bound) throw std::invalid_argument("idx out of bounds");
      if (k > ptr[s] && idx[k] <= idx[k - 1])
        throw std::invalid_argument("idx not strictly increasing in segment");
    }
  }
}

SparseMatrix random_sparse(uint64_t rows, uint64_t cols, double density,
                           uint64_t seed, SparseFormat format) {
  SplitMix64 rng(seed);
  // Row-major dense scan so the same seed yields the same matrix regardless
  // of the requested compressed format.
  std::vector<double> dense(rows * cols, 0.0);
  for (uint64_t i = 0; i < rows; ++i)
    for (uint64_t j = 0; j < cols; ++j) {
      if (rng.next_double() >= density) continue;
      double v = 0.0;
      do {
        v = rng.next_double() * 2.0 - 1.0;
      } while (v > -1e-6 && v < 1e-6);
      dense[i * cols + j] = v;
    }
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.format = format;
  uint64_t segments = format == SparseFormat::CSR ? rows : cols;
  m.ptr.assign(segments + 1, 0);
  for (uint64_t s = 0; s < segments; ++s) {
    m.ptr[s] = m.idx.size();
    uint64_t lanes = format == SparseFormat::CSR ? cols : rows;
    for (uint64_t t = 0; t < lanes; ++t) {
      uint64_t i = format == SparseFormat::CSR ? s : t;
      uint64_t j = format == SparseFormat::CSR ? t : s;
      double v = dense[i * cols + j];
      if (v != 0.0) {
        m.idx.push_back(t);
        m.val.push_back(v);
      }
    }
  }
  m.ptr[segments] = m.idx.size();
  m.check();
  return m;
}

std::vector<double> densify(const SparseMatrix& m) {
  std::vector<double> dense(m.rows * m.cols, 0.0);
  uint64_t segments = m.format == SparseFormat::CSR ? m.rows : m.cols;
  for (uint64_t s = 0; s < segments; ++s)
    for (uint64_t k = m.ptr[s]; k < m.ptr[s + 1]; ++k) {
      uint64_t i = m.format == SparseFormat::CSR ? s : m.idx[k];
      uint64_t j = m.format == SparseFormat::CSR ? m.idx[k] : s;
      dense[i * m.cols + j] = m.val[k];
    }
  return dense;
}

SparseMatrix convert(const SparseMatrix& m, SparseFormat to) {
  if (m.format == to) return m;
  std::vector<double> dense = densify(m);
  SparseMatrix out;
  out.rows = m.rows;
  out.cols = m.cols;
  out.format = to;
  uint64_t segments = to == SparseFormat::CSR ? m.rows : m.cols;
  uint64_t lanes = to == SparseFormat::CSR ? m.cols : m.rows;
  out.ptr.assign(segments + 1, 0);
  for (uint64_t s = 0; s < segments; ++s) {
    out.ptr[s] = out.idx.size();
    for (uint64_t t = 0; t < lanes; ++t) {
      uint64_t i = to == SparseFormat::CSR ? s : t;
      uint64_t j = to == SparseFormat::CSR ? t : s;
      if (dense[i * m.cols + j] != 0.0) {
        out.idx.push_back(t);
        out.val.push_back(dense[i * m.cols + j]);
      }
    }
  }
  out.ptr[segments] = out.idx.size();
  return out;
}

std::vector<double> dense_oracle(const SparseMatrix& A, const SparseMatrix& B) {
  if (A.cols != B.rows)
    throw std::invalid_argument("shape mismatch: A.cols != B.rows");
  std::vector<double> a = densify(A), b = densify(B);
  std::vector<double> c(A.rows * B.cols, 0.0);
  for (uint64_t i = 0; i < A.rows; ++i)
    for (uint64_t k = 0; k < A.cols; ++k)
      for (uint64_t j = 0; j < B.cols; ++j)
        c[i * B.cols + j] += a[i * A.cols + k] * b[k * B.cols + j];
  return c;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint64_t get_u64(std::span<const uint8_t> b, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[off + i]) << (8 * i);
  return v;
}

void put_f64(std::vector<uint8_t>& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

double get_f64(std::span<const uint8_t> b, size_t off) {
  uint64_t bits = get_u64(b, off);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

std::vector<uint8_t> serialize_raw(const SparseMatrix& m) {
  std::vector<uint8_t> out;
  out.reserve(24 + 8 * (m.ptr.size() + m.idx.size() + m.val.size()));
  put_u64(out, m.rows);
  put_u64(out, m.cols);
  put_u64(out, m.nnz());
  for (uint64_t p : m.ptr) put_u64(out, p);
  for (uint64_t i : m.idx) put_u64(out, i);
  for (double v : m.val) put_f64(out, v);
  return out;
}

SparseMatrix parse_raw(std::span<const uint8_t> bytes, SparseFormat format) {
  if (bytes.size() < 24) throw runtime_fault("raw matrix image too short");
  SparseMatrix m;
  m.format = format;
  m.rows = get_u64(bytes, 0);
  m.cols = get_u64(bytes, 8);
  uint64_t nnz = get_u64(bytes, 16);
  uint64_t segments = format == SparseFormat::CSR ? m.rows : m.cols;
  uint64_t need = 24 + 8 * (segments + 1 + 2 * nnz);
  if (m.rows == 0 || m.cols == 0 || need > bytes.size())
    throw runtime_fault("malformed raw matrix image");
  size_t off = 24;
  for (uint64_t s = 0; s <= segments; ++s, off += 8)
    m.ptr.push_back(get_u64(bytes, off));
  for (uint64_t k = 0; k < nnz; ++k, off += 8)
    m.idx.push_back(get_u64(bytes, off));
  for (uint64_t k = 0; k < nnz; ++k, off += 8)
    m.val.push_back(get_f64(bytes, off));
  try {
    m.check();
  } catch (const std::invalid_argument& e) {
    throw runtime_fault(std::string("malformed raw matrix image: ") + e.what());
  }
  return m;
}

std::vector<uint8_t> pack_block(const std::vector<PackedRecord>& records) {
  std::vector<uint8_t> out;
  out.reserve(8 + 24 * records.size());
  put_u64(out, records.size());
  for (const PackedRecord& r : records) {
    put_u64(out, r.index0);
    put_u64(out, r.index1);
    put_f64(out, r.value);
  }
  return out;
}

std::vector<PackedRecord> unpack_block(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8) throw runtime_fault("packed block too short");
  uint64_t count = get_u64(bytes, 0);
  if (8 + 24 * count > bytes.size())
    throw runtime_fault("packed block header count exceeds capacity");
  std::vector<PackedRecord> out(count);
  for (uint64_t k = 0; k < count; ++k) {
    size_t off = 8 + 24 * k;
    out[k] = {get_u64(bytes, off), get_u64(bytes, off + 8),
              get_f64(bytes, off + 16)};
  }
  return out;
}

std::vector<PackedRecord> csc_to_records(const SparseMatrix& m) {
  if (m.format != SparseFormat::CSC)
    throw std::invalid_argument("csc_to_records needs a CSC matrix");
  std::vector<PackedRecord> out;
  for (uint64_t col = 0; col < m.cols; ++col)
    for (uint64_t k = m.ptr[col]; k < m.ptr[col + 1]; ++k)
      out.push_back({col, m.idx[k], m.val[k]});
  return out;
}

std::vector<PackedRecord> csr_to_records(const SparseMatrix& m) {
  if (m.format != SparseFormat::CSR)
    throw std::invalid_argument("csr_to_records needs a CSR matrix");
  std::vector<PackedRecord> out;
  for (uint64_t row = 0; row < m.rows; ++row)
    for (uint64_t k = m.ptr[row]; k < m.ptr[row + 1]; ++k)
      out.push_back({row, m.idx[k], m.val[k]});
  return out;
}

std::vector<PackedRecord> recode_csc_to_csr(
    const std::vector<PackedRecord>& block) {
  std::vector<PackedRecord> out;
  out.reserve(block.size());
  for (const PackedRecord& r : block)
    out.push_back({r.index1, r.index0, r.value});  // (col,row) -> (row,col)
  std::stable_sort(out.begin(), out.end(),
                   [](const PackedRecord& a, const PackedRecord& b) {
                     return std::tie(a.index0, a.index1) <
                            std::tie(b.index0, b.index1);
                   });
  return out;
}

std::vector<double> densify_records(const std::vector<PackedRecord>& records,
                                    uint64_t rows, uint64_t cols) {
  std::vector<double> dense(rows * cols, 0.0);
  for (const PackedRecord& r : records) {
    if (r.index0 >= rows || r.index1 >= cols)
      throw std::invalid_argument("record index out of bounds");
    dense[r.index0 * cols + r.index1] = r.value;
  }
  return dense;
}

// ---------------------------------------------------------------------------
// The canonical multiply pipeline shared by every codelet path. The order
// is fixed (ascending k; within k ascending row of A; within that ascending
// column of B) so every variant accumulates bit-identically.

namespace {

// a: CSC-order records (index0=col k), b: CSR-order records (index0=row k).
std::vector<PackedRecord> outer_products(const std::vector<PackedRecord>& a,
                                         const std::vector<PackedRecord>& b) {
  std::vector<PackedRecord> out;
  size_t lo = 0;
  for (size_t ai = 0; ai < a.size(); ++ai) {
    uint64_t k = a[ai].index0;
    // b is sorted by index0; advance the window to row k
    while (lo < b.size() && b[lo].index0 < k) ++lo;
    for (size_t bi = lo; bi < b.size() && b[bi].index0 == k; ++bi)
      out.push_back({a[ai].index1, b[bi].index1, a[ai].value * b[bi].value});
  }
  return out;
}

std::vector<PackedRecord> accumulate_products(
    const std::vector<PackedRecord>& prods) {
  std::map<std::pair<uint64_t, uint64_t>, double> cells;
  for (const PackedRecord& r : prods)
    cells[{r.index0, r.index1}] += r.value;
  std::vector<PackedRecord> out;
  for (const auto& [cell, v] : cells)
    if (v != 0.0) out.push_back({cell.first, cell.second, v});
  return out;
}

// Writes a packed payload to operand 0: whole-register for a plain WRITE
// slot, chunked pushes for a streamed one.
void emit_block(ExecContext& ctx, const std::vector<uint8_t>& bytes) {
  auto dst = ctx.out(0);
  if (bytes.size() > dst.size())
    throw runtime_fault("packed block exceeds register capacity");
  if (ctx.slot(0).stream) {
    size_t off = 0;
    while (off < bytes.size()) {
      size_t n = std::min(ctx.fifo_chunk_bytes(), bytes.size() - off);
      ctx.push_chunk(0, std::span<const uint8_t>(bytes.data() + off, n));
      off += n;
    }
  } else {
    std::copy(bytes.begin(), bytes.end(), dst.begin());
  }
}

// ---- memory codelets -------------------------------------------------------

void impl_raw_copy(ExecContext& ctx) {
  uint64_t addr = ctx.in_u64(1), len = ctx.in_u64(2);
  auto dst = ctx.out(0);
  if (len > dst.size()) throw runtime_fault("load length exceeds register size");
  auto data = ctx.mem_load(addr, len);
  std::copy(data.begin(), data.end(), dst.begin());
}

void impl_store(ExecContext& ctx) {
  uint64_t addr = ctx.in_u64(1), len = ctx.in_u64(2);
  auto src = ctx.in(0);
  if (len > src.size())
    throw runtime_fault("store length exceeds register size");
  ctx.mem_store(addr, src.subspan(0, len));
}

std::vector<PackedRecord> load_records(ExecContext& ctx, SparseFormat raw_fmt,
                                       bool recode_to_csr) {
  uint64_t addr = ctx.in_u64(1), len = ctx.in_u64(2);
  auto raw = ctx.mem_load(addr, len);
  SparseMatrix m = parse_raw(raw, raw_fmt);
  std::vector<PackedRecord> recs = raw_fmt == SparseFormat::CSC
                                       ? csc_to_records(m)
                                       : csr_to_records(m);
  return recode_to_csr ? recode_csc_to_csr(recs) : recs;
}

void impl_fetch_csc(ExecContext& ctx) {
  emit_block(ctx, pack_block(load_records(ctx, SparseFormat::CSC, false)));
}
void impl_convert_csc(ExecContext& ctx) {
  emit_block(ctx, pack_block(load_records(ctx, SparseFormat::CSC, true)));
}
void impl_stream_csr(ExecContext& ctx) {
  emit_block(ctx, pack_block(load_records(ctx, SparseFormat::CSR, false)));
}

// ---- compute codelets ------------------------------------------------------

void impl_comp0(ExecContext& ctx) {
  SparseMatrix a = parse_raw(ctx.in(1), SparseFormat::CSC);
  emit_block(ctx, pack_block(csc_to_records(a)));
}

void impl_comp1(ExecContext& ctx) {
  auto a = unpack_block(ctx.in(1));
  SparseMatrix b = parse_raw(ctx.in(2), SparseFormat::CSR);
  auto prods = outer_products(a, csr_to_records(b));
  emit_block(ctx, pack_block(accumulate_products(prods)));
}

void impl_spomm(ExecContext& ctx) {
  auto a = unpack_block(ctx.in(1));
  auto b = unpack_block(ctx.in(2));
  emit_block(ctx, pack_block(outer_products(a, b)));
}

void impl_partials_sum(ExecContext& ctx) {
  auto prods = unpack_block(ctx.in(1));
  emit_block(ctx, pack_block(accumulate_products(prods)));
}

}  // namespace

void register_spgemm_codelets(Registry& reg) {
  using D = Direction;
  using C = RegClass;
  const OperandSlot outL{C::LINES2048, D::WRITE, false};
  const OperandSlot outLs{C::LINES2048, D::WRITE, true};
  const OperandSlot inL{C::LINES2048, D::READ, false};
  const OperandSlot inLs{C::LINES2048, D::READ, true};
  const OperandSlot inB{C::BYTES64, D::READ, false};

  // memory codelets: (dst, addr, len) or (src, addr, len) for the store
  reg.add({"LoadData0_2048L", CodeletKind::MEMORY, {outL, inB, inB}, impl_raw_copy});
  reg.add({"LoadData1_2048L", CodeletKind::MEMORY, {outL, inB, inB}, impl_raw_copy});
  reg.add({"StoreData_2048L", CodeletKind::MEMORY, {inL, inB, inB}, impl_store});
  reg.add({"FetchCSCBlock_2048L", CodeletKind::MEMORY, {outL, inB, inB}, impl_fetch_csc});
  reg.add({"ConvertCSCBlock_2048L", CodeletKind::MEMORY, {outL, inB, inB}, impl_convert_csc});
  reg.add({"StreamCSCBlock_2048L", CodeletKind::MEMORY, {outLs, inB, inB}, impl_fetch_csc});
  reg.add({"StreamCSRBlock_2048L", CodeletKind::MEMORY, {outLs, inB, inB}, impl_stream_csr});
  reg.add({"StreamConvertCSCBlock_2048L", CodeletKind::MEMORY, {outLs, inB, inB}, impl_convert_csc});

  // compute codelets: raw-format consumers (Comp0/Comp1, plain
  // spOuterMatMult/PartialsSum) and packed-format "Rec" twins, each in
  // streamed and whole-register flavors
  reg.add({"Comp0_2048L", CodeletKind::COMPUTE, {outL, inL}, impl_comp0});
  reg.add({"Comp1_2048L", CodeletKind::COMPUTE, {outL, inL, inL}, impl_comp1});
  reg.add({"spOuterMatMult_2048L", CodeletKind::COMPUTE, {outLs, inLs, inLs}, impl_spomm});
  reg.add({"PartialsSum_2048L", CodeletKind::COMPUTE, {outL, inLs}, impl_partials_sum});
  reg.add({"spOuterMatMultRec_2048L", CodeletKind::COMPUTE, {outL, inL, inL}, impl_spomm});
  reg.add({"PartialsSumRec_2048L", CodeletKind::COMPUTE, {outL, inL}, impl_partials_sum});
  reg.add({"spOuterMatMultStreamRec_2048L", CodeletKind::COMPUTE, {outLs, inLs, inLs}, impl_spomm});
  reg.add({"PartialsSumStreamRec_2048L", CodeletKind::COMPUTE, {outL, inLs}, impl_partials_sum});
}

// ---------------------------------------------------------------------------
// Variant builder.

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::T1: return "T1";
    case Variant::T2: return "T2";
    case Variant::T3: return "T3";
    case Variant::T4: return "T4";
    case Variant::T5: return "T5";
  }
  return "?";
}

VariantBuild build_variant(Variant v, const SparseMatrix& A,
                           const SparseMatrix& B, const MachineConfig& cfg) {
  if (A.cols != B.rows)
    throw std::invalid_argument("shape mismatch: A.cols != B.rows");
  SparseMatrix a_csc = convert(A, SparseFormat::CSC);
  bool b_as_csc = v == Variant::T1 || v == Variant::T3;
  SparseMatrix b_mat =
      convert(B, b_as_csc ? SparseFormat::CSC : SparseFormat::CSR);
  std::vector<uint8_t> a_raw = serialize_raw(a_csc);
  std::vector<uint8_t> b_raw = serialize_raw(b_mat);

  VariantBuild out;
  auto align64 = [](uint64_t x) { return (x + 63) & ~uint64_t(63); };
  uint64_t a_addr = 0;
  uint64_t b_addr = align64(a_raw.size());
  out.c_addr = align64(b_addr + b_raw.size());
  out.c_len = 8 + 24 * A.rows * B.cols;  // full dense block, zero-padded
  if (out.c_len > cfg.reg_bytes(RegClass::LINES2048))
    throw std::invalid_argument("matrix too large for a single-register block");
  uint64_t total = out.c_addr + out.c_len;
  if (total > cfg.main_memory_bytes)
    throw std::invalid_argument("memory image exceeds main memory");
  out.memory_image.assign(total, 0);
  std::copy(a_raw.begin(), a_raw.end(), out.memory_image.begin() + a_addr);
  std::copy(b_raw.begin(), b_raw.end(), out.memory_image.begin() + b_addr);

  std::ostringstream p;
  p << "// descriptors: A, B, C regions\n";
  p << "LDIMM R64B_6, " << a_addr << ";\n";
  p << "LDIMM R64B_22, " << a_raw.size() << ";\n";
  p << "LDIMM R64B_7, " << b_addr << ";\n";
  p << "LDIMM R64B_23, " << b_raw.size() << ";\n";
  p << "LDIMM R64B_8, " << out.c_addr << ";\n";
  p << "LDIMM R64B_24, " << out.c_len << ";\n";
  switch (v) {
    case Variant::T1:
      p << "MEMCOD StreamCSCBlock_2048L R2048L_2, R64B_6, R64B_22;\n"
           "MEMCOD StreamConvertCSCBlock_2048L R2048L_3, R64B_7, R64B_23;\n"
           "COD spOuterMatMultStreamRec_2048L R2048L_4, R2048L_2, R2048L_3;\n"
           "COD PartialsSumStreamRec_2048L R2048L_5, R2048L_4;\n"
           "MEMCOD StoreData_2048L R2048L_5, R64B_8, R64B_24;\n";
      break;
    case Variant::T2:
      p << "MEMCOD StreamCSCBlock_2048L R2048L_2, R64B_6, R64B_22;\n"
           "MEMCOD StreamCSRBlock_2048L R2048L_3, R64B_7, R64B_23;\n"
           "COD spOuterMatMult_2048L R2048L_4, R2048L_2, R2048L_3;\n"
           "COD PartialsSum_2048L R2048L_5, R2048L_4;\n"
           "MEMCOD StoreData_2048L R2048L_5, R64B_8, R64B_24;\n";
      break;
    case Variant::T3:
      p << "MEMCOD FetchCSCBlock_2048L R2048L_2, R64B_6, R64B_22;\n"
           "MEMCOD ConvertCSCBlock_2048L R2048L_3, R64B_7, R64B_23;\n"
           "COD spOuterMatMultRec_2048L R2048L_4, R2048L_2, R2048L_3;\n"
           "COD PartialsSumRec_2048L R2048L_5, R2048L_4;\n"
           "MEMCOD StoreData_2048L R2048L_5, R64B_8, R64B_24;\n";
      break;
    case Variant::T4:
      p << "MEMCOD LoadData0_2048L R2048L_2, R64B_6, R64B_22;\n"
           "MEMCOD LoadData1_2048L R2048L_3, R64B_7, R64B_23;\n"
           "COD Comp0_2048L R2048L_1, R2048L_2;\n"
           "COD Comp1_2048L R2048L_3, R2048L_1, R2048L_3;\n"
           "MEMCOD StoreData_2048L R2048L_3, R64B_8, R64B_24;\n";
      break;
    case Variant::T5:
      p << "MEMCOD LoadData0_2048L R2048L_2, R64B_6, R64B_22;\n"
           "COD Comp0_2048L R2048L_1, R2048L_2;\n"
           "MEMCOD LoadData1_2048L R2048L_2, R64B_7, R64B_23;\n"
           "COD Comp1_2048L R2048L_3, R2048L_1, R2048L_2;\n"
           "MEMCOD StoreData_2048L R2048L_3, R64B_8, R64B_24;\n";
      break;
  }
  p << "COMMIT;\n";
  out.program_text = p.str();
  out.program = parse_program(out.program_text);
  return out;
}

// ---------------------------------------------------------------------------
// Stub codelets for the random-program generator.

namespace {

void stub_fill(ExecContext& ctx) {
  SplitMix64 rng(ctx.in_u64(1));
  auto dst = ctx.out(0);
  for (size_t off = 0; off + 8 <= dst.size(); off += 8)
    store_u64(dst.subspan(off, 8), rng.next());
}

void stub_xor(ExecContext& ctx) {
  auto a = ctx.in(1), b = ctx.in(2);
  auto dst = ctx.out(0);
  for (size_t i = 0; i < dst.size(); ++i) dst[i] = a[i] ^ b[i];
}

void stub_add(ExecContext& ctx) {
  auto a = ctx.in(1), b = ctx.in(2);
  auto dst = ctx.out(0);
  for (size_t i = 0; i < dst.size(); ++i) dst[i] = uint8_t(a[i] + b[i]);
}

void stub_rot(ExecContext& ctx) {
  auto a = ctx.in(1);
  auto dst = ctx.out(0);
  for (size_t i = 0; i < dst.size(); ++i)
    dst[i] = uint8_t(uint8_t((a[i] << 3) | (a[i] >> 5)) ^ uint8_t(i));
}

void stub_sum(ExecContext& ctx) {
  auto a = ctx.in(1);
  uint64_t sum = 0;
  for (size_t off = 0; off + 8 <= a.size(); off += 8)
    sum += load_u64(std::span<const uint8_t>(a).subspan(off, 8));
  ctx.out_u64(0, sum);
}

void stub_stream_gen(ExecContext& ctx) {
  uint64_t cap = ctx.out(0).size();
  uint64_t n = ctx.in_u64(1) % (cap + 1);
  std::vector<uint8_t> chunk;
  uint64_t off = 0;
  while (off < n) {
    uint64_t len = std::min<uint64_t>(ctx.fifo_chunk_bytes(), n - off);
    chunk.resize(len);
    for (uint64_t i = 0; i < len; ++i)
      chunk[i] = uint8_t((off + i) * 131 + 7);
    ctx.push_chunk(0, chunk);
    off += len;
  }
}

void stub_stream_fold(ExecContext& ctx) {
  uint64_t sum = 0, pos = 0;
  while (auto chunk = ctx.pop_chunk(1))
    for (uint8_t b : *chunk) sum += uint64_t(b) * (pos++ % 251 + 1);
  ctx.out_u64(0, sum);
}

}  // namespace

void register_stub_codelets(Registry& reg) {
  using D = Direction;
  using C = RegClass;
  const OperandSlot outL{C::LINES2048, D::WRITE, false};
  const OperandSlot outLs{C::LINES2048, D::WRITE, true};
  const OperandSlot inL{C::LINES2048, D::READ, false};
  const OperandSlot inLs{C::LINES2048, D::READ, true};
  const OperandSlot outB{C::BYTES64, D::WRITE, false};
  const OperandSlot inB{C::BYTES64, D::READ, false};
  reg.add({"Fill64_2048L", CodeletKind::COMPUTE, {outL, inB}, stub_fill});
  reg.add({"XorBytes_2048L", CodeletKind::COMPUTE, {outL, inL, inL}, stub_xor});
  reg.add({"AddBytes_2048L", CodeletKind::COMPUTE, {outL, inL, inL}, stub_add});
  reg.add({"RotBytes_2048L", CodeletKind::COMPUTE, {outL, inL}, stub_rot});
  reg.add({"Sum64_2048L", CodeletKind::COMPUTE, {outB, inL}, stub_sum});
  reg.add({"StreamGen_2048L", CodeletKind::COMPUTE, {outLs, inB}, stub_stream_gen});
  reg.add({"StreamFold_2048L", CodeletKind::COMPUTE, {outB, inLs}, stub_stream_fold});
  // Deliberately ill-behaved: a compute codelet that touches main memory.
  // Useful for exercising the sandbox fault path end to end.
  reg.add({"MemPoke_2048L", CodeletKind::COMPUTE, {outL},
           [](ExecContext& ctx) { ctx.mem_load(0, 8); }});
}

// ---------------------------------------------------------------------------
// Random-program generator.

Program generate_random_program(uint64_t seed, const GeneratorLimits& limits,
                                const MachineConfig& cfg) {
  SplitMix64 rng(seed ^ 0xA5C3E1D2B4F60798ULL);
  uint64_t region =
      std::min<uint64_t>(limits.memory_region_bytes, cfg.main_memory_bytes);
  uint64_t lreg_bytes = cfg.reg_bytes(RegClass::LINES2048);
  std::ostringstream p;
  uint32_t count = 0;
  uint32_t label_id = 0;

  // register conventions: scalars R64B_0..12, scratch descriptors
  // R64B_16..18, loop machinery R64B_13..15; lines R2048L_0..7
  auto breg = [&](uint32_t lo, uint32_t n) {
    return "R64B_" + std::to_string(lo + rng.next() % n);
  };
  auto lreg = [&] { return "R2048L_" + std::to_string(rng.next() % 8); };

  auto emit_action = [&](bool allow_loop, auto&& self) -> void {
    switch (rng.next() % 10) {
      case 0:
        p << "LDIMM " << breg(0, 13) << ", " << int64_t(rng.next() % 100000)
          << ";\n";
        ++count;
        break;
      case 1: {
        static const char* ops[] = {"ADD", "SUB", "MULT"};
        const char* op = ops[rng.next() % 3];
        p << op << " " << breg(0, 13) << ", " << breg(0, 13) << ", "
          << breg(0, 13) << ";\n";
        ++count;
        break;
      }
      case 2:
        p << "COD Fill64_2048L " << lreg() << ", " << breg(0, 13) << ";\n";
        ++count;
        break;
      case 3: {
        const char* name = rng.next() % 2 ? "XorBytes_2048L" : "AddBytes_2048L";
        p << "COD " << name << " " << lreg() << ", " << lreg() << ", " << lreg()
          << ";\n";
        ++count;
        break;
      }
      case 4:
        p << "COD RotBytes_2048L " << lreg() << ", " << lreg() << ";\n";
        ++count;
        break;
      case 5:
        p << "COD Sum64_2048L " << breg(0, 13) << ", " << lreg() << ";\n";
        ++count;
        break;
      case 6: {  // builtin memory codelet with in-bounds descriptors
        uint64_t len = rng.next() % 4096;
        uint64_t addr = rng.next() % (region - len);
        p << "LDIMM R64B_16, " << addr << ";\n";
        p << "LDIMM R64B_17, " << len << ";\n";
        uint32_t which = rng.next() % 3;
        const char* name = which == 0   ? "LoadContiguous"
                           : which == 1 ? "StoreContiguous"
                                        : "StreamContiguous";
        p << "MEMCOD " << name << " " << lreg()
          << ", R64B_16, R64B_17;\n";
        count += 3;
        break;
      }
      case 7: {  // stream producer/consumer pair (sometimes split apart)
        std::string ch = lreg();
        p << "LDIMM R64B_18, " << rng.next() % (2 * lreg_bytes) << ";\n";
        p << "COD StreamGen_2048L " << ch << ", R64B_18;\n";
        count += 2;
        if (rng.next() % 4 == 0) {  // intervening reader-less instruction
          p << "LDIMM " << breg(0, 13) << ", 1;\n";
          ++count;
        }
        if (rng.next() % 3 != 0) {
          p << "COD StreamFold_2048L " << breg(0, 13) << ", " << ch << ";\n";
          ++count;
        } else {  // class-compatible non-stream reader: fallback pairing
          p << "COD RotBytes_2048L " << lreg() << ", " << ch << ";\n";
          ++count;
        }
        break;
      }
      case 8:
        if (allow_loop) {  // bounded counted loop, non-nested
          uint64_t trips = 1 + rng.next() % limits.max_loop_trips;
          std::string label = "loop" + std::to_string(label_id++);
          p << "LDIMM R64B_13, 0;\n";
          p << "LDIMM R64B_14, 1;\n";
          p << "LDIMM R64B_15, " << trips << ";\n";
          p << label << ": ADD R64B_13, R64B_13, R64B_14;\n";
          count += 4;
          uint32_t body = 1 + rng.next() % 2;
          for (uint32_t i = 0; i < body; ++i) self(false, self);
          p << "BRLT R64B_13, R64B_15, " << label << ";\n";
          ++count;
        }
        break;
      default:
        p << "LDIMM " << breg(0, 13) << ", " << int64_t(rng.next() % 256)
          << ";\n";
        ++count;
        break;
    }
  };

  uint32_t budget = 5 + uint32_t(rng.next() % (limits.max_instructions - 20));
  while (count < budget) emit_action(true, emit_action);
  if (rng.next() % 2) p << "COMMIT;\n";
  return parse_program(p.str());
}

}  // namespace scm
