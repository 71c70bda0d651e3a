#ifndef SCM_ISA_HPP
#define SCM_ISA_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scm/machine.hpp"

namespace scm {

class Registry;

enum class ControlOp : uint8_t {
  LDIMM,
  ADD,
  SUB,
  MULT,
  BREQ,
  BRNE,
  BRLT,
  JMPLBL,
  COMMIT
};

const char* mnemonic(ControlOp op);
std::optional<ControlOp> control_op_from_string(std::string_view s);

struct ControlPayload {
  ControlOp op = ControlOp::COMMIT;
  std::vector<RegisterName> regs;
  int64_t imm = 0;         // LDIMM only
  std::string label;       // branch/jump target name
  int64_t target = -1;     // resolved instruction index

  bool operator==(const ControlPayload&) const = default;
};

enum class InstrKind : uint8_t { COD, MEMCOD, CONTROL };

struct Instruction {
  std::string label;  // empty when unlabeled
  InstrKind kind = InstrKind::CONTROL;
  std::string name;   // codelet name, COD/MEMCOD only
  std::vector<RegisterName> operands;
  ControlPayload control;
  SourcePos pos;      // not part of structural identity

  bool operator==(const Instruction& o) const {
    return label == o.label && kind == o.kind && name == o.name &&
           operands == o.operands &&
           (kind != InstrKind::CONTROL || control == o.control);
  }
};

struct Program {
  std::vector<Instruction> instructions;
  std::map<std::string, size_t> labels;

  bool operator==(const Program& o) const {
    return instructions == o.instructions && labels == o.labels;
  }
};

/// Parses assembly text. `//` begins a comment, every instruction ends
/// with `;`, labels are `<identifier>:` on their own line or prefixing an
/// instruction. Throws parse_error with line/column on malformed input.
Program parse_program(std::string_view text);

/// Canonical textual form. parse_program(disassemble(p)) is structurally
/// equal to p.
std::string disassemble(const Program& p);

/// Static checks against a registry and machine configuration: codelet
/// names resolve with the right kind, operand arity and classes match the
/// definition slots, register indices are in bounds, control operands are
/// 64-byte registers. Throws validation_error naming the instruction.
void validate(const Program& p, const Registry& registry,
              const MachineConfig& cfg);

}  // namespace scm

#endif  // SCM_ISA_HPP
