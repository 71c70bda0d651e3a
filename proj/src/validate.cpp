#include "scm/isa.hpp"
#include "scm/registry.hpp"

namespace scm {

namespace {

void check_register(size_t idx, RegisterName r, const MachineConfig& cfg) {
  if (r.index >= cfg.regs_per_class)
    throw validation_error(idx, "register index out of range: " + to_string(r));
}

const char* class_name(RegClass c) {
  return c == RegClass::BYTES64 ? "R64B" : "R2048L";
}

}  // namespace

void validate(const Program& p, const Registry& registry,
              const MachineConfig& cfg) {
  for (size_t i = 0; i < p.instructions.size(); ++i) {
    const Instruction& ins = p.instructions[i];
    if (ins.kind == InstrKind::CONTROL) {
      const ControlPayload& c = ins.control;
      for (RegisterName r : c.regs) {
        if (r.cls != RegClass::BYTES64)
          throw validation_error(
              i, std::string(mnemonic(c.op)) +
                     " operands must be 64-byte registers, got " +
                     to_string(r));
        check_register(i, r, cfg);
      }
      if (!c.label.empty()) {
        auto it = p.labels.find(c.label);
        if (it == p.labels.end() || c.target < 0 ||
            size_t(c.target) >= p.instructions.size() ||
            it->second != size_t(c.target))
          throw validation_error(i, "unresolved or inconsistent branch target '" +
                                        c.label + "'");
      }
      continue;
    }
    const CodeletDefinition* def = registry.find(ins.name);
    if (!def)
      throw validation_error(i, "unknown codelet name '" + ins.name + "'");
    CodeletKind want =
        ins.kind == InstrKind::COD ? CodeletKind::COMPUTE : CodeletKind::MEMORY;
    if (def->kind != want)
      throw validation_error(
          i, "kind mismatch: '" + ins.name + "' is registered as a " +
                 (def->kind == CodeletKind::COMPUTE ? "compute" : "memory") +
                 " codelet");
    if (ins.operands.size() != def->slots.size())
      throw validation_error(
          i, "operand arity mismatch for '" + ins.name + "': got " +
                 std::to_string(ins.operands.size()) + ", want " +
                 std::to_string(def->slots.size()));
    for (size_t k = 0; k < ins.operands.size(); ++k) {
      RegisterName r = ins.operands[k];
      if (r.cls != def->slots[k].cls)
        throw validation_error(
            i, "operand class mismatch for '" + ins.name + "' operand " +
                   std::to_string(k) + ": got " + to_string(r) + ", want " +
                   class_name(def->slots[k].cls));
      check_register(i, r, cfg);
    }
  }
}

}  // namespace scm
