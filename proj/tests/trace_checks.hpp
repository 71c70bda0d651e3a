#ifndef SCM_TESTS_TRACE_CHECKS_HPP
#define SCM_TESTS_TRACE_CHECKS_HPP

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scm/engine.hpp"
#include "scm/isa.hpp"
#include "scm/registry.hpp"

namespace scm_tests {

// Structural validity of a simulation result:
//  1. events on one resource never overlap,
//  2. compute codelets run on CUs, memory codelets on MCUs, control on the SU,
//  3. every non-stream read starts at or after its writer's completion.
// The dependency check tracks architectural registers, so call it only on
// renaming-off runs.
inline void check_trace_validity(const scm::Program& p, const scm::Registry& reg,
                                 const scm::RunResult& r,
                                 bool check_dependencies = true) {
  using namespace scm;

  std::map<uint32_t, std::vector<const TraceEvent*>> by_resource;
  for (const TraceEvent& ev : r.trace) {
    if (ev.end_cycle < ev.start_cycle)
      throw std::logic_error("event ends before it starts");
    by_resource[ev.resource_ord].push_back(&ev);
  }
  for (auto& [ord, events] : by_resource) {
    (void)ord;
    std::sort(events.begin(), events.end(),
              [](const TraceEvent* a, const TraceEvent* b) {
                return a->start_cycle < b->start_cycle;
              });
    for (size_t i = 1; i < events.size(); ++i)
      if (events[i - 1]->end_cycle > events[i]->start_cycle)
        throw std::logic_error("overlapping events on " +
                               events[i]->resource + " at cycle " +
                               std::to_string(events[i]->start_cycle));
  }

  for (const ScheduleEntry& e : r.schedule) {
    bool ok = (e.kind == InstrKind::COD && e.resource.rfind("CU#", 0) == 0) ||
              (e.kind == InstrKind::MEMCOD && e.resource.rfind("MCU#", 0) == 0) ||
              (e.kind == InstrKind::CONTROL && e.resource == "SU");
    if (!ok)
      throw std::logic_error("instruction '" + e.name + "' placed on " +
                             e.resource);
  }

  if (!check_dependencies) return;
  std::map<RegisterName, uint64_t> writer_end;
  std::vector<const ScheduleEntry*> order;
  for (const ScheduleEntry& e : r.schedule) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const ScheduleEntry* a, const ScheduleEntry* b) {
              return a->seq < b->seq;
            });
  auto need = [&](RegisterName rn, uint64_t issue, const std::string& name) {
    auto it = writer_end.find(rn);
    if (it != writer_end.end() && it->second > issue)
      throw std::logic_error("'" + name + "' reads " + to_string(rn) +
                             " before its writer finishes");
  };
  for (const ScheduleEntry* e : order) {
    const Instruction& ins = p.instructions.at(size_t(e->static_index));
    if (ins.kind == InstrKind::CONTROL) {
      const ControlPayload& c = ins.control;
      size_t first_src =
          (c.op == ControlOp::ADD || c.op == ControlOp::SUB ||
           c.op == ControlOp::MULT) ? 1 : 0;
      bool writes = c.op == ControlOp::LDIMM || first_src == 1;
      for (size_t i = writes ? first_src : 0; i < c.regs.size(); ++i)
        need(c.regs[i], e->issue_cycle, e->name);
      if (writes) writer_end[c.regs[0]] = e->complete_cycle;
    } else {
      const CodeletDefinition& def = reg.lookup(ins.name);
      for (size_t i = 0; i < def.slots.size(); ++i)
        if (def.slots[i].dir != Direction::WRITE && !def.slots[i].stream)
          need(ins.operands[i], e->issue_cycle, e->name);
      for (size_t i = 0; i < def.slots.size(); ++i)
        if (def.slots[i].dir != Direction::READ)
          writer_end[ins.operands[i]] = e->complete_cycle;
    }
  }
}

}  // namespace scm_tests

#endif  // SCM_TESTS_TRACE_CHECKS_HPP
