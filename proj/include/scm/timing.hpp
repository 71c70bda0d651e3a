#ifndef SCM_TIMING_HPP
#define SCM_TIMING_HPP

#include <cstdint>
#include <map>
#include <string>

#include "scm/engine.hpp"

namespace scm {

struct CodeletCost {
  uint64_t fixed_cycles = 10;
  double cycles_per_byte = 0.05;
};

/// Cycle costs for every pipeline event.
///
/// cost(codelet) = fixed_cycles + ceil(cycles_per_byte * operand bytes),
/// where a non-streamed operand counts its full class size and a streamed
/// operand counts the bytes actually streamed. Memory codelets add
/// mem_latency_cycles + ceil(touched bytes / mem_bytes_per_cycle).
struct CostModel {
  std::map<std::string, CodeletCost> codelets;
  CodeletCost default_cost{10, 0.05};
  uint64_t mem_latency_cycles = 200;
  uint64_t mem_bytes_per_cycle = 16;
  uint64_t control_op_cycles = 1;
  uint64_t dispatch_cycles = 5;

  CodeletCost lookup(const std::string& name) const {
    auto it = codelets.find(name);
    return it == codelets.end() ? default_cost : it->second;
  }
  bool has(const std::string& name) const { return codelets.count(name) > 0; }

  static CostModel from_json_text(const std::string& text);
  static CostModel from_json_file(const std::string& path);
};

/// Runs the pipelined engine under a cost model; FinalState equals
/// run_sequential's, makespan is the largest end_cycle in the trace.
RunResult simulate(const Program& p, const Machine& m, const Registry& reg,
                   const CostModel& costs);

/// Writes the trace in Chrome trace event format (array of "X" duration
/// events; ts/dur carry cycle counts, pid is 0, tid is the resource
/// ordinal), plus a JSON sidecar <path>.summary.json with makespan and
/// per-resource utilization.
void emit_trace(const std::vector<TraceEvent>& trace, uint64_t makespan,
                const MachineConfig& cfg, const std::string& path);

std::map<std::string, double> resource_utilization(
    const std::vector<TraceEvent>& trace, uint64_t makespan);

}  // namespace scm

#endif  // SCM_TIMING_HPP
