#ifndef SCM_ENGINE_HPP
#define SCM_ENGINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "scm/isa.hpp"
#include "scm/machine.hpp"
#include "scm/registry.hpp"

namespace scm {

struct CostModel;

enum class TerminationCause : uint8_t { COMMIT, END_OF_PROGRAM };

/// Architectural snapshot after a run. Byte-for-byte comparable across
/// execution modes; run_pipelined must match run_sequential exactly.
struct FinalState {
  std::vector<std::vector<uint8_t>> regs64;
  std::vector<std::vector<uint8_t>> regsl;
  std::vector<uint8_t> memory;
  uint64_t committed = 0;
  TerminationCause cause = TerminationCause::END_OF_PROGRAM;

  bool operator==(const FinalState&) const = default;
};

enum class EventKind : uint8_t { EXECUTE, STALL, STREAM_CHUNK };

/// One resource-occupancy interval. Events on a single resource never
/// overlap.
struct TraceEvent {
  std::string resource;    // "SU", "CU#i", "MCU#j"
  uint32_t resource_ord = 0;
  uint64_t seq = 0;        // fetch-order ordinal of the dynamic instruction
  uint64_t static_index = 0;
  std::string name;
  uint64_t start_cycle = 0;
  uint64_t end_cycle = 0;
  EventKind kind = EventKind::EXECUTE;
  int32_t chunk = -1;      // STREAM_CHUNK only
  bool is_push = false;    // STREAM_CHUNK only
};

/// Per-dynamic-instruction schedule record (issue/complete on a resource).
struct ScheduleEntry {
  uint64_t seq = 0;
  uint64_t static_index = 0;
  std::string name;
  std::string resource;
  InstrKind kind = InstrKind::CONTROL;
  uint64_t issue_cycle = 0;
  uint64_t complete_cycle = 0;
  bool stream_paired = false;
};

struct RunResult {
  FinalState final_state;
  std::vector<ScheduleEntry> schedule;
  std::vector<TraceEvent> trace;
  uint64_t makespan = 0;
};

/// Strict in-order reference executor: each instruction fully completes
/// before the next is fetched; streaming flags are ignored. This is the
/// correctness oracle for the pipelined engine.
FinalState run_sequential(const Program& p, const Machine& m,
                          const Registry& reg);

/// Pipelined executor: in-order fetch/decode, scoreboard issue, CU/MCU
/// dispatch, optional register renaming, FIFO stream pairing,
/// out-of-order completion. FinalState is byte-identical to
/// run_sequential on the same inputs.
RunResult run_pipelined(const Program& p, const Machine& m,
                        const Registry& reg);

namespace detail {
/// Shared discrete-event core: run_pipelined uses default costs, the
/// timing module passes a configured CostModel.
RunResult simulate_core(const Program& p, const Machine& m,
                        const Registry& reg, const CostModel& costs);
}  // namespace detail

std::string resource_name(const MachineConfig& cfg, uint32_t ordinal);

}  // namespace scm

#endif  // SCM_ENGINE_HPP
