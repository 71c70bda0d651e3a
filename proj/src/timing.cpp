#include "scm/timing.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace scm {

namespace {

CodeletCost cost_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object())
    throw validation_error("cost entry '" + where + "' must be an object");
  CodeletCost c;
  for (auto& [key, value] : j.items()) {
    if (key == "fixed_cycles") {
      if (!value.is_number_unsigned())
        throw validation_error(where + ".fixed_cycles must be a non-negative integer");
      c.fixed_cycles = value.get<uint64_t>();
    } else if (key == "cycles_per_byte") {
      if (!value.is_number() || value.get<double>() < 0)
        throw validation_error(where + ".cycles_per_byte must be a non-negative number");
      c.cycles_per_byte = value.get<double>();
    } else {
      throw validation_error("unknown key '" + key + "' in cost entry '" + where + "'");
    }
  }
  return c;
}

}  // namespace

CostModel CostModel::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(std::string("cost model is not valid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw validation_error("cost model must be a JSON object");
  CostModel m;
  auto get_u64 = [&](const char* key, uint64_t& dst, bool positive) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned() || (positive && j[key].get<uint64_t>() == 0))
      throw validation_error(std::string(key) + " must be a " +
                             (positive ? "positive" : "non-negative") +
                             " integer");
    dst = j[key].get<uint64_t>();
  };
  get_u64("mem_latency_cycles", m.mem_latency_cycles, false);
  get_u64("mem_bytes_per_cycle", m.mem_bytes_per_cycle, true);
  get_u64("control_op_cycles", m.control_op_cycles, true);
  get_u64("dispatch_cycles", m.dispatch_cycles, false);
  for (auto& [key, value] : j.items()) {
    if (key == "mem_latency_cycles" || key == "mem_bytes_per_cycle" ||
        key == "control_op_cycles" || key == "dispatch_cycles")
      continue;
    if (key == "default") {
      m.default_cost = cost_from_json(value, "default");
    } else if (key == "codelets") {
      if (!value.is_object())
        throw validation_error("'codelets' must be an object");
      for (auto& [name, entry] : value.items())
        m.codelets[name] = cost_from_json(entry, name);
    } else {
      throw validation_error("unknown key '" + key + "' in cost model");
    }
  }
  return m;
}

CostModel CostModel::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open cost model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

RunResult simulate(const Program& p, const Machine& m, const Registry& reg,
                   const CostModel& costs) {
  return detail::simulate_core(p, m, reg, costs);
}

std::map<std::string, double> resource_utilization(
    const std::vector<TraceEvent>& trace, uint64_t makespan) {
  std::map<std::string, uint64_t> busy;
  for (const TraceEvent& ev : trace) {
    if (ev.kind == EventKind::STALL) continue;
    busy[ev.resource] += ev.end_cycle - ev.start_cycle;
  }
  std::map<std::string, double> out;
  for (auto& [name, cycles] : busy)
    out[name] = makespan ? double(cycles) / double(makespan) : 0.0;
  return out;
}

void emit_trace(const std::vector<TraceEvent>& trace, uint64_t makespan,
                const MachineConfig& cfg, const std::string& path) {
  nlohmann::json events = nlohmann::json::array();
  for (const TraceEvent& ev : trace) {
    nlohmann::json e{
        {"name", ev.name},
        {"ph", "X"},
        {"ts", ev.start_cycle},
        {"dur", ev.end_cycle - ev.start_cycle},
        {"pid", 0},
        {"tid", ev.resource_ord},
        {"args",
         {{"resource", ev.resource},
          {"seq", ev.seq},
          {"static_index", ev.static_index},
          {"kind", ev.kind == EventKind::EXECUTE    ? "execute"
                   : ev.kind == EventKind::STALL    ? "stall"
                                                    : "stream_chunk"}}},
    };
    if (ev.kind == EventKind::STREAM_CHUNK) {
      e["args"]["chunk"] = ev.chunk;
      e["args"]["direction"] = ev.is_push ? "push" : "pop";
    }
    events.push_back(std::move(e));
  }
  // thread-name metadata so viewers label rows by resource
  for (uint32_t ord = 0; ord < 1 + cfg.cu_count + cfg.mcu_count; ++ord) {
    events.push_back({{"name", "thread_name"},
                      {"ph", "M"},
                      {"pid", 0},
                      {"tid", ord},
                      {"args", {{"name", resource_name(cfg, ord)}}}});
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << events.dump(2) << "\n";
  }
  nlohmann::json summary{{"makespan_cycles", makespan},
                         {"utilization", resource_utilization(trace, makespan)}};
  std::string spath = path + ".summary.json";
  std::ofstream out(spath, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace summary: " + spath);
  out << summary.dump(2) << "\n";
}

}  // namespace scm
