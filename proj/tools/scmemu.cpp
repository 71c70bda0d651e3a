// scmemu: emulator and discrete-event timing simulator front end.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scm/engine.hpp"
#include "scm/isa.hpp"
#include "scm/machine.hpp"
#include "scm/registry.hpp"
#include "scm/spgemm.hpp"
#include "scm/timing.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitDeadlock = 4;
constexpr int kExitIo = 5;

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

scm::MachineConfig load_config(const std::string& path) {
  if (path.empty()) return scm::MachineConfig{};
  return scm::MachineConfig::from_json_file(path);
}

// Built-ins plus the demo codelet families, so `run` works out of the box.
scm::Registry full_registry() {
  scm::Registry reg;
  scm::register_builtins(reg);
  scm::register_spgemm_codelets(reg);
  scm::register_stub_codelets(reg);
  return reg;
}

// Manifest: JSON object, name -> {kind: "compute"|"memory",
// slots: [{class: "R64B"|"R2048L", dir: "read"|"write"|"readwrite",
// stream: bool}]}. Entries are signature-only.
void add_manifest(scm::Registry& reg, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw scm::validation_error(std::string("manifest is not valid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) throw scm::validation_error("manifest must be an object");
  for (auto& [name, entry] : j.items()) {
    if (reg.find(name)) {
      std::cerr << "warning: manifest entry '" << name
                << "' shadows a registered codelet; ignored\n";
      continue;
    }
    scm::CodeletDefinition def;
    def.name = name;
    std::string kind = entry.value("kind", "");
    if (kind == "compute")
      def.kind = scm::CodeletKind::COMPUTE;
    else if (kind == "memory")
      def.kind = scm::CodeletKind::MEMORY;
    else
      throw scm::validation_error("manifest entry '" + name +
                                  "': kind must be \"compute\" or \"memory\"");
    if (!entry.contains("slots") || !entry["slots"].is_array())
      throw scm::validation_error("manifest entry '" + name +
                                  "': slots must be an array");
    for (auto& s : entry["slots"]) {
      scm::OperandSlot slot;
      std::string cls = s.value("class", "");
      if (cls == "R64B")
        slot.cls = scm::RegClass::BYTES64;
      else if (cls == "R2048L")
        slot.cls = scm::RegClass::LINES2048;
      else
        throw scm::validation_error("manifest entry '" + name +
                                    "': class must be R64B or R2048L");
      std::string dir = s.value("dir", "");
      if (dir == "read")
        slot.dir = scm::Direction::READ;
      else if (dir == "write")
        slot.dir = scm::Direction::WRITE;
      else if (dir == "readwrite")
        slot.dir = scm::Direction::READWRITE;
      else
        throw scm::validation_error("manifest entry '" + name +
                                    "': dir must be read/write/readwrite");
      slot.stream = s.value("stream", false);
      def.slots.push_back(slot);
    }
    reg.add(std::move(def));
  }
}

scm::RegisterName parse_reg_name(const std::string& text) {
  auto fail = [&] {
    throw scm::validation_error("malformed register name: " + text);
  };
  scm::RegisterName r;
  std::string rest;
  if (text.rfind("R64B_", 0) == 0) {
    r.cls = scm::RegClass::BYTES64;
    rest = text.substr(5);
  } else if (text.rfind("R2048L_", 0) == 0) {
    r.cls = scm::RegClass::LINES2048;
    rest = text.substr(7);
  } else {
    fail();
  }
  try {
    size_t pos = 0;
    r.index = uint32_t(std::stoul(rest, &pos));
    if (pos != rest.size()) fail();
  } catch (const std::exception&) {
    fail();
  }
  return r;
}

void print_report(nlohmann::json j) { std::cout << j.dump() << "\n"; }

const char* cause_name(scm::TerminationCause c) {
  return c == scm::TerminationCause::COMMIT ? "commit" : "end_of_program";
}

// Pinned cost configuration for the sparse-GEMM demo: heavyweight compute
// (1000 fixed), 0.5 cycles/byte for codelets consuming raw layouts, 0.1 for
// the packed-format ("Rec") family.
scm::CostModel demo_cost_model() {
  scm::CostModel m;
  m.mem_latency_cycles = 200;
  m.mem_bytes_per_cycle = 16;
  m.dispatch_cycles = 5;
  m.control_op_cycles = 1;
  m.default_cost = {10, 0.05};
  for (const char* name : {"Comp0_2048L", "Comp1_2048L", "spOuterMatMult_2048L",
                           "PartialsSum_2048L"})
    m.codelets[name] = {1000, 0.5};
  for (const char* name :
       {"spOuterMatMultRec_2048L", "PartialsSumRec_2048L",
        "spOuterMatMultStreamRec_2048L", "PartialsSumStreamRec_2048L"})
    m.codelets[name] = {1000, 0.1};
  return m;
}

struct CommonOpts {
  std::string source;
  std::string config;
};

int cmd_check(const CommonOpts& o, const std::string& manifest) {
  scm::MachineConfig cfg = load_config(o.config);
  scm::Registry reg = full_registry();
  if (!manifest.empty()) add_manifest(reg, manifest);
  scm::Program p = scm::parse_program(read_file(o.source));
  scm::validate(p, reg, cfg);
  print_report({{"status", "ok"},
                {"instructions", p.instructions.size()},
                {"labels", p.labels.size()}});
  return kExitOk;
}

void load_image(scm::Machine& m, const std::string& blob,
                const std::string& descriptor) {
  if (blob.empty()) return;
  if (!descriptor.empty()) {
    scm::load_memory_image(m.mem, blob, descriptor, nullptr);
  } else {
    std::string bytes = read_file(blob);
    m.mem.store(0, std::span<const uint8_t>(
                       reinterpret_cast<const uint8_t*>(bytes.data()),
                       bytes.size()));
  }
}

int cmd_run(const CommonOpts& o, const std::string& mem_image,
            const std::string& mem_descriptor, const std::string& mode,
            const std::string& dump, const std::vector<std::string>& print_regs) {
  scm::MachineConfig cfg = load_config(o.config);
  scm::Registry reg = full_registry();
  scm::Program p = scm::parse_program(read_file(o.source));
  scm::validate(p, reg, cfg);
  scm::Machine m(cfg);
  load_image(m, mem_image, mem_descriptor);

  scm::FinalState fs;
  nlohmann::json report{{"mode", mode}};
  if (mode == "sequential") {
    fs = scm::run_sequential(p, m, reg);
  } else {
    scm::RunResult r = scm::run_pipelined(p, m, reg);
    fs = std::move(r.final_state);
    report["makespan_cycles"] = r.makespan;
  }
  report["cause"] = cause_name(fs.cause);
  report["committed"] = fs.committed;
  nlohmann::json regs = nlohmann::json::object();
  for (const std::string& name : print_regs) {
    scm::RegisterName r = parse_reg_name(name);
    const auto& bank =
        r.cls == scm::RegClass::BYTES64 ? fs.regs64 : fs.regsl;
    if (r.index >= bank.size())
      throw scm::validation_error("register index out of range: " + name);
    regs[name] = scm::load_u64(bank[r.index]);
  }
  if (!regs.empty()) report["registers"] = regs;
  if (!dump.empty()) {
    std::ofstream out(dump, std::ios::binary);
    if (!out) throw io_error("cannot write memory dump: " + dump);
    out.write(reinterpret_cast<const char*>(fs.memory.data()),
              std::streamsize(fs.memory.size()));
  }
  print_report(report);
  return kExitOk;
}

int cmd_sim(const CommonOpts& o, const std::string& mem_image,
            const std::string& mem_descriptor, const std::string& costs_path,
            const std::string& trace_path) {
  scm::MachineConfig cfg = load_config(o.config);
  scm::Registry reg = full_registry();
  scm::Program p = scm::parse_program(read_file(o.source));
  scm::validate(p, reg, cfg);
  scm::CostModel costs;
  if (!costs_path.empty()) {
    costs = scm::CostModel::from_json_file(costs_path);
    for (const scm::Instruction& ins : p.instructions)
      if (ins.kind != scm::InstrKind::CONTROL && !costs.has(ins.name))
        std::cerr << "warning: no cost entry for '" << ins.name
                  << "'; using the per-byte default\n";
  }
  scm::Machine m(cfg);
  load_image(m, mem_image, mem_descriptor);
  scm::RunResult r = scm::simulate(p, m, reg, costs);
  if (!trace_path.empty())
    scm::emit_trace(r.trace, r.makespan, cfg, trace_path);
  print_report({{"cause", cause_name(r.final_state.cause)},
                {"committed", r.final_state.committed},
                {"makespan_cycles", r.makespan},
                {"utilization",
                 scm::resource_utilization(r.trace, r.makespan)}});
  return kExitOk;
}

int cmd_demo_spgemm(uint64_t seed, uint64_t size, double density,
                    const std::string& variant, const std::string& config,
                    const std::string& costs_path,
                    const std::string& trace_prefix) {
  scm::MachineConfig cfg = load_config(config);
  scm::Registry reg = full_registry();
  scm::CostModel costs = costs_path.empty()
                             ? demo_cost_model()
                             : scm::CostModel::from_json_file(costs_path);
  scm::SparseMatrix A = scm::random_sparse(size, size, density, seed * 2 + 1,
                                           scm::SparseFormat::CSC);
  scm::SparseMatrix B = scm::random_sparse(size, size, density, seed * 2 + 2,
                                           scm::SparseFormat::CSR);
  std::vector<double> oracle = scm::dense_oracle(A, B);

  std::vector<scm::Variant> variants;
  if (variant == "all")
    variants = {scm::Variant::T1, scm::Variant::T2, scm::Variant::T3,
                scm::Variant::T4, scm::Variant::T5};
  else if (variant == "T1") variants = {scm::Variant::T1};
  else if (variant == "T2") variants = {scm::Variant::T2};
  else if (variant == "T3") variants = {scm::Variant::T3};
  else if (variant == "T4") variants = {scm::Variant::T4};
  else if (variant == "T5") variants = {scm::Variant::T5};
  else throw scm::validation_error("unknown variant: " + variant);

  bool all_pass = true;
  std::vector<std::vector<uint8_t>> stored;
  nlohmann::json makespans = nlohmann::json::object();
  for (scm::Variant v : variants) {
    scm::VariantBuild build = scm::build_variant(v, A, B, cfg);
    scm::Machine m(cfg);
    m.mem.store(0, build.memory_image);
    scm::validate(build.program, reg, cfg);
    scm::RunResult r = scm::simulate(build.program, m, reg, costs);
    std::span<const uint8_t> c_bytes(
        r.final_state.memory.data() + build.c_addr, build.c_len);
    stored.emplace_back(c_bytes.begin(), c_bytes.end());
    std::vector<double> got = scm::densify_records(
        scm::unpack_block(c_bytes), A.rows, B.cols);
    double max_err = 0;
    for (size_t i = 0; i < oracle.size(); ++i)
      max_err = std::max(max_err, std::abs(got[i] - oracle[i]));
    bool pass = max_err <= 1e-9;
    all_pass = all_pass && pass;
    if (!trace_prefix.empty())
      scm::emit_trace(r.trace, r.makespan, cfg,
                      trace_prefix + scm::variant_name(v) + ".json");
    makespans[scm::variant_name(v)] = r.makespan;
    print_report({{"variant", scm::variant_name(v)},
                  {"makespan_cycles", r.makespan},
                  {"max_abs_error", max_err},
                  {"verdict", pass ? "PASS vs dense oracle" : "FAIL"}});
  }
  if (variants.size() > 1) {
    bool identical = true;
    for (size_t i = 1; i < stored.size(); ++i)
      identical = identical && stored[i] == stored[0];
    print_report({{"makespans", makespans},
                  {"stored_results_identical", identical}});
    all_pass = all_pass && identical;
  }
  return all_pass ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emulator and timing simulator for codelet instruction streams"};
  app.require_subcommand(1);

  CommonOpts check_o, run_o, sim_o;
  std::string check_manifest;
  auto* check = app.add_subcommand("check", "parse and validate a program");
  check->add_option("source", check_o.source, "assembly source file")
      ->required();
  check->add_option("--config", check_o.config, "machine config JSON");
  check->add_option("--manifest", check_manifest,
                    "codelet signature manifest JSON");

  std::string run_image, run_desc, run_mode = "pipelined", run_dump;
  std::vector<std::string> run_print;
  auto* run = app.add_subcommand("run", "execute a program");
  run->add_option("source", run_o.source, "assembly source file")->required();
  run->add_option("--config", run_o.config, "machine config JSON");
  run->add_option("--mem-image", run_image, "raw memory image blob");
  run->add_option("--mem-descriptor", run_desc,
                  "segment descriptor JSON for the image");
  run->add_option("--mode", run_mode, "sequential or pipelined")
      ->check(CLI::IsMember({"sequential", "pipelined"}));
  run->add_option("--dump", run_dump, "write final memory to this path");
  run->add_option("--print-reg", run_print,
                  "report this register's low 8 bytes (repeatable)");

  std::string sim_image, sim_desc, sim_costs, sim_trace;
  auto* sim = app.add_subcommand("sim", "simulate with a cost model");
  sim->add_option("source", sim_o.source, "assembly source file")->required();
  sim->add_option("--config", sim_o.config, "machine config JSON");
  sim->add_option("--mem-image", sim_image, "raw memory image blob");
  sim->add_option("--mem-descriptor", sim_desc,
                  "segment descriptor JSON for the image");
  sim->add_option("--costs", sim_costs, "cost model JSON");
  sim->add_option("--trace", sim_trace, "write a Chrome trace file here");

  uint64_t demo_seed = 42, demo_size = 16;
  double demo_density = 0.25;
  std::string demo_variant = "all", demo_config, demo_costs, demo_trace;
  auto* demo = app.add_subcommand(
      "demo-spgemm", "sparse-GEMM outer-product variant study");
  demo->add_option("--seed", demo_seed, "matrix seed");
  demo->add_option("--size", demo_size, "square matrix dimension")
      ->check(CLI::PositiveNumber);
  demo->add_option("--density", demo_density, "nonzero density in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  demo->add_option("--variant", demo_variant, "T1..T5 or all");
  demo->add_option("--config", demo_config, "machine config JSON");
  demo->add_option("--costs", demo_costs, "cost model JSON");
  demo->add_option("--trace-prefix", demo_trace,
                   "write per-variant traces to <prefix><variant>.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(check_o, check_manifest);
    if (run->parsed())
      return cmd_run(run_o, run_image, run_desc, run_mode, run_dump, run_print);
    if (sim->parsed())
      return cmd_sim(sim_o, sim_image, sim_desc, sim_costs, sim_trace);
    if (demo->parsed())
      return cmd_demo_spgemm(demo_seed, demo_size, demo_density, demo_variant,
                             demo_config, demo_costs, demo_trace);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const scm::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const scm::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const scm::deadlock_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDeadlock;
  } catch (const scm::runtime_fault& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
