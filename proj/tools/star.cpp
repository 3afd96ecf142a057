#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "star/audit.hpp"
#include "star/backend.hpp"
#include "star/config.hpp"
#include "star/eval.hpp"
#include "star/json_io.hpp"
#include "star/patch.hpp"
#include "star/repair.hpp"
#include "star/router.hpp"
#include "star/simulate.hpp"

namespace {

using namespace star;

std::unique_ptr<StageExecutor> make_executor(const std::string& preset) {
  if (preset == "strong")
    return std::make_unique<RuleBasedExecutor>(
        RuleBasedExecutor::Strength::Strong);
  if (preset == "weak")
    return std::make_unique<RuleBasedExecutor>(
        RuleBasedExecutor::Strength::Weak);
  if (preset == "external")
    return std::make_unique<ExternalExecutor>(ExternalExecutor::from_env());
  throw std::invalid_argument("unknown executor preset: " + preset +
                              " (expected strong, weak or external)");
}

EvalConfig base_config(const std::string& config_path) {
  if (config_path.empty()) return EvalConfig{};
  return load_config(config_path);
}

void apply_router_overrides(EvalConfig& cfg, const std::optional<double>& tau,
                            const std::optional<double>& epsilon) {
  if (tau) cfg.repair.router.tau = *tau;
  if (epsilon) cfg.repair.router.epsilon = *epsilon;
  cfg.repair.router.validate();
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::uint64_t seed = 7;
  int services = 12;
  int replicas = 2;
  int nodes = 3;
  std::string fault = "cpu_hog";
  std::string root;  // empty: deepest candidate in the drawn topology
  int onset_min = 10;
  double magnitude = 1.0;
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  SystemTopology topo = generate_topology(a.seed, a.services, a.replicas,
                                          a.nodes);
  std::string root = a.root;
  if (root.empty()) {
    const auto candidates = root_candidates(topo);
    if (candidates.empty())
      throw std::runtime_error("topology has no injectable service");
    root = candidates.front();
  }
  SimParams params;
  FaultSpec fault;
  fault.fault_class = a.fault;
  fault.root_entity = root;
  fault.onset = params.t0 + static_cast<TimeMs>(a.onset_min) * 60'000;
  fault.magnitude = a.magnitude;
  auto [store, gt] = inject_service_fault(topo, a.seed, fault, params);
  write_bundle(a.out, topo, store, gt);
  std::cout << "bundle " << a.out << ": " << gt.fault_class << " at "
            << gt.root_entity << ", onset " << gt.onset << ", "
            << store.metrics.size() << " metered entities, "
            << store.logs.size() << " log lines, " << store.spans.size()
            << " spans\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string bundle;
  std::string executor = "strong";
  std::uint64_t seed = 7;
  std::string out = "trace.json";
};

int run_run(const RunArgs& a) {
  IncidentContext ctx = load_bundle(a.bundle);
  auto exec = make_executor(a.executor);
  RcaTrace trace = run_pipeline(*exec, ctx, a.seed);
  write_trace(a.out, trace);
  AuditReport report = audit_trace(trace, ctx);
  std::cout << "trace " << a.out << ": executor " << trace.executor_id
            << ", S = " << report.S;
  if (!trace.dr.ranking.empty())
    std::cout << ", top-1 " << trace.dr.ranking.front().entity;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string trace;
  std::string bundle;
  std::string weights;
  std::string out;
};

int run_audit(const AuditArgs& a) {
  IncidentContext ctx = load_bundle(a.bundle);
  RcaTrace trace = load_trace(a.trace);
  const auto weights =
      a.weights.empty() ? uniform_weights() : load_weights(a.weights);
  AuditReport report = audit_trace(trace, ctx, weights);
  const json j = to_json(report);
  if (a.out.empty())
    std::cout << j.dump(2) << "\n";
  else {
    write_json_file(a.out, j);
    std::cout << "audit " << a.out << ": S = " << report.S << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PatchArgs {
  std::string trace;
  std::string bundle;
  std::string stage;
  std::string op;
  std::string executor = "strong";
  std::string out;
};

int run_patch(const PatchArgs& a) {
  IncidentContext ctx = load_bundle(a.bundle);
  RcaTrace trace = load_trace(a.trace);
  const auto stage = stage_from_string(a.stage);
  if (!stage) throw std::invalid_argument("unknown stage: " + a.stage);
  const auto op = patch_operator_from_string(a.op);
  if (!op) throw std::invalid_argument("unknown operator: " + a.op);
  if (stage_of_operator(*op) != *stage)
    throw std::invalid_argument("operator " + a.op + " belongs to stage " +
                                to_string(stage_of_operator(*op)) + ", not " +
                                a.stage);
  StagePatch patch;
  patch.stage = *stage;
  patch.op = *op;
  patch.produced_by = "manual";
  patch.rationale = "manual debugging patch";

  auto exec = make_executor(a.executor);
  const double before = audit_trace(trace, ctx).S;
  RcaTrace patched = replay_with_patch(trace, patch, *exec, ctx,
                                       /*strict=*/false);
  const double after = audit_trace(patched, ctx).S;
  if (!a.out.empty()) write_trace(a.out, patched);
  std::cout << "patch " << a.op << " at " << a.stage << ": S " << before
            << " -> " << after;
  if (!a.out.empty()) std::cout << ", trace written to " << a.out;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RepairArgs {
  std::string trace;
  std::string bundle;
  std::string executor = "strong";
  std::string config;
  std::string weights;
  std::string memory;
  std::optional<double> tau;
  std::optional<double> epsilon;
  std::string out = "result.json";
};

int run_repair(const RepairArgs& a) {
  IncidentContext ctx = load_bundle(a.bundle);
  RcaTrace trace = load_trace(a.trace);
  EvalConfig cfg = base_config(a.config);
  apply_router_overrides(cfg, a.tau, a.epsilon);
  if (!a.weights.empty()) cfg.repair.weights = load_weights(a.weights);

  auto exec = make_executor(a.executor);
  RepairMemory memory;
  const bool use_memory = !a.memory.empty();
  if (use_memory && std::filesystem::exists(a.memory))
    memory = RepairMemory::load(a.memory);

  RepairResult result = repair_trace(trace, ctx, *exec, cfg.repair,
                                     use_memory ? &memory : nullptr);
  if (use_memory) memory.save(a.memory);
  write_json_file(a.out, to_json(result));
  std::cout << "repair " << a.out << ": " << to_string(result.outcome)
            << ", S " << result.initial_S << " -> " << result.final_S
            << ", rounds " << result.rounds_used;
  if (result.decisive_stage)
    std::cout << ", decisive stage " << to_string(*result.decisive_stage);
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string config;
  std::string out = "reports";
  std::optional<int> jobs;
  std::optional<double> tau;
  std::optional<double> epsilon;
  std::string variant;  // ablate only
};

int run_eval(const EvalArgs& a) {
  EvalConfig cfg = base_config(a.config);
  apply_router_overrides(cfg, a.tau, a.epsilon);
  if (a.jobs) cfg.jobs = *a.jobs;

  EvalRun run;
  if (a.variant.empty()) {
    run = run_experiment(cfg);
  } else {
    const auto variant = repair_variant_from_string(a.variant);
    if (!variant)
      throw std::invalid_argument(
          "unknown variant: " + a.variant +
          " (expected full, no_fast_slow or no_cce)");
    run = run_ablation(cfg, *variant);
  }
  write_eval_outputs(run, a.out);
  const EvalReport& r = run.report;
  std::cout << "eval " << a.out << ": " << r.case_count << " cases";
  if (r.acc_at.count(1)) std::cout << ", acc@1 " << r.acc_at.at(1);
  std::cout << ", stage acc " << r.overall_stage_accuracy << ", mean rounds "
            << r.mean_rounds << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "stage-attributed triage and repair for microservice RCA traces"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim =
      app.add_subcommand("simulate", "generate a synthetic incident bundle");
  c_sim->add_option("--seed", sim.seed, "simulation seed");
  c_sim->add_option("--services", sim.services, "number of services");
  c_sim->add_option("--replicas", sim.replicas, "pods per service");
  c_sim->add_option("--nodes", sim.nodes, "number of nodes");
  c_sim->add_option("--fault", sim.fault, "fault class to inject");
  c_sim->add_option("--root", sim.root, "root entity (default: auto)");
  c_sim->add_option("--onset-min", sim.onset_min,
                    "fault onset, minutes into the horizon");
  c_sim->add_option("--magnitude", sim.magnitude, "fault magnitude scale");
  c_sim->add_option("--out", sim.out, "bundle output directory")->required();

  RunArgs run_args;
  auto* c_run = app.add_subcommand("run", "run the diagnostic pipeline");
  c_run->add_option("--bundle", run_args.bundle, "incident bundle directory")
      ->required();
  c_run->add_option("--executor", run_args.executor,
                    "strong | weak | external");
  c_run->add_option("--seed", run_args.seed, "pipeline seed");
  c_run->add_option("--out", run_args.out, "trace output file");

  AuditArgs audit_args;
  auto* c_audit = app.add_subcommand("audit", "audit a trace");
  c_audit->add_option("--trace", audit_args.trace, "trace file")->required();
  c_audit->add_option("--bundle", audit_args.bundle, "bundle directory")
      ->required();
  c_audit->add_option("--weights", audit_args.weights,
                      "weights.json (default: uniform)");
  c_audit->add_option("--out", audit_args.out,
                      "report file (default: stdout)");

  PatchArgs patch_args;
  auto* c_patch =
      app.add_subcommand("patch", "apply one repair operator and replay");
  c_patch->add_option("--trace", patch_args.trace, "trace file")->required();
  c_patch->add_option("--bundle", patch_args.bundle, "bundle directory")
      ->required();
  c_patch->add_option("--stage", patch_args.stage, "S1 | S2 | S3 | S4")
      ->required();
  c_patch->add_option("--operator", patch_args.op, "operator name")
      ->required();
  c_patch->add_option("--executor", patch_args.executor,
                      "executor for downstream regeneration");
  c_patch->add_option("--out", patch_args.out, "patched trace output file");

  RepairArgs repair_args;
  auto* c_repair =
      app.add_subcommand("repair", "run the full audit-route-repair loop");
  c_repair->add_option("--trace", repair_args.trace, "trace file")
      ->required();
  c_repair->add_option("--bundle", repair_args.bundle, "bundle directory")
      ->required();
  c_repair->add_option("--executor", repair_args.executor,
                       "strong | weak | external");
  c_repair->add_option("--config", repair_args.config, "flat key config file");
  c_repair->add_option("--weights", repair_args.weights, "weights.json");
  c_repair->add_option("--memory", repair_args.memory,
                       "repair memory file (loaded if present, then saved)");
  c_repair->add_option("--tau", repair_args.tau, "router tau override");
  c_repair->add_option("--epsilon", repair_args.epsilon,
                       "router epsilon override");
  c_repair->add_option("--out", repair_args.out, "result output file");

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand("eval", "run an experiment suite");
  c_eval->add_option("--config", eval_args.config, "flat key config file");
  c_eval->add_option("--out", eval_args.out, "report output directory");
  c_eval->add_option("--jobs", eval_args.jobs, "worker threads");
  c_eval->add_option("--tau", eval_args.tau, "router tau override");
  c_eval->add_option("--epsilon", eval_args.epsilon,
                     "router epsilon override");

  EvalArgs ablate_args;
  auto* c_ablate =
      app.add_subcommand("ablate", "run an experiment with a variant engine");
  c_ablate->add_option("--variant", ablate_args.variant,
                       "full | no_fast_slow | no_cce")
      ->required();
  c_ablate->add_option("--config", ablate_args.config, "flat key config file");
  c_ablate->add_option("--out", ablate_args.out, "report output directory");
  c_ablate->add_option("--jobs", ablate_args.jobs, "worker threads");
  c_ablate->add_option("--tau", ablate_args.tau, "router tau override");
  c_ablate->add_option("--epsilon", ablate_args.epsilon,
                       "router epsilon override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_run->parsed()) return run_run(run_args);
    if (c_audit->parsed()) return run_audit(audit_args);
    if (c_patch->parsed()) return run_patch(patch_args);
    if (c_repair->parsed()) return run_repair(repair_args);
    if (c_eval->parsed()) return run_eval(eval_args);
    if (c_ablate->parsed()) return run_eval(ablate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
