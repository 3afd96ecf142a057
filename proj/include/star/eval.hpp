#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "star/faultinject.hpp"
#include "star/metrics.hpp"
#include "star/repair.hpp"

// The experiment harness. Enumerates a deterministic suite of synthetic
// incidents, corrupts each trace with one reasoning fault, runs the repair
// loop, and folds the per-case records into an aggregate report. Cases are
// independent, so they run on a thread pool; the fold is a sequential pass
// in case-index order, which keeps reports byte-identical at any job count.

namespace star {

struct EvalConfig {
  std::string executor = "strong";  // strong | weak
  int topologies = 2;               // distinct topology seeds
  int services = 12;                // services per topology
  int replicas = 2;                 // pods per service
  int nodes = 3;                    // nodes hosting the pods
  int repeats = 3;                  // repeats per (topology, class, fault)
  std::uint64_t seed = 1;           // base seed; every case seed derives from it
  int jobs = 1;                     // worker threads (not echoed in reports)
  bool inject = true;               // false -> clean traces, nothing corrupted
  std::vector<std::string> fault_classes;     // empty -> all five
  std::vector<std::string> reasoning_faults;  // empty -> all thirteen
  RepairConfig repair;

  std::vector<std::string> effective_fault_classes() const;
  std::vector<std::string> effective_reasoning_faults() const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  // Experiment parameters only — deliberately excludes `jobs`, so reports
  // from different parallelism levels stay byte-identical.
  json to_json() const;
};

// One evaluated incident: what was injected, what the loop did, what the
// final report predicted. Serialized one-per-line into cases.jsonl.
struct EvalCase {
  int case_index = 0;
  std::string case_id;
  std::uint64_t topology_seed = 0;
  std::uint64_t sim_seed = 0;
  std::string infra_class;      // simulated fault class (ground truth)
  std::string root_entity;      // ground-truth root cause entity
  std::string reasoning_fault;  // injected fault type; empty on clean runs
  int injected_stage = 0;       // 1..4; 0 on clean runs
  double initial_S = 0.0;
  double final_S = 0.0;
  std::string initial_route;    // pass | fast_repair | slow_repair
  std::string outcome;          // RepairOutcome name
  int decisive_stage = 0;       // 0 = nothing committed
  int rounds_used = 0;
  int rollback_count = 0;
  bool initially_correct = false;  // pre-repair top-1 == root
  bool finally_correct = false;    // post-repair top-1 == root
  bool fallback = false;           // shipped the verification-first report
  std::vector<std::string> predicted_ranking;  // entities, best first
  std::string predicted_class;                 // top candidate's fault class
  std::map<std::string, int> baseline_stages;  // attribution method -> stage
  json replay_log = json::array();             // full round/probe record
};

json to_json(const EvalCase& c);

struct EvalReport {
  std::map<int, double> acc_at;  // k in {1, 3, 5}
  ClassificationMetrics classification;
  double overall_stage_accuracy = 0.0;
  std::map<std::string, double> stage_accuracy;        // "S1".."S4"
  std::map<std::string, double> class_stage_accuracy;  // per infra class
  std::map<std::string, double> baseline_stage_accuracy;  // per method
  std::map<std::string, double> iteration_histogram;
  double mean_rounds = 0.0;          // over cases that engaged repair
  double repaired_fraction = 0.0;    // initially-incorrect fixed within budget
  int initially_incorrect_count = 0;
  int case_count = 0;
  json config_echo;
};

json to_json(const EvalReport& r);

// Pure fold over the per-case records; everything in the report is
// recomputable from cases.jsonl plus the config.
EvalReport fold_report(const std::vector<EvalCase>& cases,
                       const EvalConfig& cfg);

struct EvalRun {
  std::vector<EvalCase> cases;  // case_index order
  EvalReport report;
};

EvalRun run_experiment(const EvalConfig& cfg);
// Same suite with the engine switched to an ablation variant.
EvalRun run_ablation(EvalConfig cfg, RepairVariant variant);

// Writes cases.jsonl, report.json and report.csv into dir (created if
// missing). File bytes depend only on the run's contents.
void write_eval_outputs(const EvalRun& run, const std::filesystem::path& dir);

// Decisive-stage accuracy against the injected stage, per stage and per
// service fault class. Throws std::invalid_argument when cfg.inject is
// false — with no injected faults there is nothing to localize.
struct LocalizationAccuracy {
  double overall = 0.0;
  std::map<std::string, double> per_stage;
  std::map<std::string, double> per_class;
};

LocalizationAccuracy stage_localization_suite(const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Baseline stage attribution: one-shot predictions from the audit alone.

inline constexpr const char* kBaselineMethods[] = {
    "all_at_once", "step_by_step", "binary_search", "hybrid"};

struct BaselineAttribution {
  int stage = 4;
  bool low_confidence = false;  // the everything-clean S4 convention fired
  int probes = 0;               // prefix probes spent (binary_search only)
};

// all_at_once: stage with the largest summed check deficit.
// step_by_step: first stage holding a check of major or worse severity.
// binary_search: bisects "stages <= s contain a major" on the 4-stage prefix.
// hybrid: all_at_once's top-2 shortlist, scanned like step_by_step.
// All methods return S4 flagged low-confidence on a fully clean audit.
// Throws std::invalid_argument for an unknown method name.
BaselineAttribution baseline_attribution(const AuditReport& report,
                                         const std::string& method);

// ---------------------------------------------------------------------------
// Exhaustive localization oracle: replays every critic candidate at every
// stage (no candidate cap, no memory, no early exit inside a stage) and
// returns the earliest stage where some candidate lifts S by at least
// cfg.delta, or 0 when no stage qualifies. The acceptance suite holds the
// repair loop to this answer.
int exhaustive_decisive_oracle(const RcaTrace& t, const IncidentContext& ctx,
                               StageExecutor& exec, const RepairConfig& cfg);

// ---------------------------------------------------------------------------
// Deterministic suite plumbing, exposed for tests and the acceptance runner.

// Stable per-case seed derivation (splitmix-style).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

// Services worth injecting faults at: at least two transitive callers, so
// propagation produces a multi-entity story. Sorted by caller-closure size
// (descending), then id. Falls back to shallower services when the topology
// has no deep chains.
std::vector<std::string> root_candidates(const SystemTopology& topo);

// Simulates one incident, runs the agent, and (optionally) injects one
// reasoning fault; retries across candidate roots when a realization does
// not apply to the drawn incident. `reasoning_fault` empty means clean.
struct PreparedCase {
  IncidentContext ctx;
  RcaTrace trace;          // corrupted when a fault was injected
  std::string root_entity; // ground truth
  int injected_stage = 0;  // 0 on clean runs
};

PreparedCase prepare_case(std::uint64_t topo_seed, std::uint64_t sim_seed,
                          std::uint64_t agent_seed, const EvalConfig& cfg,
                          const std::string& infra_class,
                          const std::string& reasoning_fault,
                          const std::string& case_id);

}  // namespace star
