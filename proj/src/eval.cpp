#include "star/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "star/audit.hpp"
#include "star/json_io.hpp"
#include "star/router.hpp"
#include "star/simulate.hpp"

namespace star {

namespace {

constexpr TimeMs kMinute = 60'000;

// Faults strike ten minutes into the default thirty-minute horizon: enough
// quiet baseline before, enough symptom story after.
TimeMs default_onset(const SimParams& params) {
  return params.t0 + 10 * kMinute;
}

std::string top1_entity(const RcaTrace& t) {
  return t.dr.ranking.empty() ? std::string() : t.dr.ranking.front().entity;
}

json replay_log_json(const RepairResult& rr) {
  json rounds = json::array();
  for (const auto& r : rr.rounds) rounds.push_back(to_json(r));
  return rounds;
}

struct CaseSpec {
  int case_index = 0;
  std::string case_id;
  std::uint64_t topo_seed = 0;
  std::uint64_t sim_seed = 0;
  std::uint64_t agent_seed = 0;
  std::string infra_class;
  std::string reasoning_fault;  // empty = clean
};

std::vector<CaseSpec> enumerate_cases(const EvalConfig& cfg) {
  const auto classes = cfg.effective_fault_classes();
  std::vector<std::string> faults;
  if (cfg.inject)
    faults = cfg.effective_reasoning_faults();
  else
    faults = {""};

  std::vector<CaseSpec> specs;
  int idx = 0;
  for (int t = 0; t < cfg.topologies; ++t) {
    for (const auto& fc : classes) {
      for (const auto& rf : faults) {
        for (int r = 0; r < cfg.repeats; ++r, ++idx) {
          CaseSpec s;
          s.case_index = idx;
          char head[16];
          std::snprintf(head, sizeof head, "c%04d", idx);
          s.case_id = std::string(head) + "-t" + std::to_string(t) + "-" +
                      fc + "-" + (rf.empty() ? "clean" : rf) + "-r" +
                      std::to_string(r);
          s.topo_seed = derive_seed(cfg.seed, 101 + static_cast<std::uint64_t>(t));
          s.sim_seed = derive_seed(cfg.seed, 0x510000ull + idx);
          s.agent_seed = derive_seed(cfg.seed, 0xA60000ull + idx);
          s.infra_class = fc;
          s.reasoning_fault = rf;
          specs.push_back(std::move(s));
        }
      }
    }
  }
  return specs;
}

EvalCase evaluate_case(const CaseSpec& spec, const EvalConfig& cfg) {
  PreparedCase prepared =
      prepare_case(spec.topo_seed, spec.sim_seed, spec.agent_seed, cfg,
                   spec.infra_class, spec.reasoning_fault, spec.case_id);

  EvalCase ec;
  ec.case_index = spec.case_index;
  ec.case_id = spec.case_id;
  ec.topology_seed = spec.topo_seed;
  ec.sim_seed = spec.sim_seed;
  ec.infra_class = spec.infra_class;
  ec.root_entity = prepared.root_entity;
  ec.reasoning_fault = spec.reasoning_fault;
  ec.injected_stage = prepared.injected_stage;

  const auto weights = cfg.repair.effective_weights();
  AuditReport before = audit_trace(prepared.trace, prepared.ctx, weights);
  ec.initial_route = to_string(route_score(before.S, cfg.repair.router));
  if (prepared.injected_stage != 0) {
    for (const char* method : kBaselineMethods)
      ec.baseline_stages[method] = baseline_attribution(before, method).stage;
  }
  ec.initially_correct = top1_entity(prepared.trace) == prepared.root_entity;

  RuleBasedExecutor exec(cfg.executor == "weak"
                             ? RuleBasedExecutor::Strength::Weak
                             : RuleBasedExecutor::Strength::Strong);
  RepairResult rr =
      repair_trace(prepared.trace, prepared.ctx, exec, cfg.repair, nullptr);

  ec.initial_S = rr.initial_S;
  ec.final_S = rr.final_S;
  ec.outcome = to_string(rr.outcome);
  ec.decisive_stage = rr.decisive_stage ? stage_number(*rr.decisive_stage) : 0;
  ec.rounds_used = rr.rounds_used;
  ec.rollback_count = rr.rollback_count;
  ec.fallback = rr.outcome == RepairOutcome::verification_first_fallback;
  for (const auto& c : rr.final_trace.dr.ranking)
    ec.predicted_ranking.push_back(c.entity);
  ec.predicted_class = rr.final_trace.dr.ranking.empty()
                           ? std::string()
                           : rr.final_trace.dr.ranking.front().fault_class;
  ec.finally_correct = top1_entity(rr.final_trace) == prepared.root_entity;
  ec.replay_log = replay_log_json(rr);
  return ec;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double stage_deficit(const StageDiagnostics& d) {
  double deficit = 0.0;
  for (const auto& c : d.checks) deficit += 1.0 - c.score;
  return deficit;
}

bool stage_has_major(const StageDiagnostics& d) {
  return d.stage_severity == Severity::Major ||
         d.stage_severity == Severity::HardViolation;
}

bool audit_all_clean(const AuditReport& r) {
  for (const auto& d : r.diagnostics)
    for (const auto& c : d.checks)
      if (c.score < 1.0) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::vector<std::string> EvalConfig::effective_fault_classes() const {
  if (!fault_classes.empty()) return fault_classes;
  return std::vector<std::string>(std::begin(kFaultClasses),
                                  std::end(kFaultClasses));
}

std::vector<std::string> EvalConfig::effective_reasoning_faults() const {
  if (!reasoning_faults.empty()) return reasoning_faults;
  return std::vector<std::string>(std::begin(kFaultTypes),
                                  std::end(kFaultTypes));
}

void EvalConfig::validate() const {
  if (executor != "strong" && executor != "weak")
    throw std::invalid_argument("eval.executor must be strong or weak, got " +
                                executor);
  if (topologies < 1)
    throw std::invalid_argument("eval.topologies must be >= 1");
  if (services < 4)
    throw std::invalid_argument("sim.services must be >= 4");
  if (replicas < 1) throw std::invalid_argument("sim.replicas must be >= 1");
  if (nodes < 1) throw std::invalid_argument("sim.nodes must be >= 1");
  if (repeats < 1) throw std::invalid_argument("eval.repeats must be >= 1");
  if (jobs < 1 || jobs > 64)
    throw std::invalid_argument("eval.jobs must be in [1, 64]");
  for (const auto& fc : effective_fault_classes())
    if (!is_fault_class(fc))
      throw std::invalid_argument("eval.fault_classes names unknown class " +
                                  fc);
  for (const auto& rf : effective_reasoning_faults())
    if (!is_fault_type(rf))
      throw std::invalid_argument(
          "eval.reasoning_faults names unknown fault " + rf);
  repair.router.validate();
  if (repair.delta <= 0)
    throw std::invalid_argument("repair.delta must be > 0");
  if (repair.max_candidates < 1)
    throw std::invalid_argument("repair.max_candidates must be >= 1");
  if (repair.max_rounds < 1)
    throw std::invalid_argument("repair.max_rounds must be >= 1");
  if (repair.fallback_top_k < 1)
    throw std::invalid_argument("repair.fallback_top_k must be >= 1");
}

json EvalConfig::to_json() const {
  return json{
      {"executor", executor},
      {"topologies", topologies},
      {"services", services},
      {"replicas", replicas},
      {"nodes", nodes},
      {"repeats", repeats},
      {"seed", seed},
      {"inject", inject},
      {"fault_classes", effective_fault_classes()},
      {"reasoning_faults", effective_reasoning_faults()},
      {"router", json{{"tau", repair.router.tau},
                      {"epsilon", repair.router.epsilon}}},
      {"repair", json{{"delta", repair.delta},
                      {"max_candidates", repair.max_candidates},
                      {"max_rounds", repair.max_rounds},
                      {"fallback_top_k", repair.fallback_top_k},
                      {"variant", to_string(repair.variant)}}},
  };
}

// ---------------------------------------------------------------------------
// Case records

json to_json(const EvalCase& c) {
  json baselines = json::object();
  for (const auto& [method, stage] : c.baseline_stages)
    baselines[method] = stage;
  return json{{"case_index", c.case_index},
              {"case_id", c.case_id},
              {"topology_seed", c.topology_seed},
              {"sim_seed", c.sim_seed},
              {"infra_class", c.infra_class},
              {"root_entity", c.root_entity},
              {"reasoning_fault", c.reasoning_fault},
              {"injected_stage", c.injected_stage},
              {"initial_S", c.initial_S},
              {"final_S", c.final_S},
              {"initial_route", c.initial_route},
              {"outcome", c.outcome},
              {"decisive_stage", c.decisive_stage},
              {"rounds_used", c.rounds_used},
              {"rollback_count", c.rollback_count},
              {"initially_correct", c.initially_correct},
              {"finally_correct", c.finally_correct},
              {"fallback", c.fallback},
              {"predicted_ranking", c.predicted_ranking},
              {"predicted_class", c.predicted_class},
              {"baseline_stages", std::move(baselines)},
              {"replay_log", c.replay_log}};
}

// ---------------------------------------------------------------------------
// Fold

EvalReport fold_report(const std::vector<EvalCase>& cases,
                       const EvalConfig& cfg) {
  EvalReport r;
  r.case_count = static_cast<int>(cases.size());
  r.config_echo = cfg.to_json();
  if (cases.empty()) {
    r.iteration_histogram =
        iteration_histogram({}, cfg.repair.max_rounds);
    return r;
  }

  std::vector<ScoredCase> scored;
  for (const auto& c : cases)
    scored.push_back(
        {c.predicted_ranking, c.root_entity, c.predicted_class, c.infra_class});
  for (int k : {1, 3, 5}) r.acc_at[k] = acc_at_k(scored, k);
  r.classification = classification_metrics(scored);

  // Decisive-stage accuracy over injected cases, grouped two ways.
  std::map<std::string, std::vector<double>> by_stage;
  std::map<std::string, std::vector<double>> by_class;
  std::map<std::string, std::vector<double>> by_method;
  std::vector<double> overall;
  for (const auto& c : cases) {
    if (c.injected_stage == 0) continue;
    const double hit = c.decisive_stage == c.injected_stage ? 1.0 : 0.0;
    by_stage["S" + std::to_string(c.injected_stage)].push_back(hit);
    by_class[c.infra_class].push_back(hit);
    overall.push_back(hit);
    for (const auto& [method, stage] : c.baseline_stages)
      by_method[method].push_back(stage == c.injected_stage ? 1.0 : 0.0);
  }
  r.overall_stage_accuracy = mean_of(overall);
  for (const auto& [key, hits] : by_stage) r.stage_accuracy[key] = mean_of(hits);
  for (const auto& [key, hits] : by_class)
    r.class_stage_accuracy[key] = mean_of(hits);
  for (const auto& [key, hits] : by_method)
    r.baseline_stage_accuracy[key] = mean_of(hits);

  // Repair effort over the cases that engaged the loop at all.
  std::vector<RepairRounds> engaged;
  std::vector<double> rounds;
  for (const auto& c : cases) {
    if (c.outcome == "passed") continue;
    const bool resolved =
        c.outcome == "fast_repaired" || c.outcome == "slow_repaired";
    engaged.push_back({resolved, c.rounds_used});
    rounds.push_back(static_cast<double>(c.rounds_used));
  }
  r.iteration_histogram =
      iteration_histogram(engaged, cfg.repair.max_rounds);
  r.mean_rounds = mean_of(rounds);

  int incorrect = 0, fixed = 0;
  for (const auto& c : cases) {
    if (c.initially_correct) continue;
    ++incorrect;
    if (c.finally_correct) ++fixed;
  }
  r.initially_incorrect_count = incorrect;
  r.repaired_fraction =
      incorrect == 0 ? 0.0
                     : static_cast<double>(fixed) / static_cast<double>(incorrect);
  return r;
}

json to_json(const EvalReport& r) {
  json acc = json::object();
  for (const auto& [k, v] : r.acc_at) acc[std::to_string(k)] = v;
  return json{
      {"acc_at", std::move(acc)},
      {"classification",
       json{{"micro_precision", r.classification.micro_precision},
            {"macro_precision", r.classification.macro_precision},
            {"micro_recall", r.classification.micro_recall},
            {"macro_recall", r.classification.macro_recall},
            {"micro_f1", r.classification.micro_f1},
            {"macro_f1", r.classification.macro_f1}}},
      {"stage_localization", json{{"overall", r.overall_stage_accuracy},
                                  {"per_stage", r.stage_accuracy},
                                  {"per_class", r.class_stage_accuracy}}},
      {"baseline_stage_accuracy", r.baseline_stage_accuracy},
      {"iteration_histogram", r.iteration_histogram},
      {"mean_rounds", r.mean_rounds},
      {"repaired_fraction", r.repaired_fraction},
      {"initially_incorrect_count", r.initially_incorrect_count},
      {"case_count", r.case_count},
      {"config", r.config_echo},
  };
}

// ---------------------------------------------------------------------------
// Suite plumbing

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::string> root_candidates(const SystemTopology& topo) {
  struct Scored {
    int closure;
    std::string id;
  };
  std::vector<Scored> all;
  for (const auto& svc : topo.services) {
    std::set<std::string> seen{svc};
    std::vector<std::string> queue{svc};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (const auto& caller : topo.callers_of(queue[head]))
        if (seen.insert(caller).second) queue.push_back(caller);
    }
    all.push_back({static_cast<int>(queue.size()) - 1, svc});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.closure != b.closure) return a.closure > b.closure;
    return a.id < b.id;
  });
  std::vector<std::string> deep;
  for (const auto& s : all)
    if (s.closure >= 2) deep.push_back(s.id);
  if (!deep.empty()) return deep;
  std::vector<std::string> shallow;
  for (const auto& s : all)
    if (s.closure >= 1) shallow.push_back(s.id);
  if (!shallow.empty()) return shallow;
  for (const auto& s : all) shallow.push_back(s.id);
  return shallow;
}

PreparedCase prepare_case(std::uint64_t topo_seed, std::uint64_t sim_seed,
                          std::uint64_t agent_seed, const EvalConfig& cfg,
                          const std::string& infra_class,
                          const std::string& reasoning_fault,
                          const std::string& case_id) {
  SystemTopology topo =
      generate_topology(topo_seed, cfg.services, cfg.replicas, cfg.nodes);
  const auto roots = root_candidates(topo);
  if (roots.empty())
    throw std::runtime_error("topology has no service to inject at");

  const SimParams params;
  const std::size_t start =
      static_cast<std::size_t>(derive_seed(sim_seed, 0) % roots.size());
  std::string last_error;
  for (std::size_t attempt = 0; attempt < roots.size(); ++attempt) {
    const std::string& root = roots[(start + attempt) % roots.size()];
    FaultSpec fault;
    fault.fault_class = infra_class;
    fault.root_entity = root;
    fault.onset = default_onset(params);
    auto [store, gt] = inject_service_fault(topo, sim_seed, fault, params);
    PreparedCase out{
        IncidentContext::make(case_id, topo, std::move(store), gt), {}, root,
        0};

    RuleBasedExecutor exec(cfg.executor == "weak"
                               ? RuleBasedExecutor::Strength::Weak
                               : RuleBasedExecutor::Strength::Strong);
    if (reasoning_fault.empty()) {
      out.trace = run_pipeline(exec, out.ctx, agent_seed);
      return out;
    }
    ReasoningFaultSpec spec;
    spec.fault_type = reasoning_fault;
    spec.target_stage = stage_of_fault(reasoning_fault);
    try {
      InjectedTrace injected =
          inject_reasoning_fault(exec, out.ctx, spec, agent_seed);
      out.trace = std::move(injected.trace);
      out.injected_stage = stage_number(injected.injected_stage);
      return out;
    } catch (const FaultNotRealizable& e) {
      last_error = e.what();  // try the next candidate root
    }
  }
  throw std::runtime_error("no realizable setup for " + reasoning_fault +
                           " on case " + case_id + ": " + last_error);
}

// ---------------------------------------------------------------------------
// Experiment driver

EvalRun run_experiment(const EvalConfig& cfg) {
  cfg.validate();
  const auto specs = enumerate_cases(cfg);
  std::vector<EvalCase> cases(specs.size());

  if (cfg.jobs <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i)
      cases[i] = evaluate_case(specs[i], cfg);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::exception_ptr> errors(
        static_cast<std::size_t>(cfg.jobs));
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.jobs; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = cursor.fetch_add(1); i < specs.size();
               i = cursor.fetch_add(1))
            cases[i] = evaluate_case(specs[i], cfg);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalRun run;
  run.cases = std::move(cases);
  run.report = fold_report(run.cases, cfg);
  return run;
}

EvalRun run_ablation(EvalConfig cfg, RepairVariant variant) {
  cfg.repair.variant = variant;
  return run_experiment(cfg);
}

void write_eval_outputs(const EvalRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream f(dir / "cases.jsonl", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + dir.string());
    for (const auto& c : run.cases) f << to_json(c).dump() << "\n";
  }
  write_json_file(dir / "report.json", to_json(run.report));
  {
    std::ofstream f(dir / "report.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + dir.string());
    f << "metric,value\n";
    auto row = [&f](const std::string& name, double value) {
      f << name << "," << json(value).dump() << "\n";
    };
    const EvalReport& r = run.report;
    for (const auto& [k, v] : r.acc_at) row("acc_at_" + std::to_string(k), v);
    row("micro_precision", r.classification.micro_precision);
    row("macro_precision", r.classification.macro_precision);
    row("micro_recall", r.classification.micro_recall);
    row("macro_recall", r.classification.macro_recall);
    row("micro_f1", r.classification.micro_f1);
    row("macro_f1", r.classification.macro_f1);
    row("stage_localization_overall", r.overall_stage_accuracy);
    for (const auto& [k, v] : r.stage_accuracy)
      row("stage_localization_" + k, v);
    for (const auto& [k, v] : r.class_stage_accuracy)
      row("stage_localization_class_" + k, v);
    for (const auto& [k, v] : r.baseline_stage_accuracy)
      row("baseline_" + k, v);
    for (const auto& [k, v] : r.iteration_histogram)
      row("iteration_histogram_" + k, v);
    row("mean_rounds", r.mean_rounds);
    row("repaired_fraction", r.repaired_fraction);
    row("initially_incorrect_count", r.initially_incorrect_count);
    row("case_count", r.case_count);
  }
}

LocalizationAccuracy stage_localization_suite(const EvalConfig& cfg) {
  if (!cfg.inject)
    throw std::invalid_argument(
        "stage localization needs fault injection enabled; the suite has "
        "nothing to localize on clean traces");
  EvalRun run = run_experiment(cfg);
  LocalizationAccuracy acc;
  acc.overall = run.report.overall_stage_accuracy;
  acc.per_stage = run.report.stage_accuracy;
  acc.per_class = run.report.class_stage_accuracy;
  return acc;
}

// ---------------------------------------------------------------------------
// Baselines

BaselineAttribution baseline_attribution(const AuditReport& report,
                                         const std::string& method) {
  BaselineAttribution out;
  const bool clean = audit_all_clean(report);

  if (method == "all_at_once") {
    if (clean) {
      out.stage = 4;
      out.low_confidence = true;
      return out;
    }
    int best = 0;
    double best_deficit = -1.0;
    for (int i = 0; i < 4; ++i) {
      const double d = stage_deficit(report.diagnostics[i]);
      if (d > best_deficit + 1e-12) {
        best_deficit = d;
        best = i;
      }
    }
    out.stage = best + 1;
    return out;
  }

  if (method == "step_by_step") {
    for (int i = 0; i < 4; ++i) {
      if (stage_has_major(report.diagnostics[i])) {
        out.stage = i + 1;
        return out;
      }
    }
    out.stage = 4;
    out.low_confidence = true;
    return out;
  }

  if (method == "binary_search") {
    // Bisect the minimal s whose prefix S1..s holds a major-or-worse check.
    auto prefix_dirty = [&](int s) {
      ++out.probes;
      for (int i = 0; i < s; ++i)
        if (stage_has_major(report.diagnostics[i])) return true;
      return false;
    };
    int lo = 1, hi = 4;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (prefix_dirty(mid))
        hi = mid;
      else
        lo = mid + 1;
    }
    out.stage = lo;
    if (lo == 4 && !stage_has_major(report.diagnostics[3]))
      out.low_confidence = true;  // ran off the lattice: nothing major anywhere
    return out;
  }

  if (method == "hybrid") {
    if (clean) {
      out.stage = 4;
      out.low_confidence = true;
      return out;
    }
    std::array<int, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return stage_deficit(report.diagnostics[a]) >
             stage_deficit(report.diagnostics[b]) + 1e-12;
    });
    std::array<int, 2> shortlist{std::min(order[0], order[1]),
                                 std::max(order[0], order[1])};
    for (int i : shortlist) {
      if (stage_has_major(report.diagnostics[i])) {
        out.stage = i + 1;
        return out;
      }
    }
    out.stage = order[0] + 1;  // highest deficit, nothing major anywhere
    return out;
  }

  throw std::invalid_argument("unknown attribution method: " + method);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

int exhaustive_decisive_oracle(const RcaTrace& t, const IncidentContext& ctx,
                               StageExecutor& exec, const RepairConfig& cfg) {
  const auto weights = cfg.effective_weights();
  const AuditReport report = audit_trace(t, ctx, weights);
  for (int i = 0; i < 4; ++i) {
    const auto candidates = propose_candidates(
        report.diagnostics[i], std::numeric_limits<int>::max());
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& patch : candidates) {
      try {
        RcaTrace replayed = replay_with_patch(t, patch, exec, ctx, true);
        best = std::max(best,
                        audit_trace(replayed, ctx, weights).S - report.S);
      } catch (const InsufficientEvidenceError&) {
        // A probe that reasons itself out of evidence does not qualify.
      }
    }
    if (best >= cfg.delta) return i + 1;
  }
  return 0;
}

}  // namespace star
