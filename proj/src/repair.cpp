#include "star/repair.hpp"

#include <algorithm>
#include <fstream>

#include "star/analysis.hpp"
#include "star/audit.hpp"
#include "star/json_io.hpp"

namespace star {

namespace {

// Recollection operators tried after an evidence dead end, strongest first.
constexpr PatchOperator kRecollectionOps[] = {
    PatchOperator::expand_scope_neighbors,
    PatchOperator::shift_expand_window,
    PatchOperator::requery_modality,
};

std::vector<StagePatch> recollection_candidates() {
  std::vector<StagePatch> out;
  for (PatchOperator op : kRecollectionOps) {
    StagePatch p;
    p.stage = StageIndex::S1;
    p.op = op;
    p.produced_by = "rollback:evidence_recollection";
    p.rationale = "probing destroyed the working evidence; rebuild it";
    out.push_back(std::move(p));
  }
  return out;
}

struct LocalizeResult {
  std::optional<StageIndex> stage;
  std::optional<CandidateOutcome> best;
  std::vector<CandidateOutcome> probes;
  int rollbacks = 0;
  bool evidence_dead_end = false;
};

struct Prober {
  const IncidentContext& ctx;
  StageExecutor& exec;
  const std::map<std::string, double>& weights;
  double S_before;
};

// Evaluates one stage's candidates; returns the best outcome (ties toward
// the lower candidate index, i.e. the first tried). Memory templates sit at
// the head of `candidates`; when one of them already clears delta the critic
// candidates behind it are not probed at all. A candidate whose replay loses
// the evidence chain is logged as infeasible and skipped; `saw_dead_end`
// records that at least one probe died that way.
std::optional<CandidateOutcome> probe_stage(
    const RcaTrace& t, const std::vector<StagePatch>& candidates,
    size_t memory_count, double delta, Prober& prober,
    std::vector<CandidateOutcome>& probe_log, RcaTrace* best_trace,
    bool* saw_dead_end) {
  std::optional<CandidateOutcome> best;
  RcaTrace best_replayed;
  for (size_t k = 0; k < candidates.size(); ++k) {
    CandidateOutcome out;
    out.patch = candidates[k];
    out.candidate_index = static_cast<int>(k);
    out.stages_rerun = 4 - stage_number(candidates[k].stage);
    RcaTrace replayed;
    try {
      replayed =
          replay_with_patch(t, candidates[k], prober.exec, prober.ctx, true);
    } catch (const InsufficientEvidenceError&) {
      out.infeasible = true;
      out.replayed_S = -1.0;
      out.delta_S = -1.0;
      probe_log.push_back(out);
      if (saw_dead_end) *saw_dead_end = true;
      continue;
    }
    out.replayed_S = audit_trace(replayed, prober.ctx, prober.weights).S;
    out.delta_S = out.replayed_S - prober.S_before;
    probe_log.push_back(out);
    if (!best || out.delta_S > best->delta_S) {
      best = out;
      best_replayed = std::move(replayed);
    }
    // Memory hit: an already-proven template clears the bar, so skip the
    // exploratory candidates behind it.
    if (k + 1 == memory_count && best && best->delta_S >= delta) break;
  }
  if (best && best_trace) *best_trace = std::move(best_replayed);
  return best;
}

}  // namespace

std::map<std::string, double> RepairConfig::effective_weights() const {
  if (weights.empty()) return uniform_weights();
  validate_weights(weights);
  return weights;
}

std::string to_string(RepairVariant v) {
  switch (v) {
    case RepairVariant::full: return "full";
    case RepairVariant::no_fast_slow: return "no_fast_slow";
    case RepairVariant::no_cce: return "no_cce";
  }
  return "full";
}

std::optional<RepairVariant> repair_variant_from_string(const std::string& s) {
  if (s == "full") return RepairVariant::full;
  if (s == "no_fast_slow") return RepairVariant::no_fast_slow;
  if (s == "no_cce") return RepairVariant::no_cce;
  return std::nullopt;
}

std::string to_string(RepairOutcome o) {
  switch (o) {
    case RepairOutcome::passed: return "passed";
    case RepairOutcome::fast_repaired: return "fast_repaired";
    case RepairOutcome::slow_repaired: return "slow_repaired";
    case RepairOutcome::verification_first_fallback:
      return "verification_first_fallback";
  }
  return "passed";
}

RcaTrace replay_with_patch(const RcaTrace& t, const StagePatch& patch,
                           StageExecutor& exec, const IncidentContext& ctx,
                           bool strict) {
  StageArtifact patched = apply_patch(t, patch, ctx);
  RcaTrace out = replace_stage(t, patch.stage, patched, patch);
  auto guard_analysis = [&](const AnalysisStructure& as) {
    if (strict && as.insufficient_evidence && as.paths.empty())
      throw InsufficientEvidenceError(
          StageIndex::S3, "replay after " + to_string(patch.op) +
                              " lost every defensible propagation chain");
  };
  if (patch.stage == StageIndex::S3) guard_analysis(out.as_);
  for (StageIndex s : stages_after(patch.stage)) {
    StageArtifact a = exec.run_stage(s, out, ctx, out.seed);
    if (s == StageIndex::S3) guard_analysis(std::get<AnalysisStructure>(a));
    set_stage_artifact(out, s, a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repair memory

std::string IncidentSignature::key() const {
  return dominant_modality + "/" + class_guess + "/" + spread + "/" + fanout;
}

IncidentSignature incident_signature(const IncidentContext& ctx) {
  IncidentSignature sig;

  // Dominant modality: which signal family carries the incident. Metric
  // breaches are counted per anomalous entity; logs and spans by volume of
  // non-ok records over the horizon, scaled to comparable units.
  size_t metric_entities = ctx.summary.entity_onsets.size();
  size_t noisy_logs = 0;
  for (const auto& l : ctx.store.logs)
    if (l.severity == "error") ++noisy_logs;
  size_t bad_spans = 0;
  for (const auto& s : ctx.store.spans)
    if (s.status != "ok") ++bad_spans;
  sig.dominant_modality = "metric";
  size_t best = metric_entities;
  if (noisy_logs / 50 > best) {
    best = noisy_logs / 50;
    sig.dominant_modality = "log";
  }
  if (bad_spans / 50 > best) sig.dominant_modality = "trace";

  auto guess = incident_class_guess(ctx);
  sig.class_guess = guess ? *guess : "unknown";

  size_t spread = ctx.summary.entity_onsets.size();
  sig.spread = spread < 10 ? "narrow" : spread < 30 ? "mid" : "wide";

  int fanout = 0;
  if (ctx.summary.earliest_entity) {
    std::string svc = *ctx.summary.earliest_entity;
    if (auto owner = ctx.topo.service_of(svc)) svc = *owner;
    fanout = static_cast<int>(ctx.topo.callees_of(svc).size());
  }
  sig.fanout = fanout == 0 ? "leaf" : fanout == 1 ? "chain" : "fanout";
  return sig;
}

std::vector<StagePatch> RepairMemory::lookup(const std::string& key,
                                             StageIndex stage) const {
  std::vector<const Entry*> hits;
  for (const auto& e : entries_)
    if (e.key == key && e.stage == stage) hits.push_back(&e);
  std::stable_sort(hits.begin(), hits.end(),
                   [](const Entry* a, const Entry* b) {
                     return a->best_delta_S > b->best_delta_S;
                   });
  std::vector<StagePatch> out;
  for (size_t i = 0; i < hits.size(); ++i) {
    StagePatch p;
    p.stage = stage;
    p.op = hits[i]->op;
    p.produced_by = "memory:" + std::to_string(i + 1);
    p.rationale = "template from a similar incident (gain " +
                  std::to_string(hits[i]->best_delta_S) + ")";
    out.push_back(std::move(p));
  }
  return out;
}

void RepairMemory::record(const std::string& key, const StagePatch& patch,
                          double delta_S) {
  for (auto& e : entries_) {
    if (e.key == key && e.stage == patch.stage && e.op == patch.op) {
      e.best_delta_S = std::max(e.best_delta_S, delta_S);
      ++e.uses;
      return;
    }
  }
  entries_.push_back({key, patch.stage, patch.op, delta_S, 1});
}

json RepairMemory::to_json() const {
  json arr = json::array();
  for (const auto& e : entries_)
    arr.push_back(json{{"key", e.key},
                       {"stage", to_string(e.stage)},
                       {"op", to_string(e.op)},
                       {"best_delta_S", e.best_delta_S},
                       {"uses", e.uses}});
  return json{{"repair_memory", arr}};
}

RepairMemory RepairMemory::from_json(const json& j) {
  RepairMemory m;
  for (const auto& e : j.at("repair_memory")) {
    Entry entry;
    entry.key = e.at("key").get<std::string>();
    auto stage = stage_from_string(e.at("stage").get<std::string>());
    auto op = patch_operator_from_string(e.at("op").get<std::string>());
    if (!stage || !op)
      throw std::invalid_argument("repair memory entry names an unknown "
                                  "stage or operator");
    entry.stage = *stage;
    entry.op = *op;
    entry.best_delta_S = e.at("best_delta_S").get<double>();
    entry.uses = e.at("uses").get<int>();
    m.entries_.push_back(std::move(entry));
  }
  return m;
}

void RepairMemory::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json().dump(2) << "\n";
}

RepairMemory RepairMemory::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return from_json(json::parse(f));
}

// ---------------------------------------------------------------------------
// The loop

namespace {

LocalizeResult localize_decisive_stage(const RcaTrace& t,
                                       const AuditReport& report,
                                       const IncidentContext& ctx,
                                       StageExecutor& exec,
                                       const RepairConfig& cfg,
                                       RepairMemory* memory,
                                       const std::string& memory_key,
                                       RcaTrace& best_trace_out) {
  LocalizeResult res;
  Prober prober{ctx, exec, report.weights, report.S};

  bool saw_dead_end = false;
  for (int i = 0; i < 4; ++i) {
    StageIndex s = kAllStages[i];
    std::vector<StagePatch> remembered;
    if (memory) remembered = memory->lookup(memory_key, s);
    auto candidates = propose_candidates(report.diagnostics[i],
                                         cfg.max_candidates, remembered);
    size_t memory_count = 0;
    for (const auto& c : candidates)
      if (c.produced_by.rfind("memory:", 0) == 0) ++memory_count;
    if (candidates.empty()) continue;
    RcaTrace best_trace;
    auto best = probe_stage(t, candidates, memory_count, cfg.delta, prober,
                            res.probes, &best_trace, &saw_dead_end);
    if (best && best->delta_S >= cfg.delta) {
      res.stage = s;
      res.best = best;
      best_trace_out = std::move(best_trace);
      return res;
    }
  }
  if (!saw_dead_end) return res;  // no stage qualifies, evidence intact

  // At least one probe reasoned itself out of evidence and nothing else
  // cleared the bar: roll back to S1 once and rebuild the evidence base.
  ++res.rollbacks;
  RcaTrace best_trace;
  auto best = probe_stage(t, recollection_candidates(), 0, cfg.delta, prober,
                          res.probes, &best_trace, nullptr);
  if (best && best->delta_S >= cfg.delta) {
    res.stage = StageIndex::S1;
    res.best = best;
    best_trace_out = std::move(best_trace);
    return res;
  }
  res.evidence_dead_end = true;
  return res;
}

DecisionReport fallback_report(const RcaTrace& t, const IncidentContext& ctx) {
  if (!t.dr.ranking.empty() && !t.dr.verification_first) {
    // The trace already argues for an order; soften it into a testable
    // claim rather than discarding it for a hypothesis-order guess.
    DecisionReport dr;
    dr.verification_first = true;
    double conf = 0.6;
    for (const auto& c : t.dr.ranking) {
      if (dr.ranking.size() >= 5) break;
      dr.ranking.push_back({c.entity, c.fault_class, conf, {}});
      conf = std::max(0.05, conf - 0.1);
    }
    for (size_t i = 0; i < std::min<std::size_t>(3, dr.ranking.size()); ++i) {
      const auto& c = dr.ranking[i];
      VerificationTest vt;
      vt.target = c.entity;
      vt.signal = discriminating_signal(c.fault_class);
      vt.description = "verify " + c.fault_class + " at " + c.entity + ": " +
                       vt.signal;
      dr.verification_tests.push_back(std::move(vt));
    }
    return dr;
  }
  RuleBasedExecutor conservative(RuleBasedExecutor::Strength::Strong);
  AnalysisStructure empty;
  empty.insufficient_evidence = true;
  return conservative.build_decision(t.ep, t.hs, empty, ctx);
}

// Classifies how the loop ended and, on budget exhaustion below tau, swaps
// in the conservative verification-first report.
void finish_outcome(RepairResult& res, const AuditReport& report,
                    const RepairConfig& cfg, const IncidentContext& ctx,
                    const std::map<std::string, double>& weights,
                    bool any_slow_commit, bool fell_back) {
  if (fell_back) {
    res.outcome = RepairOutcome::verification_first_fallback;
  } else if (report.S >= cfg.router.tau) {
    if (!res.decisive_stage)
      res.outcome = RepairOutcome::passed;
    else
      res.outcome = any_slow_commit ? RepairOutcome::slow_repaired
                                    : RepairOutcome::fast_repaired;
  } else {
    // Round budget exhausted below tau: ship the conservative report.
    set_stage_artifact(res.final_trace, StageIndex::S4,
                       fallback_report(res.final_trace, ctx));
    res.final_S = audit_trace(res.final_trace, ctx, weights).S;
    res.outcome = RepairOutcome::verification_first_fallback;
  }
}

}  // namespace

RepairResult repair_trace(const RcaTrace& t, const IncidentContext& ctx,
                          StageExecutor& exec, const RepairConfig& cfg,
                          RepairMemory* memory) {
  cfg.router.validate();
  auto weights = cfg.effective_weights();
  const std::string memory_key = incident_signature(ctx).key();

  RepairResult res;
  res.final_trace = t;
  AuditReport report = audit_trace(t, ctx, weights);
  res.initial_S = report.S;

  bool any_slow_commit = false;
  bool fell_back = false;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    RoutingDecision decision = route_trace(report, cfg.router);
    if (decision.route == Route::Pass) break;
    if (cfg.variant == RepairVariant::no_fast_slow &&
        decision.route == Route::FastRepair) {
      decision.route = Route::SlowRepair;  // ablation: no fast lane
      decision.blamed_stage_hint.reset();
    }

    RoundLog log;
    log.round = round;
    log.route = decision.route;
    log.S_before = report.S;
    res.rounds_used = round;

    bool run_slow = decision.route == Route::SlowRepair;

    if (decision.route == Route::FastRepair) {
      StageIndex hint = *decision.blamed_stage_hint;
      std::vector<StagePatch> remembered;
      if (memory) remembered = memory->lookup(memory_key, hint);
      auto candidates =
          propose_candidates(report.diagnostics[stage_number(hint) - 1],
                             cfg.max_candidates, remembered);
      bool committed = false;
      if (!candidates.empty()) {
        try {
          RcaTrace replayed =
              replay_with_patch(res.final_trace, candidates.front(), exec,
                                ctx, /*strict=*/true);
          CandidateOutcome out;
          out.patch = candidates.front();
          out.candidate_index = 0;
          out.replayed_S = audit_trace(replayed, ctx, weights).S;
          out.delta_S = out.replayed_S - report.S;
          out.stages_rerun = 4 - stage_number(candidates.front().stage);
          log.probes.push_back(out);
          if (out.replayed_S >= cfg.router.tau) {
            // The single targeted patch verifiably fixes the trace: commit.
            res.final_trace = std::move(replayed);
            report = audit_trace(res.final_trace, ctx, weights);
            log.committed = out;
            if (!res.decisive_stage) res.decisive_stage = hint;
            if (memory && out.delta_S >= cfg.delta)
              memory->record(memory_key, out.patch, out.delta_S);
            committed = true;
          }
        } catch (const InsufficientEvidenceError&) {
          // The targeted patch destroyed the evidence chain; localize.
          CandidateOutcome out;
          out.patch = candidates.front();
          out.candidate_index = 0;
          out.stages_rerun = 4 - stage_number(candidates.front().stage);
          out.infeasible = true;
          out.replayed_S = -1.0;
          out.delta_S = -1.0;
          log.probes.push_back(out);
        }
      }
      if (!committed) {
        run_slow = true;
        log.escalated = true;
      }
    }

    if (run_slow && cfg.variant == RepairVariant::no_cce) {
      // Ablated localization: trust the severity hint, apply its top
      // candidate, and commit without probing alternatives.
      StageIndex hint = severity_hint(report);
      std::vector<StagePatch> remembered;
      if (memory) remembered = memory->lookup(memory_key, hint);
      auto candidates =
          propose_candidates(report.diagnostics[stage_number(hint) - 1],
                             cfg.max_candidates, remembered);
      bool committed = false;
      if (!candidates.empty()) {
        try {
          RcaTrace replayed = replay_with_patch(
              res.final_trace, candidates.front(), exec, ctx, /*strict=*/true);
          CandidateOutcome out;
          out.patch = candidates.front();
          out.candidate_index = 0;
          out.replayed_S = audit_trace(replayed, ctx, weights).S;
          out.delta_S = out.replayed_S - report.S;
          out.stages_rerun = 4 - stage_number(candidates.front().stage);
          log.probes.push_back(out);
          res.final_trace = std::move(replayed);
          report = audit_trace(res.final_trace, ctx, weights);
          log.committed = out;
          if (!res.decisive_stage) res.decisive_stage = hint;
          any_slow_commit = true;
          if (memory && out.delta_S >= cfg.delta)
            memory->record(memory_key, out.patch, out.delta_S);
          committed = true;
        } catch (const InsufficientEvidenceError&) {
        }
      }
      if (!committed) {
        set_stage_artifact(res.final_trace, StageIndex::S4,
                           fallback_report(res.final_trace, ctx));
        report = audit_trace(res.final_trace, ctx, weights);
        fell_back = true;
        res.rounds.push_back(std::move(log));
        break;
      }
    } else if (run_slow) {
      RcaTrace best_trace;
      LocalizeResult loc =
          localize_decisive_stage(res.final_trace, report, ctx, exec, cfg,
                                  memory, memory_key, best_trace);
      res.rollback_count += loc.rollbacks;
      log.rollbacks = loc.rollbacks;
      for (const auto& p : loc.probes) log.probes.push_back(p);
      if (loc.stage) {
        res.final_trace = std::move(best_trace);
        report = audit_trace(res.final_trace, ctx, weights);
        log.committed = loc.best;
        if (!res.decisive_stage) res.decisive_stage = loc.stage;
        any_slow_commit = true;
        if (memory && loc.best->delta_S >= cfg.delta)
          memory->record(memory_key, loc.best->patch, loc.best->delta_S);
      } else {
        // Dead end or no qualifying stage: conservative verification-first
        // report instead of a confident answer nothing supports.
        set_stage_artifact(res.final_trace, StageIndex::S4,
                           fallback_report(res.final_trace, ctx));
        report = audit_trace(res.final_trace, ctx, weights);
        fell_back = true;
        res.rounds.push_back(std::move(log));
        break;
      }
    }
    res.rounds.push_back(std::move(log));
  }

  res.final_S = report.S;
  finish_outcome(res, report, cfg, ctx, weights, any_slow_commit, fell_back);
  return res;
}

json to_json(const CandidateOutcome& o) {
  return json{{"stage", to_string(o.patch.stage)},
              {"op", to_string(o.patch.op)},
              {"produced_by", o.patch.produced_by},
              {"candidate_index", o.candidate_index},
              {"replayed_S", o.replayed_S},
              {"delta_S", o.delta_S},
              {"stages_rerun", o.stages_rerun},
              {"infeasible", o.infeasible}};
}

json to_json(const RoundLog& r) {
  json probes = json::array();
  for (const auto& p : r.probes) probes.push_back(to_json(p));
  json j{{"round", r.round},
         {"route", to_string(r.route)},
         {"S_before", r.S_before},
         {"probes", std::move(probes)},
         {"escalated", r.escalated},
         {"rollbacks", r.rollbacks}};
  j["committed"] = r.committed ? to_json(*r.committed) : json();
  return j;
}

json to_json(const RepairResult& r) {
  json rounds = json::array();
  for (const auto& rd : r.rounds) rounds.push_back(to_json(rd));
  return json{{"outcome", to_string(r.outcome)},
              {"decisive_stage",
               r.decisive_stage ? json(to_string(*r.decisive_stage)) : json()},
              {"rounds_used", r.rounds_used},
              {"rollback_count", r.rollback_count},
              {"initial_S", r.initial_S},
              {"final_S", r.final_S},
              {"replay_log", std::move(rounds)},
              {"final_trace", to_json(r.final_trace)}};
}

}  // namespace star
