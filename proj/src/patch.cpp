#include "star/patch.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "star/analysis.hpp"
#include "star/executor.hpp"

namespace star {

namespace {

constexpr TimeMs kMinuteMs = 60'000;
constexpr double kClaimScore = 0.3;
constexpr double kImplicationScore = 0.5;

int catalog_index(const std::string& check_id) {
  for (int i = 0; i < 12; ++i)
    if (check_id == kCheckIds[i]) return i;
  return 12;
}

std::set<std::string> implicated_entities(const EvidencePackage& ep) {
  std::set<std::string> out;
  for (const auto& item : ep.items)
    if (item.anomaly_score >= kImplicationScore && !is_edge_target(item.target))
      out.insert(item.target);
  return out;
}

int next_hypothesis_index(const HypothesisSet& hs) {
  int best = 0;
  for (const auto& h : hs.hypotheses) {
    int n = 0;
    if (std::sscanf(h.id.c_str(), "h%d", &n) == 1) best = std::max(best, n);
  }
  return best + 1;
}

std::string hypothesis_id(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "h%02d", n);
  return buf;
}

// Builds a fresh evidence-signature hypothesis for `entity`, the same way
// the base executor does; nullopt when the evidence doesn't classify.
std::optional<Hypothesis> hypothesis_for(const std::string& entity,
                                         const EvidencePackage& ep,
                                         const IncidentContext& ctx,
                                         double* strength_out = nullptr) {
  if (!ctx.topo.has_entity(entity)) return std::nullopt;
  auto cls = classify_signature(signature_from_items(ep, entity));
  if (!cls) return std::nullopt;
  Hypothesis h;
  h.candidate_entity = entity;
  h.fault_class = *cls;
  double strength = 0.0;
  for (const auto& item : ep.items) {
    if (item.anomaly_score < kClaimScore) continue;
    if (!item_touches(item, entity)) continue;
    h.supporting_evidence.push_back(item.id);
    strength += item.anomaly_score;
  }
  if (h.supporting_evidence.empty()) return std::nullopt;
  h.rationale = "evidence signature for " + entity + " matches " + *cls;
  if (strength_out) *strength_out = strength;
  return h;
}

// --- S1 operators -----------------------------------------------------------

EvidencePackage op_shift_expand_window(EvidencePackage ep,
                                       const IncidentContext& ctx) {
  if (ctx.summary.earliest_onset) {
    TimeMs want = *ctx.summary.earliest_onset - 2 * kMinuteMs;
    ep.incident_window.start =
        std::max(ctx.store.horizon.start,
                 std::min(ep.incident_window.start, want));
  }
  ep.items = collect_scope_evidence(ctx, ep.entity_scope, ep.incident_window);
  assign_item_ids(ep.items);
  return ep;
}

EvidencePackage op_requery_modality(EvidencePackage ep,
                                    const IncidentContext& ctx) {
  ep.items = collect_scope_evidence(ctx, ep.entity_scope, ep.incident_window);
  assign_item_ids(ep.items);
  return ep;
}

EvidencePackage op_expand_scope_neighbors(EvidencePackage ep,
                                          const IncidentContext& ctx) {
  std::set<std::string> scope(ep.entity_scope.begin(), ep.entity_scope.end());
  for (const auto& [entity, _] : ctx.summary.entity_onsets) {
    scope.insert(entity);
    if (auto svc = ctx.topo.service_of(entity)) scope.insert(*svc);
  }
  std::set<std::string> services;
  for (const auto& e : scope)
    if (entity_kind(e) == EntityKind::Service) services.insert(e);
  for (const auto& svc : services) {
    for (const auto& c : ctx.topo.callers_of(svc)) scope.insert(c);
    for (const auto& c : ctx.topo.callees_of(svc)) scope.insert(c);
  }
  ep.entity_scope.assign(scope.begin(), scope.end());
  // An honest re-query of the widened neighborhood covers the store's
  // anomalous span; keeping a clipped window would just re-poison the claims.
  if (ctx.summary.earliest_onset) {
    TimeMs want = *ctx.summary.earliest_onset - 2 * kMinuteMs;
    ep.incident_window.start =
        std::max(ctx.store.horizon.start,
                 std::min(ep.incident_window.start, want));
  }
  ep.items = collect_scope_evidence(ctx, ep.entity_scope, ep.incident_window);
  assign_item_ids(ep.items);
  return ep;
}

EvidencePackage op_realign_timestamps(EvidencePackage ep,
                                      const IncidentContext& ctx) {
  for (auto& item : ep.items) {
    if (item.modality == Modality::Metric) {
      auto ms = parse_metric_summary(item.summary);
      if (!ms) continue;
      auto an = scan_metric(ctx.store, item.target, ms->metric,
                            ep.incident_window);
      if (an) item.window = {an->first_breach, an->last_breach + 1};
    } else {
      auto slice = query_telemetry(ctx.store, item.modality, {item.target},
                                   ep.incident_window);
      std::optional<TimeMs> first, last;
      for (const auto& l : slice.logs) {
        if (l.severity != "error" && l.severity != "warn") continue;
        if (!first || l.ts < *first) first = l.ts;
        if (!last || l.ts > *last) last = l.ts;
      }
      for (const auto& s : slice.spans) {
        bool signal =
            s.status != "ok" ||
            ctx.store.zscore(item.target, kSpanDurationMetric, s.duration_ms) >=
                kOnsetZ;
        if (!signal) continue;
        if (!first || s.start < *first) first = s.start;
        if (!last || s.start > *last) last = s.start;
      }
      if (first) item.window = {*first, *last + 1};
    }
  }
  return ep;
}

// --- S2 operators -----------------------------------------------------------

HypothesisSet op_remove_unsupported(HypothesisSet hs,
                                    const EvidencePackage& ep,
                                    const IncidentContext& ctx) {
  std::set<std::string> covered;
  for (const auto& h : hs.hypotheses) covered.insert(h.candidate_entity);
  int n = next_hypothesis_index(hs);
  std::vector<Hypothesis> kept;
  for (auto& h : hs.hypotheses) {
    if (hypothesis_grounded(h, ep, ctx)) {
      kept.push_back(std::move(h));
      continue;
    }
    // An unsupported pod-level claim is widened to the enclosing service
    // when the evidence carries that claim; dropping it outright would
    // silently erase the only hypothesis near the culprit.
    if (entity_kind(h.candidate_entity) == EntityKind::Pod) {
      auto svc = ctx.topo.service_of(h.candidate_entity);
      if (svc && !covered.count(*svc)) {
        if (auto gen = hypothesis_for(*svc, ep, ctx);
            gen && hypothesis_grounded(*gen, ep, ctx)) {
          gen->id = hypothesis_id(n++);
          covered.insert(*svc);
          kept.push_back(std::move(*gen));
        }
      }
    }
  }
  hs.hypotheses = std::move(kept);
  return hs;
}

HypothesisSet op_add_alternatives(HypothesisSet hs, const EvidencePackage& ep,
                                  const IncidentContext& ctx) {
  std::set<std::string> covered;
  for (const auto& h : hs.hypotheses) covered.insert(h.candidate_entity);
  struct Scored {
    Hypothesis h;
    double strength = 0.0;
  };
  std::vector<Scored> fresh;
  for (const auto& entity : implicated_entities(ep)) {
    if (covered.count(entity)) continue;
    Scored s;
    if (auto h = hypothesis_for(entity, ep, ctx, &s.strength)) {
      s.h = std::move(*h);
      fresh.push_back(std::move(s));
    }
  }
  std::stable_sort(fresh.begin(), fresh.end(),
                   [](const Scored& a, const Scored& b) {
                     if (a.strength != b.strength)
                       return a.strength > b.strength;
                     return a.h.candidate_entity < b.h.candidate_entity;
                   });
  int n = next_hypothesis_index(hs);
  for (auto& s : fresh) {
    s.h.id = hypothesis_id(n++);
    hs.hypotheses.push_back(std::move(s.h));
  }
  return hs;
}

HypothesisSet op_add_counter_hypotheses(HypothesisSet hs,
                                        const EvidencePackage& ep,
                                        const IncidentContext& ctx) {
  (void)ep;
  (void)ctx;
  if (hs.hypotheses.empty()) return hs;
  const Hypothesis& top = hs.hypotheses.front();
  auto cc = counter_class(top.fault_class);
  if (!cc) return hs;
  for (const auto& h : hs.hypotheses)
    if (h.candidate_entity == top.candidate_entity && h.fault_class == *cc)
      return hs;  // already present
  Hypothesis h = top;
  h.id = hypothesis_id(next_hypothesis_index(hs));
  h.fault_class = *cc;
  h.rationale = "same signal pattern is also consistent with " + *cc;
  hs.hypotheses.push_back(std::move(h));
  return hs;
}

HypothesisSet op_add_cross_layer(HypothesisSet hs, const EvidencePackage& ep,
                                 const IncidentContext& ctx) {
  std::set<EntityKind> covered_layers;
  std::set<std::string> covered;
  for (const auto& h : hs.hypotheses) {
    covered_layers.insert(entity_kind(h.candidate_entity));
    covered.insert(h.candidate_entity);
  }
  int n = next_hypothesis_index(hs);
  for (const auto& entity : implicated_entities(ep)) {
    if (covered_layers.count(entity_kind(entity))) continue;
    if (covered.count(entity)) continue;
    if (auto h = hypothesis_for(entity, ep, ctx)) {
      h->id = hypothesis_id(n++);
      hs.hypotheses.push_back(std::move(*h));
    }
  }
  return hs;
}

// --- S3 operators -----------------------------------------------------------

AnalysisStructure op_rebuild_reachable_chain(const EvidencePackage& ep,
                                             const HypothesisSet& hs,
                                             const IncidentContext& ctx) {
  RuleBasedExecutor exec(RuleBasedExecutor::Strength::Strong);
  AnalysisStructure as = exec.build_analysis(ep, hs, ctx);
  if (as.paths.empty())
    throw InsufficientEvidenceError(
        StageIndex::S3,
        "no topology-and-onset-consistent chain can be built from the "
        "current evidence");
  return as;
}

AnalysisStructure op_prune_hallucinated_edges(AnalysisStructure as,
                                              const IncidentContext& ctx) {
  std::vector<PropagationPath> kept_paths;
  for (auto& p : as.paths) {
    std::vector<PathStep> kept;
    std::vector<int> original_index;
    std::set<std::string> seen;
    for (size_t i = 0; i < p.steps.size(); ++i) {
      const auto& step = p.steps[i];
      if (!ctx.topo.has_entity(step.entity)) continue;
      if (!seen.insert(step.entity).second) continue;
      if (!kept.empty() &&
          !ctx.topo.step_adjacent(kept.back().entity, step.entity,
                                  p.direction)) {
        seen.erase(step.entity);
        continue;
      }
      kept.push_back(step);
      original_index.push_back(static_cast<int>(i));
    }
    if (kept.empty()) continue;
    std::map<int, std::vector<std::string>> support;
    for (size_t i = 0; i + 1 < kept.size(); ++i) {
      // Only hops that existed verbatim in the original keep their support.
      if (original_index[i + 1] == original_index[i] + 1) {
        auto it = p.link_support.find(original_index[i]);
        if (it != p.link_support.end()) support[static_cast<int>(i)] =
            it->second;
      }
    }
    p.steps = std::move(kept);
    p.link_support = std::move(support);
    kept_paths.push_back(std::move(p));
  }
  as.paths = std::move(kept_paths);
  if (as.paths.empty()) as.insufficient_evidence = true;
  return as;
}

AnalysisStructure op_restore_temporal_order(AnalysisStructure as,
                                            const EvidencePackage& ep,
                                            const IncidentContext& ctx) {
  for (auto& p : as.paths) {
    auto onset_of = [&](const PathStep& s) {
      auto o = effective_onset(ctx, ep, s.entity);
      return o ? *o : std::numeric_limits<TimeMs>::max();
    };
    std::vector<PathStep> pool = p.steps;
    std::stable_sort(pool.begin(), pool.end(),
                     [&](const PathStep& a, const PathStep& b) {
                       return onset_of(a) < onset_of(b);
                     });
    // Onset order is authoritative; steps sharing an onset bucket are only
    // permuted so that consecutive steps stay call-graph neighbours.
    std::vector<size_t> chain;
    std::vector<bool> used(pool.size(), false);
    std::function<bool()> arrange = [&]() -> bool {
      if (chain.size() == pool.size()) return true;
      std::optional<TimeMs> bucket;
      for (size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        if (!bucket) bucket = onset_of(pool[i]);
        if (onset_of(pool[i]) != *bucket) break;
        if (!chain.empty() &&
            !ctx.topo.step_adjacent(pool[chain.back()].entity, pool[i].entity,
                                    "reverse_call"))
          continue;
        used[i] = true;
        chain.push_back(i);
        if (arrange()) return true;
        chain.pop_back();
        used[i] = false;
      }
      return false;
    };
    if (arrange()) {
      std::vector<PathStep> ordered;
      ordered.reserve(chain.size());
      for (size_t i : chain) ordered.push_back(pool[i]);
      p.steps = std::move(ordered);
    } else {
      p.steps = std::move(pool);
    }
    for (auto& step : p.steps)
      step.onset = effective_onset(ctx, ep, step.entity);
    p.direction = "reverse_call";
    p.link_support.clear();
    for (size_t i = 0; i + 1 < p.steps.size(); ++i)
      p.link_support[static_cast<int>(i)] =
          link_support_ids(ep, p.steps[i].entity, p.steps[i + 1].entity);
  }
  return as;
}

AnalysisStructure op_attach_link_support(AnalysisStructure as,
                                         const EvidencePackage& ep) {
  for (auto& p : as.paths) {
    p.link_support.clear();
    for (size_t i = 0; i + 1 < p.steps.size(); ++i)
      p.link_support[static_cast<int>(i)] =
          link_support_ids(ep, p.steps[i].entity, p.steps[i + 1].entity);
  }
  return as;
}

// --- S4 operators -----------------------------------------------------------

int backed_count_for(const RankedCandidate& c, const RcaTrace& t,
                     const IncidentContext& ctx) {
  if (!c.derived_from.empty()) return backed_support_count(ctx, t, c);
  int n = 0;
  for (const auto& item : t.ep.items)
    if (item.anomaly_score >= kClaimScore && item_touches(item, c.entity) &&
        item_backed(ctx, item))
      ++n;
  return n;
}

DecisionReport op_recalibrate_confidence(DecisionReport dr, const RcaTrace& t,
                                         const IncidentContext& ctx) {
  double prev = 1.0;
  for (auto& c : dr.ranking) {
    int backed = backed_count_for(c, t, ctx);
    double conf = std::min(0.5 + 0.1 * static_cast<double>(backed), 0.95);
    c.confidence = std::min(conf, prev);  // keep the ranking order intact
    prev = c.confidence;
  }
  return dr;
}

DecisionReport op_align_ranking(const DecisionReport& dr, const RcaTrace& t,
                                const IncidentContext& ctx) {
  RuleBasedExecutor exec(RuleBasedExecutor::Strength::Strong);
  DecisionReport fresh = exec.build_decision(t.ep, t.hs, t.as_, ctx);
  if (!fresh.verification_first)
    fresh.verification_tests = dr.verification_tests;
  return fresh;
}

DecisionReport op_replace_verification_tests(DecisionReport dr) {
  if (dr.ranking.empty()) return dr;
  dr.verification_tests.clear();
  size_t count = std::min<size_t>(3, dr.ranking.size());
  for (size_t i = 0; i < count; ++i) {
    const auto& c = dr.ranking[i];
    VerificationTest vt;
    vt.target = c.entity;
    vt.signal = discriminating_signal(c.fault_class);
    vt.description =
        "verify " + c.fault_class + " at " + c.entity + ": " + vt.signal;
    dr.verification_tests.push_back(std::move(vt));
  }
  return dr;
}

DecisionReport op_match_actions(DecisionReport dr) {
  std::vector<VerificationTest> kept;
  for (auto& vt : dr.verification_tests) {
    const RankedCandidate* match = nullptr;
    for (const auto& c : dr.ranking)
      if (c.entity == vt.target) {
        match = &c;
        break;
      }
    if (!match) continue;  // verifies nothing the decision claims
    vt.signal = discriminating_signal(match->fault_class);
    vt.description = "verify " + match->fault_class + " at " + match->entity +
                     ": " + vt.signal;
    kept.push_back(std::move(vt));
  }
  dr.verification_tests = std::move(kept);
  return dr;
}

}  // namespace

std::vector<PatchOperator> operators_for_check(const std::string& check_id) {
  if (check_id == "ep.window_onset")
    return {PatchOperator::shift_expand_window,
            PatchOperator::realign_timestamps};
  if (check_id == "ep.modality_coverage")
    return {PatchOperator::requery_modality};
  if (check_id == "ep.scope_neighbors")
    return {PatchOperator::expand_scope_neighbors};
  if (check_id == "hs.grounding")
    // Re-grounding by widening the candidate set is tried before pruning:
    // pruning alone can delete the only hypothesis near the true root.
    return {PatchOperator::add_alternatives, PatchOperator::remove_unsupported};
  if (check_id == "hs.anchoring")
    return {PatchOperator::add_alternatives,
            PatchOperator::add_counter_hypotheses};
  if (check_id == "hs.cross_layer") return {PatchOperator::add_cross_layer};
  if (check_id == "as.reachability")
    return {PatchOperator::rebuild_reachable_chain,
            PatchOperator::prune_hallucinated_edges};
  if (check_id == "as.temporal_order")
    return {PatchOperator::restore_temporal_order};
  if (check_id == "as.link_support")
    return {PatchOperator::attach_link_support,
            PatchOperator::rebuild_reachable_chain};
  if (check_id == "dr.calibration")
    return {PatchOperator::recalibrate_confidence};
  if (check_id == "dr.consistency")
    return {PatchOperator::align_ranking_with_analysis};
  if (check_id == "dr.verification")
    return {PatchOperator::replace_verification_tests,
            PatchOperator::match_actions_to_mechanism};
  throw std::invalid_argument("unknown check id: " + check_id);
}

std::vector<StagePatch> propose_candidates(
    const StageDiagnostics& diag, int max_candidates,
    const std::vector<StagePatch>& memory_first) {
  std::vector<StagePatch> out;
  std::set<PatchOperator> seen;
  for (const auto& m : memory_first) {
    if (static_cast<int>(out.size()) >= max_candidates) return out;
    if (m.stage != diag.stage || !seen.insert(m.op).second) continue;
    out.push_back(m);
  }

  std::vector<const AuditCheck*> failing;
  for (const auto& c : diag.checks)
    if (c.score < 1.0) failing.push_back(&c);
  std::stable_sort(failing.begin(), failing.end(),
                   [](const AuditCheck* a, const AuditCheck* b) {
                     if (a->severity != b->severity)
                       return a->severity > b->severity;
                     return catalog_index(a->check_id) <
                            catalog_index(b->check_id);
                   });
  for (const AuditCheck* c : failing) {
    for (PatchOperator op : operators_for_check(c->check_id)) {
      if (static_cast<int>(out.size()) >= max_candidates) return out;
      if (!seen.insert(op).second) continue;
      StagePatch p;
      p.stage = diag.stage;
      p.op = op;
      p.produced_by = "critic:" + c->check_id;
      p.rationale = "addresses " + c->check_id + " (" +
                    to_string(c->severity) + ", score " +
                    std::to_string(c->score) + ")";
      out.push_back(std::move(p));
    }
  }
  return out;
}

StageArtifact apply_patch(const RcaTrace& t, const StagePatch& patch,
                          const IncidentContext& ctx) {
  if (stage_of_operator(patch.op) != patch.stage)
    throw std::invalid_argument("operator " + to_string(patch.op) +
                                " does not rewrite stage " +
                                to_string(patch.stage));
  switch (patch.op) {
    case PatchOperator::shift_expand_window:
      return op_shift_expand_window(t.ep, ctx);
    case PatchOperator::requery_modality:
      return op_requery_modality(t.ep, ctx);
    case PatchOperator::expand_scope_neighbors:
      return op_expand_scope_neighbors(t.ep, ctx);
    case PatchOperator::realign_timestamps:
      return op_realign_timestamps(t.ep, ctx);
    case PatchOperator::remove_unsupported:
      return op_remove_unsupported(t.hs, t.ep, ctx);
    case PatchOperator::add_alternatives:
      return op_add_alternatives(t.hs, t.ep, ctx);
    case PatchOperator::add_counter_hypotheses:
      return op_add_counter_hypotheses(t.hs, t.ep, ctx);
    case PatchOperator::add_cross_layer:
      return op_add_cross_layer(t.hs, t.ep, ctx);
    case PatchOperator::rebuild_reachable_chain:
      return op_rebuild_reachable_chain(t.ep, t.hs, ctx);
    case PatchOperator::prune_hallucinated_edges:
      return op_prune_hallucinated_edges(t.as_, ctx);
    case PatchOperator::restore_temporal_order:
      return op_restore_temporal_order(t.as_, t.ep, ctx);
    case PatchOperator::attach_link_support:
      return op_attach_link_support(t.as_, t.ep);
    case PatchOperator::recalibrate_confidence:
      return op_recalibrate_confidence(t.dr, t, ctx);
    case PatchOperator::align_ranking_with_analysis:
      return op_align_ranking(t.dr, t, ctx);
    case PatchOperator::replace_verification_tests:
      return op_replace_verification_tests(t.dr);
    case PatchOperator::match_actions_to_mechanism:
      return op_match_actions(t.dr);
  }
  throw std::invalid_argument("unhandled patch operator");
}

}  // namespace star
