#include "star/faultinject.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "star/analysis.hpp"

namespace star {

namespace {

constexpr TimeMs kMinuteMs = 60'000;

// Anomalous entities ordered by store onset ascending (root first), ties by
// id; service faults make this a service list.
std::vector<std::string> anomalous_by_onset(const IncidentContext& ctx) {
  std::vector<std::pair<TimeMs, std::string>> v;
  for (const auto& [e, onset] : ctx.summary.entity_onsets)
    v.emplace_back(onset, e);
  std::sort(v.begin(), v.end());
  std::vector<std::string> out;
  for (auto& [_, e] : v) out.push_back(e);
  return out;
}

std::vector<std::string> quiet_services(const IncidentContext& ctx) {
  std::vector<std::string> out;
  for (const auto& svc : ctx.topo.services)
    if (!ctx.summary.entity_onsets.count(svc)) out.push_back(svc);
  std::sort(out.begin(), out.end());
  return out;
}

// First quiet callee of `svc`, by id; nullopt when every callee is loud.
std::optional<std::string> quiet_callee_of(const IncidentContext& ctx,
                                           const std::string& svc) {
  auto callees = ctx.topo.callees_of(svc);
  std::sort(callees.begin(), callees.end());
  for (const auto& c : callees)
    if (!ctx.summary.entity_onsets.count(c)) return c;
  return std::nullopt;
}

int next_item_index(const EvidencePackage& ep) {
  int best = 0;
  for (const auto& item : ep.items) {
    int n = 0;
    if (std::sscanf(item.id.c_str(), "e%d", &n) == 1) best = std::max(best, n);
  }
  return best + 1;
}

void add_to_scope(EvidencePackage& ep, const std::string& entity) {
  auto it = std::lower_bound(ep.entity_scope.begin(), ep.entity_scope.end(),
                             entity);
  if (it == ep.entity_scope.end() || *it != entity)
    ep.entity_scope.insert(it, entity);
}

EvidenceItem* strongest_metric_item(EvidencePackage& ep,
                                    const std::string& entity) {
  EvidenceItem* best = nullptr;
  double best_z = -1.0;
  for (auto& item : ep.items) {
    if (item.modality != Modality::Metric || item.target != entity) continue;
    auto ms = parse_metric_summary(item.summary);
    double z = ms ? ms->z : item.anomaly_score * 10.0;
    if (z > best_z) {
      best_z = z;
      best = &item;
    }
  }
  return best;
}

[[noreturn]] void unrealizable(const std::string& fault,
                               const std::string& why) {
  throw FaultNotRealizable(fault + ": " + why);
}

// --- S1 -------------------------------------------------------------------

void fabricate_evidence(EvidencePackage& ep, const IncidentContext& ctx) {
  if (!ctx.summary.earliest_onset)
    unrealizable("fabricated_evidence", "store shows no incident to embroider");
  std::optional<std::string> fake;
  if (ctx.summary.sink_entity)
    if (auto svc = ctx.topo.service_of(*ctx.summary.sink_entity))
      fake = quiet_callee_of(ctx, *svc);
  if (!fake) {
    auto quiet = quiet_services(ctx);
    if (quiet.empty())
      unrealizable("fabricated_evidence", "no quiet service to frame");
    fake = quiet.front();
  }
  TimeMs onset = *ctx.summary.earliest_onset;
  int idx = next_item_index(ep);
  EvidenceItem item;
  item.id = "e" + std::string(idx < 10 ? "0" : "") + std::to_string(idx);
  item.modality = Modality::Metric;
  item.target = *fake;
  item.window = {std::max(ep.incident_window.start, onset - 5 * kMinuteMs),
                 std::max(ep.incident_window.start, onset - 5 * kMinuteMs) +
                     2 * kMinuteMs};
  item.anomaly_score = 1.0;
  item.summary = format_metric_summary({"cpu", 12.6, "elevated"});
  ep.items.push_back(item);
  add_to_scope(ep, *fake);
}

void misread_evidence(EvidencePackage& ep, const IncidentContext& ctx) {
  auto ordered = anomalous_by_onset(ctx);
  if (ordered.size() < 3)
    unrealizable("evidence_misreading", "too few affected entities");
  const std::string& root = ordered.front();
  EvidenceItem* root_item = strongest_metric_item(ep, root);
  if (!root_item)
    unrealizable("evidence_misreading", "no metric reading on the source");
  int inflated = 0;
  for (size_t i = 1; i < ordered.size() && inflated < 2; ++i) {
    EvidenceItem* item = strongest_metric_item(ep, ordered[i]);
    if (!item) continue;
    auto ms = parse_metric_summary(item->summary);
    if (!ms) continue;
    ms->z *= 3.0;  // reads 7.2 sigma as 21.6 sigma
    item->summary = format_metric_summary(*ms);
    item->anomaly_score = 1.0;
    ++inflated;
  }
  if (inflated < 2)
    unrealizable("evidence_misreading", "too few victim metric readings");
  auto ms = parse_metric_summary(root_item->summary);
  if (!ms) unrealizable("evidence_misreading", "unparsable source reading");
  ms->z = 0.8;  // reads a 12-sigma excursion as noise
  root_item->summary = format_metric_summary(*ms);
  root_item->anomaly_score = 0.1;
}

void confuse_source(EvidencePackage& ep, const IncidentContext& ctx) {
  auto ordered = anomalous_by_onset(ctx);
  if (ordered.empty()) unrealizable("source_confusion", "no anomalies");
  const std::string& root = ordered.front();
  // Blame a quiet dependency of a downstream victim (latest onset first).
  std::optional<std::string> scapegoat;
  for (auto it = ordered.rbegin(); it != ordered.rend() && !scapegoat; ++it) {
    if (*it == root) continue;
    if (entity_kind(*it) != EntityKind::Service) continue;
    scapegoat = quiet_callee_of(ctx, *it);
  }
  if (!scapegoat) {
    auto quiet = quiet_services(ctx);
    if (quiet.empty()) unrealizable("source_confusion", "no quiet service");
    scapegoat = quiet.front();
  }
  int moved = 0;
  for (auto& item : ep.items) {
    if (item.modality != Modality::Metric || item.target != root) continue;
    item.target = *scapegoat;
    ++moved;
  }
  if (moved == 0)
    unrealizable("source_confusion", "no metric readings on the source");
  add_to_scope(ep, *scapegoat);
}

void bias_selection(EvidencePackage& ep, const IncidentContext& ctx) {
  if (!ctx.summary.sink_entity || !ctx.summary.earliest_onset)
    unrealizable("biased_evidence_selection", "no sink to fixate on");
  TimeWindow late{*ctx.summary.earliest_onset + 4 * kMinuteMs,
                  ep.incident_window.end};
  if (!late.valid())
    unrealizable("biased_evidence_selection",
                 "window too short to miss the onset");
  ep.incident_window = late;
  ep.entity_scope = {*ctx.summary.sink_entity};
  ep.items = collect_scope_evidence(ctx, ep.entity_scope, late);
  assign_item_ids(ep.items);
}

// --- S2 -------------------------------------------------------------------

void anchor_prematurely(HypothesisSet& hs) {
  if (hs.hypotheses.size() < 2)
    unrealizable("premature_anchoring", "nothing to discard");
  hs.hypotheses.resize(1);
}

void over_specify(HypothesisSet& hs, const IncidentContext& ctx) {
  if (hs.hypotheses.empty())
    unrealizable("over_specific_hypothesis", "no hypothesis to narrow");
  Hypothesis& top = hs.hypotheses.front();
  if (entity_kind(top.candidate_entity) == EntityKind::Service) {
    auto pods = ctx.topo.pods_of(top.candidate_entity);
    if (!pods.empty()) {
      std::sort(pods.begin(), pods.end());
      top.candidate_entity = pods.front();
      return;
    }
  }
  if (auto cc = counter_class(top.fault_class)) {
    top.fault_class = *cc;
    return;
  }
  unrealizable("over_specific_hypothesis", "no narrower target available");
}

void drop_root_hypothesis(HypothesisSet& hs, const IncidentContext& ctx) {
  if (hs.hypotheses.size() < 2)
    unrealizable("missing_hypotheses", "removal would empty the set");
  if (!ctx.summary.earliest_entity)
    unrealizable("missing_hypotheses", "no ground onset to hide");
  auto it = std::find_if(hs.hypotheses.begin(), hs.hypotheses.end(),
                         [&](const Hypothesis& h) {
                           return h.candidate_entity ==
                                  *ctx.summary.earliest_entity;
                         });
  if (it == hs.hypotheses.end())
    unrealizable("missing_hypotheses",
                 "the clean run already missed the source");
  hs.hypotheses.erase(it);
}

// --- S3 -------------------------------------------------------------------

void reverse_chains(AnalysisStructure& as) {
  int reversed = 0;
  for (auto& p : as.paths) {
    if (p.steps.size() < 2) continue;
    std::reverse(p.steps.begin(), p.steps.end());
    p.direction = "forward_call";
    std::map<int, std::vector<std::string>> remapped;
    int links = static_cast<int>(p.steps.size()) - 1;
    for (auto& [i, ids] : p.link_support)
      remapped[links - 1 - i] = std::move(ids);
    p.link_support = std::move(remapped);
    ++reversed;
  }
  if (reversed == 0)
    unrealizable("temporal_causal_mismatch", "no multi-step chain to flip");
}

void leap_unsupported(AnalysisStructure& as, const IncidentContext& ctx) {
  if (!ctx.summary.sink_entity || !ctx.summary.sink_onset)
    unrealizable("unsupported_causal_leap", "no sink to leap toward");
  const std::string& sink = *ctx.summary.sink_entity;
  std::optional<std::string> leaper;
  for (const auto& q : quiet_services(ctx)) {
    if (q == sink) continue;
    if (ctx.topo.step_adjacent(q, sink, "reverse_call")) continue;
    leaper = q;
    break;
  }
  if (!leaper)
    unrealizable("unsupported_causal_leap",
                 "every quiet service is adjacent to the sink");
  PropagationPath p;
  p.id = "p01";
  p.direction = "reverse_call";
  p.steps = {{*leaper, std::max(ctx.store.horizon.start,
                                *ctx.summary.sink_onset - 6 * kMinuteMs)},
             {sink, *ctx.summary.sink_onset}};
  p.rationale = "direct dependency collapse onto the alerted service";
  as.paths = {p};
  as.insufficient_evidence = false;
}

void strip_link_support(AnalysisStructure& as) {
  int stripped = 0;
  for (auto& p : as.paths) {
    if (p.link_support.empty()) continue;
    p.link_support.clear();
    ++stripped;
  }
  if (stripped == 0)
    unrealizable("insufficient_verification", "no supported link to strip");
}

void freeze_onsets(AnalysisStructure& as, const IncidentContext& ctx) {
  int frozen = 0;
  for (auto& p : as.paths)
    for (auto& step : p.steps) {
      step.onset = ctx.store.horizon.start;
      ++frozen;
    }
  if (frozen == 0)
    unrealizable("belief_update_failure", "no step onsets to freeze");
}

// --- S4 -------------------------------------------------------------------

void destabilize_conclusion(DecisionReport& dr) {
  if (dr.ranking.size() < 2)
    unrealizable("unstable_conclusion", "nothing to swap against");
  std::swap(dr.ranking.front(), dr.ranking.back());
  dr.ranking.front().confidence = 0.97;
  double prev = 0.97;
  for (size_t i = 1; i < dr.ranking.size(); ++i) {
    double target = i + 1 == dr.ranking.size()
                        ? 0.2
                        : dr.ranking[i].confidence;
    dr.ranking[i].confidence = std::min(target, prev - 0.01);
    prev = dr.ranking[i].confidence;
  }
}

void scramble_report(DecisionReport& dr) {
  if (dr.ranking.size() < 2)
    unrealizable("non_convergent_reporting", "nothing to rotate");
  std::rotate(dr.ranking.begin(), dr.ranking.begin() + 1, dr.ranking.end());
  for (auto& c : dr.ranking) c.confidence = 0.40;
  dr.verification_tests.clear();
}

StageArtifact corrupt(const std::string& fault, StageArtifact artifact,
                      const IncidentContext& ctx) {
  if (fault == "fabricated_evidence")
    fabricate_evidence(std::get<EvidencePackage>(artifact), ctx);
  else if (fault == "evidence_misreading")
    misread_evidence(std::get<EvidencePackage>(artifact), ctx);
  else if (fault == "source_confusion")
    confuse_source(std::get<EvidencePackage>(artifact), ctx);
  else if (fault == "biased_evidence_selection")
    bias_selection(std::get<EvidencePackage>(artifact), ctx);
  else if (fault == "premature_anchoring")
    anchor_prematurely(std::get<HypothesisSet>(artifact));
  else if (fault == "over_specific_hypothesis")
    over_specify(std::get<HypothesisSet>(artifact), ctx);
  else if (fault == "missing_hypotheses")
    drop_root_hypothesis(std::get<HypothesisSet>(artifact), ctx);
  else if (fault == "temporal_causal_mismatch")
    reverse_chains(std::get<AnalysisStructure>(artifact));
  else if (fault == "unsupported_causal_leap")
    leap_unsupported(std::get<AnalysisStructure>(artifact), ctx);
  else if (fault == "insufficient_verification")
    strip_link_support(std::get<AnalysisStructure>(artifact));
  else if (fault == "belief_update_failure")
    freeze_onsets(std::get<AnalysisStructure>(artifact), ctx);
  else if (fault == "unstable_conclusion")
    destabilize_conclusion(std::get<DecisionReport>(artifact));
  else if (fault == "non_convergent_reporting")
    scramble_report(std::get<DecisionReport>(artifact));
  else
    throw std::invalid_argument("unknown fault type: " + fault);
  return artifact;
}

}  // namespace

bool is_fault_type(const std::string& s) {
  for (const char* f : kFaultTypes)
    if (s == f) return true;
  return false;
}

StageIndex stage_of_fault(const std::string& fault_type) {
  if (fault_type == "fabricated_evidence" ||
      fault_type == "evidence_misreading" ||
      fault_type == "source_confusion" ||
      fault_type == "biased_evidence_selection")
    return StageIndex::S1;
  if (fault_type == "premature_anchoring" ||
      fault_type == "over_specific_hypothesis" ||
      fault_type == "missing_hypotheses")
    return StageIndex::S2;
  if (fault_type == "temporal_causal_mismatch" ||
      fault_type == "unsupported_causal_leap" ||
      fault_type == "insufficient_verification" ||
      fault_type == "belief_update_failure")
    return StageIndex::S3;
  if (fault_type == "unstable_conclusion" ||
      fault_type == "non_convergent_reporting")
    return StageIndex::S4;
  throw std::invalid_argument("unknown fault type: " + fault_type);
}

void ReasoningFaultSpec::validate() const {
  if (stage_of_fault(fault_type) != target_stage)
    throw std::invalid_argument("fault " + fault_type +
                                " does not corrupt stage " +
                                to_string(target_stage));
}

InjectedTrace inject_reasoning_fault(StageExecutor& executor,
                                     const IncidentContext& ctx,
                                     const ReasoningFaultSpec& spec,
                                     std::uint64_t seed) {
  spec.validate();
  InjectedTrace out;
  out.injected_stage = spec.target_stage;
  out.fault_type = spec.fault_type;
  RcaTrace& t = out.trace;
  t.incident_id = ctx.incident_id;
  t.executor_id = executor.executor_id();
  t.seed = seed;
  for (StageIndex s : kAllStages) {
    StageArtifact artifact = executor.run_stage(s, t, ctx, seed);
    if (s == spec.target_stage)
      artifact = corrupt(spec.fault_type, std::move(artifact), ctx);
    set_stage_artifact(t, s, artifact);
  }
  return out;
}

}  // namespace star
