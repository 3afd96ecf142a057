#include "star/executor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace star {

namespace {

constexpr TimeMs kMinuteMs = 60'000;

// All placeable path entities in canonical order.
std::vector<std::string> all_entities(const SystemTopology& topo) {
  std::vector<std::string> out;
  out.reserve(topo.services.size() + topo.pods.size() + topo.nodes.size());
  out.insert(out.end(), topo.services.begin(), topo.services.end());
  out.insert(out.end(), topo.pods.begin(), topo.pods.end());
  out.insert(out.end(), topo.nodes.begin(), topo.nodes.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Per-entity claimed onsets for every non-edge target the package flags.
std::map<std::string, TimeMs> claimed_onsets(const EvidencePackage& ep) {
  std::map<std::string, TimeMs> onsets;
  for (const auto& item : ep.items) {
    if (item.anomaly_score < 0.3 || is_edge_target(item.target)) continue;
    auto it = onsets.find(item.target);
    if (it == onsets.end() || item.window.start < it->second)
      onsets[item.target] = item.window.start;
  }
  return onsets;
}

// The most downstream victim according to the evidence: latest claimed onset,
// ties broken toward the smaller id.
std::optional<std::string> sink_from_evidence(const EvidencePackage& ep) {
  auto onsets = claimed_onsets(ep);
  std::optional<std::string> sink;
  TimeMs best = 0;
  for (const auto& [entity, onset] : onsets) {
    if (!sink || onset > best) {
      sink = entity;
      best = onset;
    }
  }
  return sink;
}

struct PathSearch {
  const EvidencePackage& ep;
  const SystemTopology& topo;
  const std::map<std::string, TimeMs>& onsets;
  const std::vector<std::string>& entities;
  std::string sink;
  int per_candidate_cap = 4;
  int total_cap = 24;
  std::vector<PropagationPath> out;

  void run(const std::string& root) {
    if (static_cast<int>(out.size()) >= total_cap) return;
    std::vector<std::string> steps = {root};
    std::set<std::string> visited = {root};
    int found = 0;
    dfs(root, steps, visited, found);
  }

  void dfs(const std::string& current, std::vector<std::string>& steps,
           std::set<std::string>& visited, int& found) {
    if (found >= per_candidate_cap ||
        static_cast<int>(out.size()) >= total_cap)
      return;
    if (current == sink) {
      record(steps);
      ++found;
      return;
    }
    if (steps.size() >= 6) return;
    auto cur_onset = onsets.find(current);
    for (const auto& next : entities) {
      if (visited.count(next)) continue;
      if (!topo.step_adjacent(current, next, "reverse_call")) continue;
      auto next_onset = onsets.find(next);
      if (cur_onset != onsets.end() && next_onset != onsets.end() &&
          next_onset->second < cur_onset->second)
        continue;  // symptoms cannot precede their cause
      if (link_support_ids(ep, current, next).empty()) continue;
      steps.push_back(next);
      visited.insert(next);
      dfs(next, steps, visited, found);
      visited.erase(next);
      steps.pop_back();
    }
  }

  void record(const std::vector<std::string>& steps) {
    PropagationPath p;
    p.direction = "reverse_call";
    for (const auto& e : steps) {
      PathStep step;
      step.entity = e;
      auto it = onsets.find(e);
      if (it != onsets.end()) step.onset = it->second;
      p.steps.push_back(std::move(step));
    }
    for (size_t i = 0; i + 1 < steps.size(); ++i)
      p.link_support[static_cast<int>(i)] =
          link_support_ids(ep, steps[i], steps[i + 1]);
    p.rationale = "onset-ordered symptom chain from " + steps.front() +
                  " to " + steps.back();
    out.push_back(std::move(p));
  }
};

std::string join_metrics(const std::set<std::string>& metrics) {
  std::string out;
  for (const auto& m : metrics) {
    if (!out.empty()) out += "+";
    out += m;
  }
  return out;
}

}  // namespace

TimeWindow alert_window(const IncidentContext& ctx) {
  if (!ctx.summary.earliest_onset) return ctx.store.horizon;
  TimeMs alert = *ctx.summary.earliest_onset;
  TimeWindow w{alert - 10 * kMinuteMs, alert + 5 * kMinuteMs};
  w.start = std::max(w.start, ctx.store.horizon.start);
  w.end = std::min(w.end, ctx.store.horizon.end);
  return w;
}

std::string RuleBasedExecutor::executor_id() const {
  return strength_ == Strength::Strong ? "rule_strong" : "rule_weak";
}

EvidencePackage RuleBasedExecutor::build_evidence(
    const IncidentContext& ctx) const {
  EvidencePackage ep;
  ep.incident_window = alert_window(ctx);

  std::set<std::string> scope;
  if (strength_ == Strength::Weak) {
    if (ctx.summary.sink_entity) scope.insert(*ctx.summary.sink_entity);
  } else {
    for (const auto& [entity, _] : ctx.summary.entity_onsets) {
      scope.insert(entity);
      // Pull the service layer into view for pods, then widen every scoped
      // service by one call hop in both directions.
      if (auto svc = ctx.topo.service_of(entity)) scope.insert(*svc);
    }
    std::set<std::string> services;
    for (const auto& e : scope)
      if (entity_kind(e) == EntityKind::Service) services.insert(e);
    for (const auto& svc : services) {
      for (const auto& c : ctx.topo.callers_of(svc)) scope.insert(c);
      for (const auto& c : ctx.topo.callees_of(svc)) scope.insert(c);
    }
  }
  if (scope.empty() && !ctx.topo.services.empty())
    scope.insert(ctx.topo.services.front());

  ep.entity_scope.assign(scope.begin(), scope.end());
  ep.items = collect_scope_evidence(ctx, ep.entity_scope, ep.incident_window);
  assign_item_ids(ep.items);
  return ep;
}

HypothesisSet RuleBasedExecutor::build_hypotheses(
    const EvidencePackage& ep, const IncidentContext& ctx) const {
  struct Scored {
    Hypothesis h;
    double strength = 0.0;
  };
  std::vector<Scored> scored;
  for (const auto& entity : ep.entity_scope) {
    if (!ctx.topo.has_entity(entity)) continue;
    // A candidate needs evidence on the entity itself; edge items alone also
    // implicate the healthy peer of a degraded call and would fabricate a
    // hypothesis for it.
    bool direct = false;
    for (const auto& item : ep.items)
      if (item.anomaly_score >= 0.3 && item.target == entity) {
        direct = true;
        break;
      }
    if (!direct) continue;
    EntitySignature sig = signature_from_items(ep, entity);
    auto cls = classify_signature(sig);
    if (!cls) continue;

    Scored s;
    s.h.candidate_entity = entity;
    s.h.fault_class = *cls;
    for (const auto& item : ep.items) {
      if (item.anomaly_score < 0.3) continue;
      bool mine = item.target == entity;
      if (auto edge = parse_edge_target(item.target))
        mine = edge->first == entity || edge->second == entity;
      if (!mine) continue;
      s.h.supporting_evidence.push_back(item.id);
      s.strength += item.anomaly_score;
    }
    if (s.h.supporting_evidence.empty()) continue;
    s.h.rationale = "signature " + join_metrics(sig.anomalous_metrics) +
                    (sig.error_logs || sig.error_spans ? "+errors" : "") +
                    " matches " + *cls;
    scored.push_back(std::move(s));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) {
                     if (a.strength != b.strength) return a.strength > b.strength;
                     return a.h.candidate_entity < b.h.candidate_entity;
                   });
  const size_t cap = strength_ == Strength::Weak ? 1 : 16;
  if (scored.size() > cap) scored.resize(cap);

  HypothesisSet hs;
  int n = 1;
  for (auto& s : scored) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "h%02d", n++);
    s.h.id = buf;
    hs.hypotheses.push_back(std::move(s.h));
  }
  return hs;
}

AnalysisStructure RuleBasedExecutor::build_analysis(
    const EvidencePackage& ep, const HypothesisSet& hs,
    const IncidentContext& ctx) const {
  AnalysisStructure as;
  auto sink = sink_from_evidence(ep);
  if (!sink || hs.hypotheses.empty()) {
    as.insufficient_evidence = true;
    return as;
  }

  auto onsets = claimed_onsets(ep);
  auto entities = all_entities(ctx.topo);
  PathSearch search{ep, ctx.topo, onsets, entities, *sink};
  std::set<std::string> seen_roots;
  for (const auto& h : hs.hypotheses) {
    if (!seen_roots.insert(h.candidate_entity).second) continue;
    search.run(h.candidate_entity);
  }
  as.paths = std::move(search.out);
  int n = 1;
  for (auto& p : as.paths) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%02d", n++);
    p.id = buf;
  }
  if (as.paths.empty()) as.insufficient_evidence = true;
  return as;
}

DecisionReport RuleBasedExecutor::build_decision(
    const EvidencePackage& ep, const HypothesisSet& hs,
    const AnalysisStructure& as, const IncidentContext& ctx) const {
  DecisionReport dr;

  auto class_for = [&](const std::string& entity) -> std::string {
    if (auto cls = classify_signature(signature_from_items(ep, entity)))
      return *cls;
    for (const auto& h : hs.hypotheses)
      if (h.candidate_entity == entity) return h.fault_class;
    return "network_delay";
  };
  auto add_tests = [&](size_t count) {
    for (size_t i = 0; i < std::min(count, dr.ranking.size()); ++i) {
      const auto& c = dr.ranking[i];
      VerificationTest t;
      t.target = c.entity;
      t.signal = discriminating_signal(c.fault_class);
      t.description = "verify " + c.fault_class + " at " + c.entity + ": " +
                      t.signal;
      dr.verification_tests.push_back(std::move(t));
    }
  };

  if (as.insufficient_evidence || as.paths.empty()) {
    // Evidence can't settle the call: publish the hypotheses as a tentative,
    // deliberately low-confidence list and lead with discriminating tests.
    dr.verification_first = true;
    double conf = 0.6;
    std::set<std::string> seen;
    for (const auto& h : hs.hypotheses) {
      if (dr.ranking.size() >= 5) break;
      if (!seen.insert(h.candidate_entity).second) continue;
      dr.ranking.push_back({h.candidate_entity, h.fault_class, conf, {}});
      conf = std::max(0.05, conf - 0.1);
    }
    if (dr.ranking.empty()) {
      auto onsets = claimed_onsets(ep);
      std::vector<std::pair<TimeMs, std::string>> order;
      for (const auto& [entity, onset] : onsets) order.push_back({onset, entity});
      std::sort(order.begin(), order.end());
      for (const auto& [onset, entity] : order) {
        if (dr.ranking.size() >= 3) break;
        dr.ranking.push_back({entity, class_for(entity), conf, {}});
        conf = std::max(0.05, conf - 0.1);
      }
    }
    if (dr.ranking.empty() && !ctx.topo.services.empty())
      dr.ranking.push_back(
          {ctx.topo.services.front(), "network_delay", 0.3, {}});
    add_tests(3);
    return dr;
  }

  // Candidate per root entity; best-scored path decides its weight.
  struct Cand {
    std::string entity;
    double best = 0.0;
    std::vector<std::pair<double, std::string>> paths;  // (-score, id)
  };
  std::map<std::string, Cand> by_root;
  for (const auto& p : as.paths) {
    if (p.steps.empty()) continue;
    const std::string& root = p.steps.front().entity;
    double score = path_score(p, ep, ctx);
    auto& c = by_root[root];
    c.entity = root;
    c.best = std::max(c.best, score);
    c.paths.push_back({-score, p.id});
  }
  std::vector<Cand> cands;
  for (auto& [_, c] : by_root) cands.push_back(std::move(c));
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.best != b.best) return a.best > b.best;
    return a.entity < b.entity;
  });
  if (cands.size() > 5) cands.resize(5);
  double max_best = cands.empty() ? 0.0 : cands.front().best;

  for (auto& c : cands) {
    RankedCandidate rc;
    rc.entity = c.entity;
    rc.fault_class = class_for(c.entity);
    rc.confidence = max_best > 0.0 ? c.best / max_best : 1.0;
    std::sort(c.paths.begin(), c.paths.end());
    for (const auto& [_, pid] : c.paths) rc.derived_from.push_back(pid);
    dr.ranking.push_back(std::move(rc));
  }
  add_tests(3);
  return dr;
}

StageArtifact RuleBasedExecutor::run_stage(StageIndex s,
                                           const RcaTrace& upstream,
                                           const IncidentContext& ctx,
                                           std::uint64_t /*seed*/) {
  switch (s) {
    case StageIndex::S1:
      return build_evidence(ctx);
    case StageIndex::S2:
      return build_hypotheses(upstream.ep, ctx);
    case StageIndex::S3:
      return build_analysis(upstream.ep, upstream.hs, ctx);
    case StageIndex::S4:
      return build_decision(upstream.ep, upstream.hs, upstream.as_, ctx);
  }
  throw std::invalid_argument("unknown stage");
}

RcaTrace run_pipeline(StageExecutor& exec, const IncidentContext& ctx,
                      std::uint64_t seed) {
  RcaTrace t;
  t.incident_id = ctx.incident_id;
  t.executor_id = exec.executor_id();
  t.seed = seed;
  for (StageIndex s : kAllStages)
    set_stage_artifact(t, s, exec.run_stage(s, t, ctx, seed));
  return t;
}

}  // namespace star
