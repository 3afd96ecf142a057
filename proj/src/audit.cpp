#include "star/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <stdexcept>

namespace star {

namespace {

constexpr TimeMs kMinuteMs = 60'000;
// Claimed onsets may differ from recomputed store onsets by windowing and
// sampling quantization, not more.
constexpr TimeMs kOnsetToleranceMs = 90'000;
// Score threshold above which an item counts as an actual claim.
constexpr double kClaimScore = 0.3;
// Threshold above which an item implicates its target as a suspect.
constexpr double kImplicationScore = 0.5;

AuditCheck make_check(std::string id, StageIndex stage, double score,
                      std::string message, std::vector<std::string> blame = {},
                      bool structural = false) {
  AuditCheck c;
  c.check_id = std::move(id);
  c.stage = stage;
  if (structural) {
    c.score = 0.0;
    c.severity = Severity::HardViolation;
  } else {
    c.score = std::clamp(score, 0.0, 1.0);
    c.severity = severity_from_score(c.score);
  }
  c.blame = std::move(blame);
  c.message = std::move(message);
  return c;
}

// Distinct non-edge targets carrying at least one item at or above `thr`.
std::set<std::string> implicated_entities(const EvidencePackage& ep,
                                          double thr) {
  std::set<std::string> out;
  for (const auto& item : ep.items)
    if (item.anomaly_score >= thr && !is_edge_target(item.target))
      out.insert(item.target);
  return out;
}

// ---------------------------------------------------------------------------
// S1

AuditCheck check_window_onset(const RcaTrace& t, const IncidentContext& ctx) {
  const auto& w = t.ep.incident_window;
  if (!w.valid())
    return make_check("ep.window_onset", StageIndex::S1, 0.0,
                      "incident window start does not precede its end", {},
                      /*structural=*/true);
  if (!ctx.summary.earliest_onset)
    return make_check("ep.window_onset", StageIndex::S1, 1.0,
                      "no detectable anomaly onset in the store");
  TimeMs onset = *ctx.summary.earliest_onset;
  if (!w.contains(onset))
    return make_check("ep.window_onset", StageIndex::S1, 0.0,
                      "incident window excludes the earliest anomaly onset",
                      {*ctx.summary.earliest_entity}, /*structural=*/true);
  if (onset - w.start >= 2 * kMinuteMs)
    return make_check("ep.window_onset", StageIndex::S1, 1.0,
                      "window covers the onset with pre-incident context");
  return make_check("ep.window_onset", StageIndex::S1, 0.5,
                    "window covers the onset but with under 2 minutes of "
                    "pre-incident context");
}

AuditCheck check_modality_coverage(const RcaTrace& t,
                                   const IncidentContext& ctx) {
  if (t.ep.items.empty())
    return make_check("ep.modality_coverage", StageIndex::S1, 0.0,
                      "evidence package contains no items", {},
                      /*structural=*/true);

  double coverage = 1.0;
  std::string coverage_note = "no class expectation applicable";
  auto guess = incident_class_guess(ctx);
  if (ctx.summary.earliest_entity && guess) {
    const std::string& focus = *ctx.summary.earliest_entity;
    std::set<Modality> present;
    for (const auto& item : t.ep.items)
      if (item.anomaly_score >= kClaimScore && item_touches(item, focus))
        present.insert(item.modality);
    auto expected = expected_modalities(*guess);
    int hit = 0;
    for (Modality m : expected) hit += present.count(m) ? 1 : 0;
    coverage = static_cast<double>(hit) / static_cast<double>(expected.size());
    coverage_note = std::to_string(hit) + "/" +
                    std::to_string(expected.size()) + " expected modalities " +
                    "for " + *guess + " present on " + focus;
  }

  std::vector<std::string> unbacked;
  for (const auto& item : t.ep.items)
    if (item.anomaly_score >= kClaimScore && !item_backed(ctx, item))
      unbacked.push_back(item.id);
  double penalty = 1.0;
  if (unbacked.size() == 1) penalty = 0.4;
  else if (unbacked.size() == 2) penalty = 0.15;
  else if (unbacked.size() >= 3) penalty = 0.0;

  std::string msg = coverage_note;
  if (!unbacked.empty())
    msg += "; " + std::to_string(unbacked.size()) +
           " claimed item(s) not reproducible from the store";
  return make_check("ep.modality_coverage", StageIndex::S1,
                    coverage * penalty, msg, std::move(unbacked));
}

AuditCheck check_scope_neighbors(const RcaTrace& t,
                                 const IncidentContext& ctx) {
  if (t.ep.entity_scope.empty())
    return make_check("ep.scope_neighbors", StageIndex::S1, 0.0,
                      "entity scope is empty", {}, /*structural=*/true);
  const auto& onsets = ctx.summary.entity_onsets;
  if (onsets.empty())
    return make_check("ep.scope_neighbors", StageIndex::S1, 1.0,
                      "no anomalous entities to cover");

  std::set<std::string> scope(t.ep.entity_scope.begin(),
                              t.ep.entity_scope.end());
  std::vector<std::string> missing;
  int covered = 0;
  std::set<std::string> anomalous_services;
  for (const auto& [entity, _] : onsets) {
    if (scope.count(entity)) ++covered;
    else missing.push_back(entity);
    if (auto svc = ctx.topo.service_of(entity))
      anomalous_services.insert(*svc);
  }
  double cov_anomalous =
      static_cast<double>(covered) / static_cast<double>(onsets.size());

  std::set<std::string> neighbors;
  for (const auto& svc : anomalous_services) {
    for (const auto& c : ctx.topo.callers_of(svc)) neighbors.insert(c);
    for (const auto& c : ctx.topo.callees_of(svc)) neighbors.insert(c);
  }
  double cov_neighbors = 1.0;
  if (!neighbors.empty()) {
    int hit = 0;
    for (const auto& n : neighbors)
      if (scope.count(n)) ++hit;
      else missing.push_back(n);
    cov_neighbors =
        static_cast<double>(hit) / static_cast<double>(neighbors.size());
  }

  double score = 0.6 * cov_anomalous + 0.4 * cov_neighbors;
  std::string msg = "scope covers " + std::to_string(covered) + "/" +
                    std::to_string(onsets.size()) +
                    " anomalous entities and their call neighborhood";
  return make_check("ep.scope_neighbors", StageIndex::S1, score, msg,
                    std::move(missing));
}

// ---------------------------------------------------------------------------
// S2

AuditCheck check_grounding(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.hs.hypotheses.empty()) {
    if (!implicated_entities(t.ep, kImplicationScore).empty())
      return make_check("hs.grounding", StageIndex::S2, 0.0,
                        "no hypotheses despite strongly implicated entities",
                        {}, /*structural=*/true);
    return make_check("hs.grounding", StageIndex::S2, 1.0,
                      "no hypotheses and no implicated entities");
  }
  std::vector<std::string> ungrounded;
  for (const auto& h : t.hs.hypotheses)
    if (!hypothesis_grounded(h, t.ep, ctx)) ungrounded.push_back(h.id);
  double frac = 1.0 - static_cast<double>(ungrounded.size()) /
                          static_cast<double>(t.hs.hypotheses.size());
  // The lead hypothesis is the one the diagnosis leans on; it being
  // ungrounded caps the score regardless of how sound the tail is.
  if (!ungrounded.empty() && ungrounded.front() == t.hs.hypotheses.front().id)
    frac = std::min(frac, 0.3);
  std::string msg = std::to_string(ungrounded.size()) +
                    " hypothesis(es) lack verifiable grounding";
  return make_check("hs.grounding", StageIndex::S2, frac, msg,
                    std::move(ungrounded));
}

AuditCheck check_anchoring(const RcaTrace& t, const IncidentContext& ctx) {
  (void)ctx;
  auto implicated = implicated_entities(t.ep, kImplicationScore);
  if (implicated.size() <= 1)
    return make_check("hs.anchoring", StageIndex::S2, 1.0,
                      "at most one implicated entity; nothing to branch on");
  std::set<std::string> candidates;
  for (const auto& h : t.hs.hypotheses) candidates.insert(h.candidate_entity);
  if (candidates.size() <= 1)
    return make_check(
        "hs.anchoring", StageIndex::S2, 0.0,
        "hypotheses collapsed to a single explanation while " +
            std::to_string(implicated.size()) + " entities are implicated",
        {implicated.begin(), implicated.end()});

  // The entities that turned anomalous first are the natural upstream
  // suspects; a hypothesis set that skips any of them anchored on
  // downstream symptoms. Several entities can share the first detection
  // bucket, so the whole bucket needs coverage.
  std::optional<TimeMs> earliest_onset;
  for (const auto& e : implicated) {
    auto onset = claimed_onset(t.ep, e);
    if (onset && (!earliest_onset || *onset < *earliest_onset))
      earliest_onset = onset;
  }
  std::vector<std::string> uncovered;
  if (earliest_onset)
    for (const auto& e : implicated) {
      auto onset = claimed_onset(t.ep, e);
      if (onset && *onset == *earliest_onset && !candidates.count(e))
        uncovered.push_back(e);
    }
  if (!uncovered.empty()) {
    std::string msg = "earliest-onset suspect(s) without a hypothesis: " +
                      uncovered.front() +
                      (uncovered.size() > 1
                           ? " and " + std::to_string(uncovered.size() - 1) +
                                 " more"
                           : "");
    return make_check("hs.anchoring", StageIndex::S2, 0.2, msg,
                      std::move(uncovered));
  }
  return make_check("hs.anchoring", StageIndex::S2, 1.0,
                    "alternatives cover the implicated entities");
}

AuditCheck check_cross_layer(const RcaTrace& t, const IncidentContext& ctx) {
  (void)ctx;
  auto implicated = implicated_entities(t.ep, kImplicationScore);
  std::set<EntityKind> layers;
  for (const auto& e : implicated) layers.insert(entity_kind(e));
  if (layers.size() <= 1)
    return make_check("hs.cross_layer", StageIndex::S2, 1.0,
                      "implicated entities sit on a single layer");
  std::set<EntityKind> covered;
  for (const auto& h : t.hs.hypotheses) {
    EntityKind k = entity_kind(h.candidate_entity);
    if (layers.count(k)) covered.insert(k);
  }
  double score = static_cast<double>(covered.size()) /
                 static_cast<double>(layers.size());
  return make_check("hs.cross_layer", StageIndex::S2, score,
                    std::to_string(covered.size()) + "/" +
                        std::to_string(layers.size()) +
                        " implicated layers have a candidate");
}

// ---------------------------------------------------------------------------
// S3

AuditCheck check_reachability(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.as_.paths.empty()) {
    if (t.as_.insufficient_evidence)
      return make_check("as.reachability", StageIndex::S3, 1.0,
                        "analysis honestly reports insufficient evidence");
    return make_check("as.reachability", StageIndex::S3, 0.0,
                      "no propagation paths and no insufficient-evidence "
                      "marker", {}, /*structural=*/true);
  }
  std::vector<std::string> bad;
  for (const auto& p : t.as_.paths) {
    bool ok = !p.steps.empty();
    std::set<std::string> seen;
    for (size_t i = 0; ok && i < p.steps.size(); ++i) {
      const auto& e = p.steps[i].entity;
      if (!ctx.topo.has_entity(e) || !seen.insert(e).second) ok = false;
      if (ok && i + 1 < p.steps.size() &&
          !ctx.topo.step_adjacent(e, p.steps[i + 1].entity, p.direction))
        ok = false;
    }
    if (!ok) bad.push_back(p.id);
  }
  double score = 1.0 - static_cast<double>(bad.size()) /
                           static_cast<double>(t.as_.paths.size());
  std::string msg =
      std::to_string(bad.size()) + " path(s) contain non-topology hops";
  return make_check("as.reachability", StageIndex::S3, score, msg,
                    std::move(bad));
}

AuditCheck check_temporal_order(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.as_.paths.empty())
    return make_check("as.temporal_order", StageIndex::S3, 1.0,
                      t.as_.insufficient_evidence
                          ? "analysis honestly reports insufficient evidence"
                          : "no paths to order");
  std::vector<std::string> bad;
  for (const auto& p : t.as_.paths) {
    bool ok = true;
    std::optional<TimeMs> prev;
    for (const auto& step : p.steps) {
      if (!step.onset) continue;
      if (prev && *step.onset < *prev) ok = false;  // effect precedes cause
      prev = step.onset;
      // Claimed onsets must agree with the store where the store has an
      // opinion: stale beliefs and shifted windows both show up here.
      auto it = ctx.summary.entity_onsets.find(step.entity);
      if (it != ctx.summary.entity_onsets.end() &&
          std::llabs(*step.onset - it->second) > kOnsetToleranceMs)
        ok = false;
    }
    if (!ok) bad.push_back(p.id);
  }
  double score = 1.0 - static_cast<double>(bad.size()) /
                           static_cast<double>(t.as_.paths.size());
  std::string msg = std::to_string(bad.size()) +
                    " path(s) violate cause-before-effect ordering";
  return make_check("as.temporal_order", StageIndex::S3, score, msg,
                    std::move(bad));
}

AuditCheck check_link_support(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.as_.paths.empty()) {
    if (t.as_.insufficient_evidence)
      return make_check("as.link_support", StageIndex::S3, 1.0,
                        "analysis honestly reports insufficient evidence");
    return make_check("as.link_support", StageIndex::S3, 0.0,
                      "no propagation paths and no insufficient-evidence "
                      "marker", {}, /*structural=*/true);
  }
  double total = 0.0;
  std::vector<std::string> bad;
  for (const auto& p : t.as_.paths) {
    double frac = 0.0;
    if (p.steps.size() <= 1) {
      // One-step chain: the lone entity must be directly implicated by a
      // backed item.
      for (const auto& item : t.ep.items) {
        if (item.anomaly_score >= kClaimScore && !p.steps.empty() &&
            item_touches(item, p.steps.front().entity) &&
            item_backed(ctx, item)) {
          frac = 1.0;
          break;
        }
      }
    } else {
      int links = static_cast<int>(p.steps.size()) - 1;
      int satisfied = 0;
      for (int i = 0; i < links; ++i) {
        auto it = p.link_support.find(i);
        if (it == p.link_support.end() || it->second.empty()) continue;
        bool any_backed = false;
        bool all_resolve = true;
        for (const auto& id : it->second) {
          const EvidenceItem* item = t.ep.find_item(id);
          if (!item) {
            all_resolve = false;
            break;
          }
          if (item_backed(ctx, *item)) any_backed = true;
        }
        if (all_resolve && any_backed) ++satisfied;
      }
      frac = static_cast<double>(satisfied) / static_cast<double>(links);
    }
    if (frac < 1.0) bad.push_back(p.id);
    total += frac;
  }
  double score = total / static_cast<double>(t.as_.paths.size());
  std::string msg =
      std::to_string(bad.size()) + " path(s) have links without backed support";
  return make_check("as.link_support", StageIndex::S3, score, msg,
                    std::move(bad));
}

// ---------------------------------------------------------------------------
// S4

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

AuditCheck check_calibration(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.dr.ranking.empty()) {
    if (t.dr.verification_first && !t.dr.verification_tests.empty())
      return make_check("dr.calibration", StageIndex::S4, 1.0,
                        "conservative verification-first output");
    return make_check("dr.calibration", StageIndex::S4, 0.0,
                      "no ranked candidates", {}, /*structural=*/true);
  }
  const auto& top = t.dr.ranking.front();
  double score = 1.0;
  std::string msg = "confidence is in line with evidence sufficiency";
  int backed = backed_count_for(top, t, ctx);
  if (top.confidence >= 0.9 && backed < 2) {
    score = 0.0;
    msg = "top candidate claims confidence " + std::to_string(top.confidence) +
          " with under 2 distinct backed supporting items";
  }
  if (t.dr.ranking.size() >= 2 &&
      t.dr.ranking[0].confidence - t.dr.ranking[1].confidence < 0.05) {
    score = std::min(score, 0.5);
    if (score == 0.5) msg = "flat ranking does not discriminate candidates";
  }
  return make_check("dr.calibration", StageIndex::S4, score, msg,
                    {top.entity});
}

AuditCheck check_consistency(const RcaTrace& t, const IncidentContext& ctx) {
  if (t.dr.verification_first)
    return make_check("dr.consistency", StageIndex::S4, 1.0,
                      "verification-first output makes no ranking claim");
  if (t.dr.ranking.empty())
    return make_check("dr.consistency", StageIndex::S4, 0.0,
                      "no ranked candidates", {}, /*structural=*/true);
  if (t.as_.paths.empty())
    return make_check("dr.consistency", StageIndex::S4, 0.0,
                      "ranking asserted without any propagation analysis");

  // Recompute the expected ranking from the analysis: best path score per
  // root entity, descending, ties toward the smaller entity id.
  struct Expected {
    std::string entity;
    double best = 0.0;
  };
  std::map<std::string, double> best_by_root;
  for (const auto& p : t.as_.paths) {
    if (p.steps.empty()) continue;
    double s = path_score(p, t.ep, ctx);
    auto [it, inserted] = best_by_root.try_emplace(p.steps.front().entity, s);
    if (!inserted) it->second = std::max(it->second, s);
  }
  std::vector<Expected> expected;
  for (const auto& [e, b] : best_by_root) expected.push_back({e, b});
  std::sort(expected.begin(), expected.end(),
            [](const Expected& a, const Expected& b) {
              if (a.best != b.best) return a.best > b.best;
              return a.entity < b.entity;
            });
  if (expected.size() > t.dr.ranking.size())
    expected.resize(t.dr.ranking.size());
  double max_best = expected.empty() ? 0.0 : expected.front().best;

  std::vector<std::string> blame;
  size_t n = t.dr.ranking.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& got = t.dr.ranking[i];
    bool ok = i < expected.size() && got.entity == expected[i].entity;
    if (ok) {
      double want_conf =
          max_best > 0.0 ? expected[i].best / max_best : 1.0;
      ok = std::abs(got.confidence - want_conf) <= 1e-6;
    }
    if (!ok) blame.push_back("rank " + std::to_string(i + 1));
  }
  double score = 1.0 - static_cast<double>(blame.size()) /
                           static_cast<double>(n);
  // A wrong headline answer is a failed check no matter how tidy the tail is.
  if (!blame.empty() && blame.front() == "rank 1") score = 0.0;
  std::string msg = std::to_string(blame.size()) +
                    " rank position(s) disagree with the analysis scores";
  return make_check("dr.consistency", StageIndex::S4, score, msg,
                    std::move(blame));
}

AuditCheck check_verification(const RcaTrace& t, const IncidentContext& ctx) {
  (void)ctx;
  if (t.dr.verification_tests.empty()) {
    if (t.dr.verification_first)
      return make_check("dr.verification", StageIndex::S4, 0.0,
                        "verification-first output carries no tests", {},
                        /*structural=*/true);
    return make_check("dr.verification", StageIndex::S4, 0.0,
                      "decision carries no verification tests");
  }
  double covers_top = 1.0;
  if (!t.dr.ranking.empty()) {
    covers_top = 0.0;
    for (const auto& vt : t.dr.verification_tests)
      if (vt.target == t.dr.ranking.front().entity) covers_top = 1.0;
  }
  int consistent = 0;
  for (const auto& vt : t.dr.verification_tests) {
    bool ok = false;
    for (const auto& c : t.dr.ranking)
      if (c.entity == vt.target &&
          vt.signal == discriminating_signal(c.fault_class))
        ok = true;
    if (ok) ++consistent;
  }
  double mech = t.dr.verification_tests.empty()
                    ? 0.0
                    : static_cast<double>(consistent) /
                          static_cast<double>(t.dr.verification_tests.size());
  double score = 0.5 * covers_top + 0.5 * mech;
  return make_check("dr.verification", StageIndex::S4, score,
                    covers_top > 0.0
                        ? "tests discriminate the leading candidates"
                        : "tests do not cover the top-ranked candidate");
}

}  // namespace

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Minor: return "minor";
    case Severity::Major: return "major";
    case Severity::HardViolation: return "hard_violation";
  }
  return "info";
}

bool hypothesis_grounded(const Hypothesis& h, const EvidencePackage& ep,
                         const IncidentContext& ctx) {
  if (h.supporting_evidence.empty()) return false;
  bool any_backed = false;
  bool touches_candidate = false;
  for (const auto& id : h.supporting_evidence) {
    const EvidenceItem* item = ep.find_item(id);
    if (!item) return false;  // dangling reference
    if (item_backed(ctx, *item)) any_backed = true;
    if (item_touches(*item, h.candidate_entity)) touches_candidate = true;
  }
  if (!any_backed || !touches_candidate) return false;
  if (!is_fault_class(h.fault_class)) return false;
  auto cls = classify_signature(signature_from_items(ep, h.candidate_entity));
  return !cls || *cls == h.fault_class;
}

Severity severity_from_score(double score) {
  if (score >= 1.0) return Severity::Info;
  if (score >= 0.5) return Severity::Minor;
  return Severity::Major;
}

StageIndex stage_of_check(const std::string& check_id) {
  if (check_id.rfind("ep.", 0) == 0) return StageIndex::S1;
  if (check_id.rfind("hs.", 0) == 0) return StageIndex::S2;
  if (check_id.rfind("as.", 0) == 0) return StageIndex::S3;
  if (check_id.rfind("dr.", 0) == 0) return StageIndex::S4;
  throw std::invalid_argument("unknown check id: " + check_id);
}

std::map<std::string, double> uniform_weights() {
  std::map<std::string, double> w;
  for (const char* id : kCheckIds) w[id] = 1.0 / 12.0;
  return w;
}

void validate_weights(const std::map<std::string, double>& weights) {
  if (weights.size() != 12)
    throw std::invalid_argument("weights must cover exactly the 12 checks");
  double sum = 0.0;
  for (const char* id : kCheckIds) {
    auto it = weights.find(id);
    if (it == weights.end())
      throw std::invalid_argument(std::string("missing weight for check ") +
                                  id);
    if (it->second < 0.0)
      throw std::invalid_argument(std::string("negative weight for check ") +
                                  id);
    sum += it->second;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("check weights must sum to 1");
}

StageDiagnostics audit_stage(const RcaTrace& t, StageIndex s,
                             const IncidentContext& ctx,
                             const std::map<std::string, double>& weights) {
  StageDiagnostics d;
  d.stage = s;
  switch (s) {
    case StageIndex::S1:
      d.checks = {check_window_onset(t, ctx), check_modality_coverage(t, ctx),
                  check_scope_neighbors(t, ctx)};
      break;
    case StageIndex::S2:
      d.checks = {check_grounding(t, ctx), check_anchoring(t, ctx),
                  check_cross_layer(t, ctx)};
      break;
    case StageIndex::S3:
      d.checks = {check_reachability(t, ctx), check_temporal_order(t, ctx),
                  check_link_support(t, ctx)};
      break;
    case StageIndex::S4:
      d.checks = {check_calibration(t, ctx), check_consistency(t, ctx),
                  check_verification(t, ctx)};
      break;
  }
  d.stage_severity = Severity::Info;
  double num = 0.0, den = 0.0;
  for (const auto& c : d.checks) {
    d.stage_severity = std::max(d.stage_severity, c.severity);
    double w = weights.at(c.check_id);
    num += w * c.score;
    den += w;
  }
  d.stage_score = den > 0.0 ? num / den : 1.0;
  return d;
}

AuditReport audit_trace(const RcaTrace& t, const IncidentContext& ctx,
                        const std::map<std::string, double>& weights) {
  validate_weights(weights);
  AuditReport r;
  r.weights = weights;
  double S = 0.0;
  for (int i = 0; i < 4; ++i) {
    r.diagnostics[i] = audit_stage(t, kAllStages[i], ctx, weights);
    for (const auto& c : r.diagnostics[i].checks)
      S += weights.at(c.check_id) * c.score;
  }
  r.S = S;
  return r;
}

AuditReport audit_trace(const RcaTrace& t, const IncidentContext& ctx) {
  return audit_trace(t, ctx, uniform_weights());
}

json to_json(const AuditReport& r) {
  json stages = json::array();
  for (const auto& d : r.diagnostics) {
    json checks = json::array();
    for (const auto& c : d.checks) {
      checks.push_back(json{{"check_id", c.check_id},
                            {"stage", to_string(c.stage)},
                            {"score", c.score},
                            {"severity", to_string(c.severity)},
                            {"blame", c.blame},
                            {"message", c.message}});
    }
    stages.push_back(json{{"stage", to_string(d.stage)},
                          {"stage_score", d.stage_score},
                          {"stage_severity", to_string(d.stage_severity)},
                          {"checks", checks}});
  }
  return json{{"S", r.S}, {"diagnostics", stages}, {"weights", r.weights}};
}

}  // namespace star
