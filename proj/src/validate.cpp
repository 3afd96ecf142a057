#include "star/validate.hpp"

#include <algorithm>
#include <set>

namespace star {

namespace {

struct Collector {
  std::vector<Violation> out;
  void add(StageIndex s, std::string path, std::string rule,
           std::string detail) {
    out.push_back({s, std::move(path), std::move(rule), std::move(detail)});
  }
};

}  // namespace

ValidationResult validate_trace(const RcaTrace& t, const SystemTopology& topo) {
  Collector c;

  // --- S1
  if (!t.ep.incident_window.valid())
    c.add(StageIndex::S1, "ep.incident_window", "window-order",
          "window start must precede end");
  {
    std::set<std::string> ids;
    for (size_t i = 0; i < t.ep.items.size(); ++i) {
      const auto& item = t.ep.items[i];
      const std::string base = "ep.items[" + std::to_string(i) + "]";
      if (!ids.insert(item.id).second)
        c.add(StageIndex::S1, base + ".id", "item-id-unique",
              "duplicate evidence id " + item.id);
      if (!item.window.valid())
        c.add(StageIndex::S1, base + ".window", "window-order",
              "item window start must precede end");
      if (item.anomaly_score < 0.0 || item.anomaly_score > 1.0)
        c.add(StageIndex::S1, base + ".anomaly_score", "score-range",
              "anomaly score outside [0,1]");
      // Targets must sit inside the declared scope (edges: both endpoints'
      // services count as covered if either is in scope).
      bool in_scope = false;
      if (auto edge = parse_edge_target(item.target)) {
        in_scope = t.ep.in_scope(edge->first) || t.ep.in_scope(edge->second);
      } else {
        in_scope = t.ep.in_scope(item.target);
      }
      if (!in_scope)
        c.add(StageIndex::S1, base + ".target", "scope-membership",
              "target " + item.target + " outside entity scope");
    }
  }

  // --- S2
  if (t.hs.hypotheses.empty() && !t.as_.insufficient_evidence)
    c.add(StageIndex::S2, "hs.hypotheses", "hypotheses-nonempty",
          "no hypotheses and no insufficient-evidence marker");
  {
    std::set<std::string> ids;
    for (size_t i = 0; i < t.hs.hypotheses.size(); ++i) {
      const auto& h = t.hs.hypotheses[i];
      const std::string base = "hs.hypotheses[" + std::to_string(i) + "]";
      if (!ids.insert(h.id).second)
        c.add(StageIndex::S2, base + ".id", "hypothesis-id-unique",
              "duplicate hypothesis id " + h.id);
      if (!topo.has_entity(h.candidate_entity))
        c.add(StageIndex::S2, base + ".candidate_entity", "entity-exists",
              "unknown entity " + h.candidate_entity);
      if (h.supporting_evidence.empty())
        c.add(StageIndex::S2, base + ".supporting_evidence", "evidence-binding",
              "hypothesis cites no evidence");
      for (size_t k = 0; k < h.supporting_evidence.size(); ++k) {
        if (!t.ep.find_item(h.supporting_evidence[k]))
          c.add(StageIndex::S2,
                base + ".supporting_evidence[" + std::to_string(k) + "]",
                "evidence-binding",
                "unknown evidence id " + h.supporting_evidence[k]);
      }
    }
  }

  // --- S3
  if (t.as_.insufficient_evidence && !t.as_.paths.empty())
    c.add(StageIndex::S3, "as.paths", "insufficient-evidence-empty",
          "insufficient-evidence marker set but paths present");
  {
    std::set<std::string> ids;
    for (size_t i = 0; i < t.as_.paths.size(); ++i) {
      const auto& p = t.as_.paths[i];
      const std::string base = "as.paths[" + std::to_string(i) + "]";
      if (!ids.insert(p.id).second)
        c.add(StageIndex::S3, base + ".id", "path-id-unique",
              "duplicate path id " + p.id);
      std::set<std::string> seen;
      for (size_t s = 0; s < p.steps.size(); ++s) {
        if (!topo.has_entity(p.steps[s].entity))
          c.add(StageIndex::S3, base + ".steps[" + std::to_string(s) + "]",
                "entity-exists", "unknown entity " + p.steps[s].entity);
        if (!seen.insert(p.steps[s].entity).second)
          c.add(StageIndex::S3, base + ".steps[" + std::to_string(s) + "]",
                "simple-path", "entity repeated on path: " + p.steps[s].entity);
      }
      for (size_t s = 0; s + 1 < p.steps.size(); ++s) {
        if (!topo.step_adjacent(p.steps[s].entity, p.steps[s + 1].entity,
                                p.direction))
          c.add(StageIndex::S3, base + ".steps[" + std::to_string(s + 1) + "]",
                "reachability",
                p.steps[s].entity + " -> " + p.steps[s + 1].entity +
                    " is not a topology or deployment link");
      }
      for (const auto& [idx, support] : p.link_support) {
        if (idx < 0 || idx + 1 >= static_cast<int>(p.steps.size())) {
          c.add(StageIndex::S3,
                base + ".link_support[" + std::to_string(idx) + "]",
                "link-support-binding", "link index out of range");
          continue;
        }
        for (size_t k = 0; k < support.size(); ++k)
          if (!t.ep.find_item(support[k]))
            c.add(StageIndex::S3,
                  base + ".link_support[" + std::to_string(idx) + "][" +
                      std::to_string(k) + "]",
                  "link-support-binding", "unknown evidence id " + support[k]);
      }
    }
  }

  // --- S4
  for (size_t i = 0; i < t.dr.ranking.size(); ++i) {
    const auto& cand = t.dr.ranking[i];
    const std::string base = "dr.ranking[" + std::to_string(i) + "]";
    if (cand.confidence < 0.0 || cand.confidence > 1.0)
      c.add(StageIndex::S4, base + ".confidence", "confidence-range",
            "confidence outside [0,1]");
    if (i > 0 && t.dr.ranking[i - 1].confidence < cand.confidence)
      c.add(StageIndex::S4, base + ".confidence", "ranking-sorted",
            "ranking not sorted by confidence descending");
    if (!topo.has_entity(cand.entity))
      c.add(StageIndex::S4, base + ".entity", "entity-exists",
            "unknown entity " + cand.entity);
    for (size_t k = 0; k < cand.derived_from.size(); ++k) {
      const auto& pid = cand.derived_from[k];
      bool found = std::any_of(t.as_.paths.begin(), t.as_.paths.end(),
                               [&](const auto& p) { return p.id == pid; });
      if (!found)
        c.add(StageIndex::S4,
              base + ".derived_from[" + std::to_string(k) + "]",
              "derived-from-binding", "unknown path id " + pid);
    }
  }
  if (t.dr.verification_first && t.dr.verification_tests.empty())
    c.add(StageIndex::S4, "dr.verification_tests", "verification-first-tests",
          "verification_first requires at least one test");

  std::sort(c.out.begin(), c.out.end(), [](const Violation& a,
                                           const Violation& b) {
    if (a.stage != b.stage) return stage_number(a.stage) < stage_number(b.stage);
    if (a.rule_id != b.rule_id) return a.rule_id < b.rule_id;
    return a.field_path < b.field_path;
  });
  return {std::move(c.out)};
}

}  // namespace star
