#pragma once

#include <string>
#include <vector>

#include "star/model.hpp"

// Structural validation of a trace against a topology: id uniqueness and
// referential integrity within and across stages, window sanity, path
// adjacency, ranking order. Diagnostic, not a gate — corrupted traces are
// expected to fail here and that is exactly what the audit layer consumes.

namespace star {

struct Violation {
  StageIndex stage = StageIndex::S1;
  std::string field_path;  // e.g. "hs.hypotheses[2].supporting_evidence[0]"
  std::string rule_id;     // e.g. "evidence-binding"
  std::string detail;

  bool operator==(const Violation&) const = default;
};

struct ValidationResult {
  std::vector<Violation> violations;  // canonically ordered
  bool ok() const { return violations.empty(); }
};

// Rule ids emitted: window-order, scope-membership, item-id-unique,
// score-range, hypothesis-id-unique, evidence-binding, entity-exists,
// path-id-unique, reachability, link-support-binding, confidence-range,
// ranking-sorted, derived-from-binding, verification-first-tests.
ValidationResult validate_trace(const RcaTrace& t, const SystemTopology& topo);

}  // namespace star
