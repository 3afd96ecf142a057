#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "star/audit.hpp"
#include "star/model.hpp"
#include "star/telemetry.hpp"

// Patch critics and operators. A critic reads one stage's audit diagnostics
// and proposes candidate patches for the checks that failed there — a stage
// whose checks all pass proposes nothing, which is what confines repair
// probing to stages that are actually implicated. Operators are small,
// deterministic, schema-preserving artifact rewrites.

namespace star {

// Thrown by operators that cannot produce a defensible artifact from the
// current upstream evidence (e.g. rebuilding propagation chains when no
// topology-and-onset-consistent chain exists). The repair loop reads it as
// "the evidence itself is the problem" and falls back to re-collection.
class InsufficientEvidenceError : public std::runtime_error {
 public:
  InsufficientEvidenceError(StageIndex stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  StageIndex stage() const { return stage_; }

 private:
  StageIndex stage_;
};

// Operators a failing check suggests, most targeted first.
std::vector<PatchOperator> operators_for_check(const std::string& check_id);

// Critic pass for one stage. Candidates are ordered: memory_first entries
// (templates recalled from previous repairs) ahead of critic proposals;
// critic proposals by the addressed check's severity (worst first), then
// catalog order, then the operator order above. Duplicate operators fold
// into their first occurrence. At most max_candidates are returned.
std::vector<StagePatch> propose_candidates(
    const StageDiagnostics& diag, int max_candidates,
    const std::vector<StagePatch>& memory_first = {});

// Applies one patch to its stage's artifact and returns the rewritten
// artifact. Deterministic in (trace, patch, ctx); never touches other
// stages. Throws InsufficientEvidenceError as described above.
StageArtifact apply_patch(const RcaTrace& t, const StagePatch& patch,
                          const IncidentContext& ctx);

}  // namespace star
