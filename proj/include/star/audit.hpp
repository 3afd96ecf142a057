#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "star/analysis.hpp"
#include "star/model.hpp"
#include "star/telemetry.hpp"

// The audit engine: twelve deterministic checks (three per stage) scoring a
// trace's self-consistency against the telemetry and the topology, folded
// into the global reliability score S = Σ w_k s_k.
//
// The checks for stage s read only the artifacts of stages <= s (plus the
// store and topology). That discipline is what makes stage attribution
// meaningful: corrupting stage s can degrade checks at s and later, but an
// audit of the stages before s is identical to the clean trace's.

namespace star {

enum class Severity { Info = 0, Minor = 1, Major = 2, HardViolation = 3 };

std::string to_string(Severity s);

struct AuditCheck {
  std::string check_id;
  StageIndex stage = StageIndex::S1;
  double score = 1.0;  // [0,1]
  Severity severity = Severity::Info;
  std::vector<std::string> blame;  // artifact ids / entity ids involved
  std::string message;
};

struct StageDiagnostics {
  StageIndex stage = StageIndex::S1;
  std::vector<AuditCheck> checks;
  Severity stage_severity = Severity::Info;  // max over checks
  double stage_score = 1.0;                  // weight-renormalized mean
};

struct AuditReport {
  double S = 0.0;
  std::array<StageDiagnostics, 4> diagnostics;  // S1..S4
  std::map<std::string, double> weights;        // check_id -> w_k
};

// The fixed check catalog, in canonical (stage, catalog) order.
inline constexpr const char* kCheckIds[12] = {
    "ep.window_onset",  "ep.modality_coverage", "ep.scope_neighbors",
    "hs.grounding",     "hs.anchoring",         "hs.cross_layer",
    "as.reachability",  "as.temporal_order",    "as.link_support",
    "dr.calibration",   "dr.consistency",       "dr.verification",
};

StageIndex stage_of_check(const std::string& check_id);

// Uniform default: every check weighs 1/12.
std::map<std::string, double> uniform_weights();

// Throws std::invalid_argument unless the map covers exactly the catalog,
// every weight is >= 0, and the sum is 1 within 1e-9.
void validate_weights(const std::map<std::string, double>& weights);

// Severity from a check score: 1 -> info, [0.5, 1) -> minor, below -> major.
// Structural violations are hard_violation with the score forced to 0.
Severity severity_from_score(double score);

// The grounding predicate the hs.grounding check applies per hypothesis:
// every referenced item resolves, at least one is store-backed and one
// touches the candidate, the class is a real fault class, and the evidence
// signature for the candidate (when classifiable) agrees with that class.
// The unsupported-hypothesis repair removes exactly what this rejects.
bool hypothesis_grounded(const Hypothesis& h, const EvidencePackage& ep,
                         const IncidentContext& ctx);

StageDiagnostics audit_stage(const RcaTrace& t, StageIndex s,
                             const IncidentContext& ctx,
                             const std::map<std::string, double>& weights);

AuditReport audit_trace(const RcaTrace& t, const IncidentContext& ctx,
                        const std::map<std::string, double>& weights);
AuditReport audit_trace(const RcaTrace& t, const IncidentContext& ctx);

json to_json(const AuditReport& r);

}  // namespace star
