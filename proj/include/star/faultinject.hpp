#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "star/executor.hpp"
#include "star/model.hpp"
#include "star/telemetry.hpp"

// Ground-truth reasoning-fault injection: run the pipeline, corrupt exactly
// one stage's artifact with a named fault realization, regenerate every later
// stage from the corrupted artifact (so contamination spreads the way a real
// mistake would), and tag the result with the stage that actually went wrong.
// This is what makes stage-attribution claims measurable.

namespace star {

// The 13 fault types, grouped by the stage they corrupt.
inline constexpr const char* kFaultTypes[] = {
    // S1: evidence preparation
    "fabricated_evidence",       // an item no store query can reproduce
    "evidence_misreading",       // real items, wrong magnitudes read off them
    "source_confusion",          // real signal attributed to the wrong entity
    "biased_evidence_selection", // late window + single-victim tunnel vision
    // S2: hypothesis formation
    "premature_anchoring",       // first idea kept, alternatives dropped
    "over_specific_hypothesis",  // right neighborhood, too-narrow target
    "missing_hypotheses",        // the actual root never makes the list
    // S3: causal analysis
    "temporal_causal_mismatch",  // chains read backwards in time
    "unsupported_causal_leap",   // a hop no topology edge or evidence backs
    "insufficient_verification", // links asserted with the support stripped
    "belief_update_failure",     // onsets frozen at stale initial values
    // S4: decision
    "unstable_conclusion",       // final answer contradicts own analysis
    "non_convergent_reporting",  // flat, testless, rotated ranking
};

bool is_fault_type(const std::string& s);
// Stage whose artifact the fault corrupts. Throws on unknown type.
StageIndex stage_of_fault(const std::string& fault_type);

struct ReasoningFaultSpec {
  std::string fault_type;
  StageIndex target_stage = StageIndex::S1;
  json params = json::object();  // reserved for operator-specific knobs

  // Throws std::invalid_argument when fault_type is unknown or target_stage
  // disagrees with the type's home stage.
  void validate() const;
};

struct InjectedTrace {
  RcaTrace trace;
  StageIndex injected_stage = StageIndex::S1;
  std::string fault_type;
};

// Thrown when the incident offers no foothold for the requested fault (e.g.
// no quiet service to blame, or a single-hypothesis trace asked to anchor
// prematurely).
class FaultNotRealizable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs the executor stage by stage, corrupts the target stage's artifact,
// then regenerates all later stages. Stages before the target are
// bit-identical to a clean run with the same seed.
InjectedTrace inject_reasoning_fault(StageExecutor& executor,
                                     const IncidentContext& ctx,
                                     const ReasoningFaultSpec& spec,
                                     std::uint64_t seed);

}  // namespace star
