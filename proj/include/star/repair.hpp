#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "star/executor.hpp"
#include "star/patch.hpp"
#include "star/router.hpp"

// The repair loop: audit, route, and either ship the trace (pass), try one
// targeted patch (fast), or localize the decisive stage by counterfactual
// patch-and-replay probes (slow). Probes replay a candidate patch with all
// earlier stages frozen and every later stage regenerated; the earliest
// stage where some candidate lifts the audit score by at least delta is the
// decisive stage. A repair memory carries successful patch templates across
// incidents with a similar shape.

namespace star {

// Engine variants used by the ablation studies. `full` is the shipped
// behavior. `no_fast_slow` removes the fast lane: every below-tau trace runs
// full localization. `no_cce` removes counterfactual candidate evaluation:
// the slow lane patches the severity-hinted stage with the top candidate and
// commits without probing alternatives or requiring a score gain.
enum class RepairVariant { full, no_fast_slow, no_cce };

std::string to_string(RepairVariant v);
std::optional<RepairVariant> repair_variant_from_string(const std::string& s);

struct RepairConfig {
  RouterConfig router;             // tau / epsilon
  double delta = 0.05;             // minimum score gain for a stage to qualify
  int max_candidates = 3;          // candidate patches probed per stage
  int max_rounds = 3;              // audit-route-repair iterations
  int fallback_top_k = 3;          // suspects listed by the fallback report
  RepairVariant variant = RepairVariant::full;
  std::map<std::string, double> weights;  // empty -> uniform

  std::map<std::string, double> effective_weights() const;
};

// One counterfactual probe: a candidate patch, replayed, and what it did to
// the audit score.
struct CandidateOutcome {
  StagePatch patch;
  int candidate_index = 0;  // position in its stage's candidate list
  double replayed_S = 0.0;
  double delta_S = 0.0;
  int stages_rerun = 0;     // regeneration cost of the replay
  // True when the replay died with InsufficientEvidenceError. Such a probe is
  // never committable; replayed_S and delta_S are pinned to -1.
  bool infeasible = false;
};

struct RoundLog {
  int round = 0;
  Route route = Route::Pass;
  double S_before = 0.0;
  std::vector<CandidateOutcome> probes;      // every candidate evaluated
  std::optional<CandidateOutcome> committed; // the probe that was kept
  bool escalated = false;        // fast patch discarded, slow ran same round
  int rollbacks = 0;             // evidence-recollection restarts
};

enum class RepairOutcome {
  passed,                       // routed pass, trace shipped unchanged
  fast_repaired,                // reached tau via fast-lane patches only
  slow_repaired,                // needed at least one localization round
  verification_first_fallback,  // could not reach tau; conservative report
};

std::string to_string(RepairOutcome o);

struct RepairResult {
  RcaTrace final_trace;
  RepairOutcome outcome = RepairOutcome::passed;
  // Stage of the first committed patch; empty when nothing was committed.
  std::optional<StageIndex> decisive_stage;
  int rounds_used = 0;
  int rollback_count = 0;
  double initial_S = 0.0;
  double final_S = 0.0;
  std::vector<RoundLog> rounds;
};

// Applies the patch to its stage, keeps earlier stages bit-identical, and
// regenerates every later stage with the executor. In strict (probe) mode an
// analysis that comes back empty with the insufficient-evidence marker —
// whether patched in or regenerated — throws InsufficientEvidenceError: the
// probe has reasoned itself out of evidence rather than repaired anything.
RcaTrace replay_with_patch(const RcaTrace& t, const StagePatch& patch,
                           StageExecutor& exec, const IncidentContext& ctx,
                           bool strict = true);

// ---------------------------------------------------------------------------
// Repair memory: successful patches, keyed by a coarse incident shape

struct IncidentSignature {
  std::string dominant_modality;  // metric | log | trace
  std::string class_guess;        // store-level fault class guess or unknown
  std::string spread;             // anomalous entity count band
  std::string fanout;             // out-degree band of the earliest suspect

  std::string key() const;
};

IncidentSignature incident_signature(const IncidentContext& ctx);

class RepairMemory {
 public:
  struct Entry {
    std::string key;
    StageIndex stage = StageIndex::S1;
    PatchOperator op = PatchOperator::shift_expand_window;
    double best_delta_S = 0.0;
    int uses = 0;
  };

  // Patch templates whose incidents matched `key` at `stage`, best gain
  // first; produced_by is stamped "memory:<rank>".
  std::vector<StagePatch> lookup(const std::string& key, StageIndex stage) const;
  // Records a committed repair whose gain cleared delta.
  void record(const std::string& key, const StagePatch& patch, double delta_S);

  const std::vector<Entry>& entries() const { return entries_; }
  json to_json() const;
  static RepairMemory from_json(const json& j);
  void save(const std::filesystem::path& path) const;
  static RepairMemory load(const std::filesystem::path& path);

 private:
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------

RepairResult repair_trace(const RcaTrace& t, const IncidentContext& ctx,
                          StageExecutor& exec, const RepairConfig& cfg,
                          RepairMemory* memory = nullptr);

json to_json(const CandidateOutcome& o);
json to_json(const RoundLog& r);
// Full result record: outcome, scores, per-round replay log and final trace.
json to_json(const RepairResult& r);

}  // namespace star
