#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

// Core domain model: the four-stage diagnostic trace and the entities it
// talks about. Everything here is value-semantic; mutation happens by
// producing new values (replace_stage), never in place.

namespace star {

using json = nlohmann::json;
using TimeMs = std::int64_t;

// ---------------------------------------------------------------------------
// Stages

enum class StageIndex : int { S1 = 1, S2 = 2, S3 = 3, S4 = 4 };

inline constexpr StageIndex kAllStages[] = {StageIndex::S1, StageIndex::S2,
                                            StageIndex::S3, StageIndex::S4};

std::string to_string(StageIndex s);
std::optional<StageIndex> stage_from_string(const std::string& s);
inline int stage_number(StageIndex s) { return static_cast<int>(s); }
// Stages strictly after s, in execution order.
std::vector<StageIndex> stages_after(StageIndex s);

// ---------------------------------------------------------------------------
// Entities

// Entity ids are flat strings with a kind prefix: "svc:checkout",
// "pod:checkout-1", "node:n3". Call edges are written "svc:a->svc:b"
// (caller->callee) where one shows up as an evidence target.

enum class EntityKind { Service, Pod, Node, Edge, Unknown };

EntityKind entity_kind(const std::string& id);
bool is_edge_target(const std::string& target);
// Splits "svc:a->svc:b" into (caller, callee); nullopt if not an edge string.
std::optional<std::pair<std::string, std::string>> parse_edge_target(
    const std::string& target);
std::string make_edge_target(const std::string& caller,
                             const std::string& callee);

struct SystemTopology {
  std::vector<std::string> services;           // sorted ids
  std::vector<std::string> pods;               // sorted ids
  std::vector<std::string> nodes;              // sorted ids
  std::vector<std::pair<std::string, std::string>> call_edges;  // caller->callee
  std::map<std::string, std::string> placement;  // pod -> node
  std::map<std::string, std::string> ownership;  // pod -> service

  bool has_entity(const std::string& id) const;
  bool has_call_edge(const std::string& caller, const std::string& callee) const;
  std::vector<std::string> callers_of(const std::string& svc) const;
  std::vector<std::string> callees_of(const std::string& svc) const;
  std::vector<std::string> pods_of(const std::string& svc) const;
  std::vector<std::string> pods_on(const std::string& node) const;
  // Service that owns a pod; identity for services; owning services of a
  // node's pods are not resolved here (use pods_on + service_of).
  std::optional<std::string> service_of(const std::string& id) const;
  std::optional<std::string> node_of(const std::string& pod) const;
  // True if consecutive trace steps a->b are structurally adjacent in the
  // given propagation direction ("reverse_call": symptoms flow callee->caller)
  // or linked by deployment (pod<->service, pod<->node).
  bool step_adjacent(const std::string& a, const std::string& b,
                     const std::string& direction) const;
};

// ---------------------------------------------------------------------------
// Time

struct TimeWindow {
  TimeMs start = 0;
  TimeMs end = 0;  // half-open [start, end)

  bool contains(TimeMs t) const { return t >= start && t < end; }
  bool valid() const { return start < end; }
  bool operator==(const TimeWindow&) const = default;
};

// ---------------------------------------------------------------------------
// Stage 1: evidence

enum class Modality { Metric, Log, Trace };

std::string to_string(Modality m);
std::optional<Modality> modality_from_string(const std::string& s);

struct EvidenceItem {
  std::string id;          // unique within the package, "e01", "e02", ...
  Modality modality = Modality::Metric;
  std::string target;      // entity id or edge target
  TimeWindow window;
  double anomaly_score = 0.0;  // [0, 1]
  std::string summary;     // compact stat line, machine-parseable prefix

  bool operator==(const EvidenceItem&) const = default;
};

struct EvidencePackage {
  TimeWindow incident_window;
  std::vector<std::string> entity_scope;  // sorted entity ids
  std::vector<EvidenceItem> items;

  const EvidenceItem* find_item(const std::string& id) const;
  bool in_scope(const std::string& entity) const;
  bool operator==(const EvidencePackage&) const = default;
};

// ---------------------------------------------------------------------------
// Stage 2: hypotheses

struct Hypothesis {
  std::string id;               // "h1", "h2", ...
  std::string candidate_entity; // entity id present in the topology
  std::string fault_class;      // one of the five service fault classes
  std::vector<std::string> supporting_evidence;  // EvidenceItem ids
  std::string rationale;

  bool operator==(const Hypothesis&) const = default;
};

struct HypothesisSet {
  std::vector<Hypothesis> hypotheses;

  const Hypothesis* find(const std::string& id) const;
  bool operator==(const HypothesisSet&) const = default;
};

// ---------------------------------------------------------------------------
// Stage 3: analysis

struct PathStep {
  std::string entity;
  std::optional<TimeMs> onset;  // detected onset, when available

  bool operator==(const PathStep&) const = default;
};

struct PropagationPath {
  std::string id;          // "p1", "p2", ...
  std::string direction;   // "reverse_call" (backpressure) or "forward_call"
  std::vector<PathStep> steps;  // root candidate first, sink last
  // Per-link supporting evidence: key = link index (0 = steps[0]->steps[1]).
  std::map<int, std::vector<std::string>> link_support;
  std::string rationale;

  bool operator==(const PropagationPath&) const = default;
};

struct AnalysisStructure {
  std::vector<PropagationPath> paths;
  bool insufficient_evidence = false;  // set when no defensible chain exists

  bool operator==(const AnalysisStructure&) const = default;
};

// ---------------------------------------------------------------------------
// Stage 4: decision

struct RankedCandidate {
  std::string entity;
  std::string fault_class;
  double confidence = 0.0;            // [0, 1]
  std::vector<std::string> derived_from;  // PropagationPath ids

  bool operator==(const RankedCandidate&) const = default;
};

struct VerificationTest {
  std::string target;       // entity the test discriminates
  std::string description;  // human action
  std::string signal;       // metric / telemetry condition that confirms

  bool operator==(const VerificationTest&) const = default;
};

struct DecisionReport {
  std::vector<RankedCandidate> ranking;  // confidence descending
  std::vector<VerificationTest> verification_tests;
  bool verification_first = false;  // true when evidence can't settle the call

  bool operator==(const DecisionReport&) const = default;
};

// ---------------------------------------------------------------------------
// Patches (applied artifacts carry their lineage)

enum class PatchOperator {
  // S1
  shift_expand_window,
  requery_modality,
  expand_scope_neighbors,
  realign_timestamps,
  // S2
  remove_unsupported,
  add_alternatives,
  add_counter_hypotheses,
  add_cross_layer,
  // S3
  rebuild_reachable_chain,
  prune_hallucinated_edges,
  restore_temporal_order,
  attach_link_support,
  // S4
  recalibrate_confidence,
  align_ranking_with_analysis,
  replace_verification_tests,
  match_actions_to_mechanism,
};

std::string to_string(PatchOperator op);
std::optional<PatchOperator> patch_operator_from_string(const std::string& s);
StageIndex stage_of_operator(PatchOperator op);
std::vector<PatchOperator> operators_for_stage(StageIndex s);

struct StagePatch {
  StageIndex stage = StageIndex::S1;
  PatchOperator op = PatchOperator::shift_expand_window;
  json params = json::object();   // operator-specific
  std::string produced_by;  // "critic:<check_id>", "memory:<n>",
                            // "rollback:<reason>", "manual"
  std::string rationale;

  bool operator==(const StagePatch&) const = default;
};

// ---------------------------------------------------------------------------
// The trace

using StageArtifact = std::variant<EvidencePackage, HypothesisSet,
                                   AnalysisStructure, DecisionReport>;

StageIndex stage_of_artifact(const StageArtifact& a);

struct RcaTrace {
  std::string incident_id;
  std::string executor_id;
  std::uint64_t seed = 0;
  EvidencePackage ep;
  HypothesisSet hs;
  AnalysisStructure as_;
  DecisionReport dr;
  std::vector<StagePatch> lineage;  // patches applied, in order

  bool operator==(const RcaTrace&) const = default;
};

// Returns a copy of `t` with stage `s` replaced by `artifact` and the patch
// reference appended to the lineage. Throws std::invalid_argument when the
// artifact's type does not match the stage.
RcaTrace replace_stage(const RcaTrace& t, StageIndex s,
                       const StageArtifact& artifact,
                       const std::optional<StagePatch>& provenance = {});

const StageArtifact stage_artifact(const RcaTrace& t, StageIndex s);
void set_stage_artifact(RcaTrace& t, StageIndex s, const StageArtifact& a);

// ---------------------------------------------------------------------------
// Fault classes (service-level faults the simulator injects)

inline constexpr const char* kFaultClasses[] = {
    "cpu_hog", "memory_leak", "network_delay", "packet_loss",
    "disk_exhaustion"};

bool is_fault_class(const std::string& s);

}  // namespace star
