#pragma once

#include <filesystem>
#include <string>

#include "star/model.hpp"
#include "star/telemetry.hpp"

// JSON codecs for every artifact and bundle file. Encoding is canonical:
// object keys sort lexicographically (nlohmann's default map container),
// arrays keep artifact order, doubles round-trip via shortest form. Equal
// values always produce identical bytes, which the determinism and
// bit-identity checks rely on.

namespace star {

json to_json(const TimeWindow& w);
json to_json(const EvidenceItem& e);
json to_json(const EvidencePackage& ep);
json to_json(const Hypothesis& h);
json to_json(const HypothesisSet& hs);
json to_json(const PropagationPath& p);
json to_json(const AnalysisStructure& as_);
json to_json(const RankedCandidate& c);
json to_json(const VerificationTest& t);
json to_json(const DecisionReport& dr);
json to_json(const StagePatch& p);
json to_json(const RcaTrace& t);
json to_json(const StageArtifact& a);
json to_json(const SystemTopology& t);
json to_json(const FaultSpec& f);
json to_json(const GroundTruth& g);

TimeWindow window_from_json(const json& j);
EvidenceItem evidence_item_from_json(const json& j);
EvidencePackage evidence_package_from_json(const json& j);
Hypothesis hypothesis_from_json(const json& j);
HypothesisSet hypothesis_set_from_json(const json& j);
PropagationPath path_from_json(const json& j);
AnalysisStructure analysis_from_json(const json& j);
RankedCandidate candidate_from_json(const json& j);
VerificationTest verification_test_from_json(const json& j);
DecisionReport decision_report_from_json(const json& j);
StagePatch patch_from_json(const json& j);
RcaTrace trace_from_json(const json& j);
// Parses a stage artifact of the expected shape; throws std::invalid_argument
// naming the stage and offending shape on mismatch.
StageArtifact stage_artifact_from_json(StageIndex s, const json& j);
SystemTopology topology_from_json(const json& j);
FaultSpec fault_spec_from_json(const json& j);
GroundTruth ground_truth_from_json(const json& j);

// Canonical byte encodings (compact dump of canonical JSON).
std::string canonical_bytes(const json& j);
std::string artifact_bytes(const RcaTrace& t, StageIndex s);
std::string trace_bytes(const RcaTrace& t);

// ---------------------------------------------------------------------------
// Incident bundle directory: topology.json, telemetry.jsonl, ground_truth.json

void write_bundle(const std::filesystem::path& dir, const SystemTopology& topo,
                  const TelemetryStore& store, const GroundTruth& gt);
IncidentContext load_bundle(const std::filesystem::path& dir);

void write_trace(const std::filesystem::path& file, const RcaTrace& t);
RcaTrace load_trace(const std::filesystem::path& file);

json load_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const json& j);

}  // namespace star
