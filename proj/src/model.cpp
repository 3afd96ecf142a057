#include "star/model.hpp"

#include <algorithm>

namespace star {

std::string to_string(StageIndex s) {
  switch (s) {
    case StageIndex::S1: return "S1";
    case StageIndex::S2: return "S2";
    case StageIndex::S3: return "S3";
    case StageIndex::S4: return "S4";
  }
  return "S?";
}

std::optional<StageIndex> stage_from_string(const std::string& s) {
  if (s == "S1" || s == "s1" || s == "1") return StageIndex::S1;
  if (s == "S2" || s == "s2" || s == "2") return StageIndex::S2;
  if (s == "S3" || s == "s3" || s == "3") return StageIndex::S3;
  if (s == "S4" || s == "s4" || s == "4") return StageIndex::S4;
  return std::nullopt;
}

std::vector<StageIndex> stages_after(StageIndex s) {
  std::vector<StageIndex> out;
  for (int i = stage_number(s) + 1; i <= 4; ++i)
    out.push_back(static_cast<StageIndex>(i));
  return out;
}

EntityKind entity_kind(const std::string& id) {
  if (id.rfind("svc:", 0) == 0) {
    return id.find("->") != std::string::npos ? EntityKind::Edge
                                              : EntityKind::Service;
  }
  if (id.rfind("pod:", 0) == 0) return EntityKind::Pod;
  if (id.rfind("node:", 0) == 0) return EntityKind::Node;
  return EntityKind::Unknown;
}

bool is_edge_target(const std::string& target) {
  return entity_kind(target) == EntityKind::Edge;
}

std::optional<std::pair<std::string, std::string>> parse_edge_target(
    const std::string& target) {
  auto pos = target.find("->");
  if (pos == std::string::npos) return std::nullopt;
  return std::make_pair(target.substr(0, pos), target.substr(pos + 2));
}

std::string make_edge_target(const std::string& caller,
                             const std::string& callee) {
  return caller + "->" + callee;
}

bool SystemTopology::has_entity(const std::string& id) const {
  auto in = [&](const std::vector<std::string>& v) {
    return std::binary_search(v.begin(), v.end(), id);
  };
  switch (entity_kind(id)) {
    case EntityKind::Service: return in(services);
    case EntityKind::Pod: return in(pods);
    case EntityKind::Node: return in(nodes);
    default: return false;
  }
}

bool SystemTopology::has_call_edge(const std::string& caller,
                                   const std::string& callee) const {
  return std::find(call_edges.begin(), call_edges.end(),
                   std::make_pair(caller, callee)) != call_edges.end();
}

std::vector<std::string> SystemTopology::callers_of(
    const std::string& svc) const {
  std::vector<std::string> out;
  for (const auto& [a, b] : call_edges)
    if (b == svc) out.push_back(a);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SystemTopology::callees_of(
    const std::string& svc) const {
  std::vector<std::string> out;
  for (const auto& [a, b] : call_edges)
    if (a == svc) out.push_back(b);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SystemTopology::pods_of(const std::string& svc) const {
  std::vector<std::string> out;
  for (const auto& [pod, owner] : ownership)
    if (owner == svc) out.push_back(pod);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SystemTopology::pods_on(const std::string& node) const {
  std::vector<std::string> out;
  for (const auto& [pod, n] : placement)
    if (n == node) out.push_back(pod);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> SystemTopology::service_of(
    const std::string& id) const {
  switch (entity_kind(id)) {
    case EntityKind::Service: return id;
    case EntityKind::Pod: {
      auto it = ownership.find(id);
      if (it != ownership.end()) return it->second;
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

std::optional<std::string> SystemTopology::node_of(const std::string& pod) const {
  auto it = placement.find(pod);
  if (it != placement.end()) return it->second;
  return std::nullopt;
}

bool SystemTopology::step_adjacent(const std::string& a, const std::string& b,
                                   const std::string& direction) const {
  EntityKind ka = entity_kind(a), kb = entity_kind(b);
  // Deployment links are valid in either direction.
  if (ka == EntityKind::Pod && kb == EntityKind::Service)
    return service_of(a) == std::optional<std::string>(b);
  if (ka == EntityKind::Service && kb == EntityKind::Pod)
    return service_of(b) == std::optional<std::string>(a);
  if (ka == EntityKind::Node && kb == EntityKind::Pod)
    return node_of(b) == std::optional<std::string>(a);
  if (ka == EntityKind::Pod && kb == EntityKind::Node)
    return node_of(a) == std::optional<std::string>(b);
  if (ka == EntityKind::Service && kb == EntityKind::Service) {
    // reverse_call: symptoms flow from a callee to its callers, so a step
    // a->b requires the call edge b->a. forward_call is the literal edge.
    if (direction == "forward_call") return has_call_edge(a, b);
    return has_call_edge(b, a);
  }
  return false;
}

const EvidenceItem* EvidencePackage::find_item(const std::string& id) const {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

bool EvidencePackage::in_scope(const std::string& entity) const {
  return std::find(entity_scope.begin(), entity_scope.end(), entity) !=
         entity_scope.end();
}

const Hypothesis* HypothesisSet::find(const std::string& id) const {
  for (const auto& h : hypotheses)
    if (h.id == id) return &h;
  return nullptr;
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::Metric: return "metric";
    case Modality::Log: return "log";
    case Modality::Trace: return "trace";
  }
  return "?";
}

std::optional<Modality> modality_from_string(const std::string& s) {
  if (s == "metric") return Modality::Metric;
  if (s == "log") return Modality::Log;
  if (s == "trace") return Modality::Trace;
  return std::nullopt;
}

namespace {
struct OpInfo {
  PatchOperator op;
  const char* name;
  StageIndex stage;
};
constexpr OpInfo kOps[] = {
    {PatchOperator::shift_expand_window, "shift_expand_window", StageIndex::S1},
    {PatchOperator::requery_modality, "requery_modality", StageIndex::S1},
    {PatchOperator::expand_scope_neighbors, "expand_scope_neighbors",
     StageIndex::S1},
    {PatchOperator::realign_timestamps, "realign_timestamps", StageIndex::S1},
    {PatchOperator::remove_unsupported, "remove_unsupported", StageIndex::S2},
    {PatchOperator::add_alternatives, "add_alternatives", StageIndex::S2},
    {PatchOperator::add_counter_hypotheses, "add_counter_hypotheses",
     StageIndex::S2},
    {PatchOperator::add_cross_layer, "add_cross_layer", StageIndex::S2},
    {PatchOperator::rebuild_reachable_chain, "rebuild_reachable_chain",
     StageIndex::S3},
    {PatchOperator::prune_hallucinated_edges, "prune_hallucinated_edges",
     StageIndex::S3},
    {PatchOperator::restore_temporal_order, "restore_temporal_order",
     StageIndex::S3},
    {PatchOperator::attach_link_support, "attach_link_support", StageIndex::S3},
    {PatchOperator::recalibrate_confidence, "recalibrate_confidence",
     StageIndex::S4},
    {PatchOperator::align_ranking_with_analysis, "align_ranking_with_analysis",
     StageIndex::S4},
    {PatchOperator::replace_verification_tests, "replace_verification_tests",
     StageIndex::S4},
    {PatchOperator::match_actions_to_mechanism, "match_actions_to_mechanism",
     StageIndex::S4},
};
}  // namespace

std::string to_string(PatchOperator op) {
  for (const auto& info : kOps)
    if (info.op == op) return info.name;
  return "?";
}

std::optional<PatchOperator> patch_operator_from_string(const std::string& s) {
  for (const auto& info : kOps)
    if (s == info.name) return info.op;
  return std::nullopt;
}

StageIndex stage_of_operator(PatchOperator op) {
  for (const auto& info : kOps)
    if (info.op == op) return info.stage;
  return StageIndex::S1;
}

std::vector<PatchOperator> operators_for_stage(StageIndex s) {
  std::vector<PatchOperator> out;
  for (const auto& info : kOps)
    if (info.stage == s) out.push_back(info.op);
  return out;
}

StageIndex stage_of_artifact(const StageArtifact& a) {
  return static_cast<StageIndex>(static_cast<int>(a.index()) + 1);
}

const StageArtifact stage_artifact(const RcaTrace& t, StageIndex s) {
  switch (s) {
    case StageIndex::S1: return t.ep;
    case StageIndex::S2: return t.hs;
    case StageIndex::S3: return t.as_;
    case StageIndex::S4: return t.dr;
  }
  throw std::invalid_argument("bad stage");
}

void set_stage_artifact(RcaTrace& t, StageIndex s, const StageArtifact& a) {
  if (stage_of_artifact(a) != s)
    throw std::invalid_argument("artifact shape does not match stage " +
                                to_string(s) + " (got " +
                                to_string(stage_of_artifact(a)) + " shape)");
  switch (s) {
    case StageIndex::S1: t.ep = std::get<EvidencePackage>(a); break;
    case StageIndex::S2: t.hs = std::get<HypothesisSet>(a); break;
    case StageIndex::S3: t.as_ = std::get<AnalysisStructure>(a); break;
    case StageIndex::S4: t.dr = std::get<DecisionReport>(a); break;
  }
}

RcaTrace replace_stage(const RcaTrace& t, StageIndex s,
                       const StageArtifact& artifact,
                       const std::optional<StagePatch>& provenance) {
  RcaTrace out = t;
  set_stage_artifact(out, s, artifact);  // throws on shape mismatch
  if (provenance) out.lineage.push_back(*provenance);
  return out;
}

bool is_fault_class(const std::string& s) {
  for (const char* f : kFaultClasses)
    if (s == f) return true;
  return false;
}

}  // namespace star
