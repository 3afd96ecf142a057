#include "star/json_io.hpp"

#include <fstream>
#include <sstream>

namespace star {

namespace {

[[noreturn]] void bad_shape(const std::string& what, const json& j) {
  throw std::invalid_argument("malformed " + what + ": " + j.dump());
}

const json& field(const json& j, const char* key, const char* ctx) {
  if (!j.is_object() || !j.contains(key))
    throw std::invalid_argument(std::string("missing field '") + key +
                                "' in " + ctx);
  return j.at(key);
}

}  // namespace

json to_json(const TimeWindow& w) {
  return json{{"start", w.start}, {"end", w.end}};
}

TimeWindow window_from_json(const json& j) {
  TimeWindow w;
  w.start = field(j, "start", "window").get<TimeMs>();
  w.end = field(j, "end", "window").get<TimeMs>();
  return w;
}

json to_json(const EvidenceItem& e) {
  return json{{"id", e.id},
              {"modality", to_string(e.modality)},
              {"target", e.target},
              {"window", to_json(e.window)},
              {"anomaly_score", e.anomaly_score},
              {"summary", e.summary}};
}

EvidenceItem evidence_item_from_json(const json& j) {
  EvidenceItem e;
  e.id = field(j, "id", "evidence item").get<std::string>();
  auto m = modality_from_string(
      field(j, "modality", "evidence item").get<std::string>());
  if (!m) bad_shape("evidence item modality", j);
  e.modality = *m;
  e.target = field(j, "target", "evidence item").get<std::string>();
  e.window = window_from_json(field(j, "window", "evidence item"));
  e.anomaly_score = field(j, "anomaly_score", "evidence item").get<double>();
  e.summary = field(j, "summary", "evidence item").get<std::string>();
  return e;
}

json to_json(const EvidencePackage& ep) {
  json items = json::array();
  for (const auto& i : ep.items) items.push_back(to_json(i));
  return json{{"incident_window", to_json(ep.incident_window)},
              {"entity_scope", ep.entity_scope},
              {"items", items}};
}

EvidencePackage evidence_package_from_json(const json& j) {
  EvidencePackage ep;
  ep.incident_window =
      window_from_json(field(j, "incident_window", "evidence package"));
  ep.entity_scope = field(j, "entity_scope", "evidence package")
                        .get<std::vector<std::string>>();
  for (const auto& it : field(j, "items", "evidence package"))
    ep.items.push_back(evidence_item_from_json(it));
  return ep;
}

json to_json(const Hypothesis& h) {
  return json{{"id", h.id},
              {"candidate_entity", h.candidate_entity},
              {"fault_class", h.fault_class},
              {"supporting_evidence", h.supporting_evidence},
              {"rationale", h.rationale}};
}

Hypothesis hypothesis_from_json(const json& j) {
  Hypothesis h;
  h.id = field(j, "id", "hypothesis").get<std::string>();
  h.candidate_entity =
      field(j, "candidate_entity", "hypothesis").get<std::string>();
  h.fault_class = field(j, "fault_class", "hypothesis").get<std::string>();
  h.supporting_evidence = field(j, "supporting_evidence", "hypothesis")
                              .get<std::vector<std::string>>();
  h.rationale = field(j, "rationale", "hypothesis").get<std::string>();
  return h;
}

json to_json(const HypothesisSet& hs) {
  json arr = json::array();
  for (const auto& h : hs.hypotheses) arr.push_back(to_json(h));
  return json{{"hypotheses", arr}};
}

HypothesisSet hypothesis_set_from_json(const json& j) {
  HypothesisSet hs;
  for (const auto& h : field(j, "hypotheses", "hypothesis set"))
    hs.hypotheses.push_back(hypothesis_from_json(h));
  return hs;
}

json to_json(const PropagationPath& p) {
  json steps = json::array();
  for (const auto& s : p.steps) {
    json st{{"entity", s.entity}};
    if (s.onset) st["onset"] = *s.onset;
    steps.push_back(st);
  }
  json support = json::object();
  for (const auto& [idx, ids] : p.link_support)
    support[std::to_string(idx)] = ids;
  return json{{"id", p.id},
              {"direction", p.direction},
              {"steps", steps},
              {"link_support", support},
              {"rationale", p.rationale}};
}

PropagationPath path_from_json(const json& j) {
  PropagationPath p;
  p.id = field(j, "id", "path").get<std::string>();
  p.direction = field(j, "direction", "path").get<std::string>();
  if (j.contains("rationale")) p.rationale = j.at("rationale").get<std::string>();
  for (const auto& st : field(j, "steps", "path")) {
    PathStep step;
    step.entity = field(st, "entity", "path step").get<std::string>();
    if (st.contains("onset")) step.onset = st.at("onset").get<TimeMs>();
    p.steps.push_back(step);
  }
  for (const auto& [k, v] : field(j, "link_support", "path").items())
    p.link_support[std::stoi(k)] = v.get<std::vector<std::string>>();
  return p;
}

json to_json(const AnalysisStructure& as_) {
  json paths = json::array();
  for (const auto& p : as_.paths) paths.push_back(to_json(p));
  return json{{"paths", paths},
              {"insufficient_evidence", as_.insufficient_evidence}};
}

AnalysisStructure analysis_from_json(const json& j) {
  AnalysisStructure a;
  for (const auto& p : field(j, "paths", "analysis"))
    a.paths.push_back(path_from_json(p));
  a.insufficient_evidence =
      field(j, "insufficient_evidence", "analysis").get<bool>();
  return a;
}

json to_json(const RankedCandidate& c) {
  return json{{"entity", c.entity},
              {"fault_class", c.fault_class},
              {"confidence", c.confidence},
              {"derived_from", c.derived_from}};
}

RankedCandidate candidate_from_json(const json& j) {
  RankedCandidate c;
  c.entity = field(j, "entity", "candidate").get<std::string>();
  c.fault_class = field(j, "fault_class", "candidate").get<std::string>();
  c.confidence = field(j, "confidence", "candidate").get<double>();
  c.derived_from =
      field(j, "derived_from", "candidate").get<std::vector<std::string>>();
  return c;
}

json to_json(const VerificationTest& t) {
  return json{{"target", t.target},
              {"description", t.description},
              {"signal", t.signal}};
}

VerificationTest verification_test_from_json(const json& j) {
  VerificationTest t;
  t.target = field(j, "target", "verification test").get<std::string>();
  t.description =
      field(j, "description", "verification test").get<std::string>();
  t.signal = field(j, "signal", "verification test").get<std::string>();
  return t;
}

json to_json(const DecisionReport& dr) {
  json ranking = json::array();
  for (const auto& c : dr.ranking) ranking.push_back(to_json(c));
  json tests = json::array();
  for (const auto& t : dr.verification_tests) tests.push_back(to_json(t));
  return json{{"ranking", ranking},
              {"verification_tests", tests},
              {"verification_first", dr.verification_first}};
}

DecisionReport decision_report_from_json(const json& j) {
  DecisionReport dr;
  for (const auto& c : field(j, "ranking", "decision report"))
    dr.ranking.push_back(candidate_from_json(c));
  for (const auto& t : field(j, "verification_tests", "decision report"))
    dr.verification_tests.push_back(verification_test_from_json(t));
  dr.verification_first =
      field(j, "verification_first", "decision report").get<bool>();
  return dr;
}

json to_json(const StagePatch& p) {
  return json{{"stage", to_string(p.stage)},
              {"operator", to_string(p.op)},
              {"params", p.params},
              {"produced_by", p.produced_by},
              {"rationale", p.rationale}};
}

StagePatch patch_from_json(const json& j) {
  StagePatch p;
  auto s = stage_from_string(field(j, "stage", "patch").get<std::string>());
  if (!s) bad_shape("patch stage", j);
  p.stage = *s;
  auto op =
      patch_operator_from_string(field(j, "operator", "patch").get<std::string>());
  if (!op) bad_shape("patch operator", j);
  p.op = *op;
  p.params = field(j, "params", "patch");
  p.produced_by = field(j, "produced_by", "patch").get<std::string>();
  p.rationale = field(j, "rationale", "patch").get<std::string>();
  return p;
}

json to_json(const RcaTrace& t) {
  json lineage = json::array();
  for (const auto& p : t.lineage) lineage.push_back(to_json(p));
  return json{{"incident_id", t.incident_id},
              {"executor_id", t.executor_id},
              {"seed", t.seed},
              {"ep", to_json(t.ep)},
              {"hs", to_json(t.hs)},
              {"as", to_json(t.as_)},
              {"dr", to_json(t.dr)},
              {"lineage", lineage}};
}

RcaTrace trace_from_json(const json& j) {
  RcaTrace t;
  t.incident_id = field(j, "incident_id", "trace").get<std::string>();
  t.executor_id = field(j, "executor_id", "trace").get<std::string>();
  t.seed = field(j, "seed", "trace").get<std::uint64_t>();
  t.ep = evidence_package_from_json(field(j, "ep", "trace"));
  t.hs = hypothesis_set_from_json(field(j, "hs", "trace"));
  t.as_ = analysis_from_json(field(j, "as", "trace"));
  t.dr = decision_report_from_json(field(j, "dr", "trace"));
  for (const auto& p : field(j, "lineage", "trace"))
    t.lineage.push_back(patch_from_json(p));
  return t;
}

json to_json(const StageArtifact& a) {
  return std::visit([](const auto& v) { return to_json(v); }, a);
}

StageArtifact stage_artifact_from_json(StageIndex s, const json& j) {
  try {
    switch (s) {
      case StageIndex::S1: return evidence_package_from_json(j);
      case StageIndex::S2: return hypothesis_set_from_json(j);
      case StageIndex::S3: return analysis_from_json(j);
      case StageIndex::S4: return decision_report_from_json(j);
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("artifact for stage " + to_string(s) +
                                " rejected: " + e.what());
  }
  throw std::invalid_argument("bad stage index");
}

json to_json(const SystemTopology& t) {
  json edges = json::array();
  for (const auto& [a, b] : t.call_edges) edges.push_back(json::array({a, b}));
  return json{{"services", t.services}, {"pods", t.pods},
              {"nodes", t.nodes},       {"call_edges", edges},
              {"placement", t.placement}, {"ownership", t.ownership}};
}

SystemTopology topology_from_json(const json& j) {
  SystemTopology t;
  t.services = field(j, "services", "topology").get<std::vector<std::string>>();
  t.pods = field(j, "pods", "topology").get<std::vector<std::string>>();
  t.nodes = field(j, "nodes", "topology").get<std::vector<std::string>>();
  for (const auto& e : field(j, "call_edges", "topology")) {
    if (!e.is_array() || e.size() != 2) bad_shape("call edge", e);
    t.call_edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  t.placement = field(j, "placement", "topology")
                    .get<std::map<std::string, std::string>>();
  t.ownership = field(j, "ownership", "topology")
                    .get<std::map<std::string, std::string>>();
  return t;
}

json to_json(const FaultSpec& f) {
  return json{{"fault_class", f.fault_class},
              {"root_entity", f.root_entity},
              {"onset", f.onset},
              {"magnitude", f.magnitude}};
}

FaultSpec fault_spec_from_json(const json& j) {
  FaultSpec f;
  f.fault_class = field(j, "fault_class", "fault spec").get<std::string>();
  f.root_entity = field(j, "root_entity", "fault spec").get<std::string>();
  f.onset = field(j, "onset", "fault spec").get<TimeMs>();
  f.magnitude = field(j, "magnitude", "fault spec").get<double>();
  return f;
}

json to_json(const GroundTruth& g) {
  json order = json::array();
  for (const auto& [e, t] : g.propagation_order)
    order.push_back(json{{"entity", e}, {"onset", t}});
  return json{{"root_entity", g.root_entity},
              {"fault_class", g.fault_class},
              {"onset", g.onset},
              {"propagation_order", order}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth g;
  g.root_entity = field(j, "root_entity", "ground truth").get<std::string>();
  g.fault_class = field(j, "fault_class", "ground truth").get<std::string>();
  g.onset = field(j, "onset", "ground truth").get<TimeMs>();
  for (const auto& o : field(j, "propagation_order", "ground truth"))
    g.propagation_order.emplace_back(
        field(o, "entity", "propagation entry").get<std::string>(),
        field(o, "onset", "propagation entry").get<TimeMs>());
  return g;
}

std::string canonical_bytes(const json& j) { return j.dump(); }

std::string artifact_bytes(const RcaTrace& t, StageIndex s) {
  return canonical_bytes(to_json(stage_artifact(t, s)));
}

std::string trace_bytes(const RcaTrace& t) {
  return canonical_bytes(to_json(t));
}

// ---------------------------------------------------------------------------
// Files

json load_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  json j;
  in >> j;
  return j;
}

void write_json_file(const std::filesystem::path& file, const json& j) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << "\n";
}

namespace {

json metric_line(const std::string& entity, const std::string& name,
                 const MetricPoint& p) {
  return json{{"kind", "metric"}, {"entity", entity}, {"name", name},
              {"ts", p.ts},       {"value", p.value}};
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const SystemTopology& topo,
                  const TelemetryStore& store, const GroundTruth& gt) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "topology.json", to_json(topo));
  write_json_file(dir / "ground_truth.json", to_json(gt));

  std::ofstream out(dir / "telemetry.jsonl", std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + (dir / "telemetry.jsonl").string());
  out << json{{"kind", "horizon"}, {"start", store.horizon.start},
              {"end", store.horizon.end}}
             .dump()
      << "\n";
  for (const auto& [key, per_metric] : store.baseline_stats)
    for (const auto& [name, b] : per_metric)
      out << json{{"kind", "baseline"}, {"key", key},   {"metric", name},
                  {"mean", b.mean},     {"stddev", b.stddev}}
                 .dump()
          << "\n";
  for (const auto& [entity, per_metric] : store.metrics)
    for (const auto& [name, pts] : per_metric)
      for (const auto& p : pts) out << metric_line(entity, name, p).dump() << "\n";
  for (const auto& l : store.logs)
    out << json{{"kind", "log"},         {"ts", l.ts},
                {"entity", l.entity},    {"severity", l.severity},
                {"template", l.template_id}, {"text", l.text}}
               .dump()
        << "\n";
  for (const auto& s : store.spans)
    out << json{{"kind", "span"},     {"trace_id", s.trace_id},
                {"caller", s.caller}, {"callee", s.callee},
                {"start", s.start},   {"duration_ms", s.duration_ms},
                {"status", s.status}}
               .dump()
        << "\n";
}

IncidentContext load_bundle(const std::filesystem::path& dir) {
  SystemTopology topo = topology_from_json(load_json_file(dir / "topology.json"));
  std::optional<GroundTruth> gt;
  if (std::filesystem::exists(dir / "ground_truth.json"))
    gt = ground_truth_from_json(load_json_file(dir / "ground_truth.json"));

  TelemetryStore store;
  std::ifstream in(dir / "telemetry.jsonl");
  if (!in)
    throw std::runtime_error("cannot open " + (dir / "telemetry.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "horizon") {
      store.horizon = {j.at("start").get<TimeMs>(), j.at("end").get<TimeMs>()};
    } else if (kind == "baseline") {
      store.baseline_stats[j.at("key").get<std::string>()]
                          [j.at("metric").get<std::string>()] = {
          j.at("mean").get<double>(), j.at("stddev").get<double>()};
    } else if (kind == "metric") {
      store.metrics[j.at("entity").get<std::string>()]
                   [j.at("name").get<std::string>()]
          .push_back({j.at("ts").get<TimeMs>(), j.at("value").get<double>()});
    } else if (kind == "log") {
      store.logs.push_back({j.at("ts").get<TimeMs>(),
                            j.at("entity").get<std::string>(),
                            j.at("severity").get<std::string>(),
                            j.at("template").get<std::string>(),
                            j.at("text").get<std::string>()});
    } else if (kind == "span") {
      store.spans.push_back(
          {j.at("trace_id").get<std::string>(), j.at("caller").get<std::string>(),
           j.at("callee").get<std::string>(), j.at("start").get<TimeMs>(),
           j.at("duration_ms").get<double>(), j.at("status").get<std::string>()});
    } else {
      throw std::runtime_error("unknown telemetry record kind: " + kind);
    }
  }
  return IncidentContext::make(dir.filename().string(), std::move(topo),
                               std::move(store), std::move(gt));
}

void write_trace(const std::filesystem::path& file, const RcaTrace& t) {
  write_json_file(file, to_json(t));
}

RcaTrace load_trace(const std::filesystem::path& file) {
  return trace_from_json(load_json_file(file));
}

}  // namespace star
