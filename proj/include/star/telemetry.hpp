#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "star/model.hpp"

// Telemetry store: the immutable observability snapshot an incident bundle
// carries. Metrics are regular series, logs are discrete lines, spans are
// per-call-edge records. Baselines are the healthy-period stats z-scores are
// computed against.

namespace star {

struct MetricPoint {
  TimeMs ts = 0;
  double value = 0.0;
  bool operator==(const MetricPoint&) const = default;
};

struct LogLine {
  TimeMs ts = 0;
  std::string entity;
  std::string severity;  // "info", "warn", "error"
  std::string template_id;
  std::string text;
  bool operator==(const LogLine&) const = default;
};

struct Span {
  std::string trace_id;
  std::string caller;  // service id
  std::string callee;  // service id
  TimeMs start = 0;
  double duration_ms = 0.0;
  std::string status;  // "ok" or "error"
  bool operator==(const Span&) const = default;
};

struct BaselineStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool operator==(const BaselineStats&) const = default;
};

// Span-duration baselines are stored under this pseudo-metric name, keyed by
// the edge target string ("svc:a->svc:b").
inline constexpr const char* kSpanDurationMetric = "span_duration_ms";

struct TelemetryStore {
  TimeWindow horizon;
  // entity -> metric name -> points (ts ascending)
  std::map<std::string, std::map<std::string, std::vector<MetricPoint>>> metrics;
  std::vector<LogLine> logs;    // ts ascending
  std::vector<Span> spans;      // start ascending
  // key -> metric name -> stats; key is an entity id or an edge target
  std::map<std::string, std::map<std::string, BaselineStats>> baseline_stats;

  std::optional<BaselineStats> baseline(const std::string& key,
                                        const std::string& metric) const;
  // z-score of a value against the stored baseline; 0 when no baseline.
  double zscore(const std::string& key, const std::string& metric,
                double value) const;
  // Removes every record (metrics, logs, spans, baselines) touching the
  // entity. Used to model evidence loss after the fact.
  void erase_entity(const std::string& entity);
};

struct TelemetrySlice {
  // entity -> metric -> points within the window
  std::map<std::string, std::map<std::string, std::vector<MetricPoint>>> metrics;
  std::vector<LogLine> logs;
  std::vector<Span> spans;

  bool empty() const { return metrics.empty() && logs.empty() && spans.empty(); }
};

// Pulls the records of one modality for the given targets (entity ids or edge
// targets) within the window. Entity targets match spans touching the entity
// as caller or callee; edge targets match exactly. A window outside the
// horizon simply yields an empty slice.
TelemetrySlice query_telemetry(const TelemetryStore& store, Modality modality,
                               const std::vector<std::string>& targets,
                               const TimeWindow& window);

// ---------------------------------------------------------------------------
// Ground truth (simulator output; evaluation only)

struct FaultSpec {
  std::string fault_class;  // one of kFaultClasses
  std::string root_entity;
  TimeMs onset = 0;
  double magnitude = 1.0;
  bool operator==(const FaultSpec&) const = default;
};

struct GroundTruth {
  std::string root_entity;
  std::string fault_class;
  TimeMs onset = 0;
  // (entity, expected symptom onset), root first, onset ascending.
  std::vector<std::pair<std::string, TimeMs>> propagation_order;
  bool operator==(const GroundTruth&) const = default;
};

// ---------------------------------------------------------------------------
// Derived per-store summary, computed once per incident and shared by the
// executor, the audit checks and the critics. Pure function of the store.

struct StoreSummary {
  // entity -> first timestamp with |z| >= 3 on any of its metrics
  std::map<std::string, TimeMs> entity_onsets;
  std::optional<std::string> earliest_entity;  // breach that fires the alert
  std::optional<TimeMs> earliest_onset;
  std::optional<std::string> sink_entity;      // most downstream victim
  std::optional<TimeMs> sink_onset;
};

inline constexpr double kOnsetZ = 3.0;

StoreSummary summarize_store(const TelemetryStore& store);
// First timestamp in [window] (or the whole horizon) where any metric of the
// entity breaches |z| >= 3.
std::optional<TimeMs> entity_onset(const TelemetryStore& store,
                                   const std::string& entity);

// Incident bundle as loaded from disk; the unit everything downstream
// operates on.
struct IncidentContext {
  std::string incident_id;
  SystemTopology topo;
  TelemetryStore store;
  StoreSummary summary;
  std::optional<GroundTruth> gt;

  static IncidentContext make(std::string id, SystemTopology t,
                              TelemetryStore s,
                              std::optional<GroundTruth> g = std::nullopt) {
    IncidentContext ctx;
    ctx.incident_id = std::move(id);
    ctx.topo = std::move(t);
    ctx.store = std::move(s);
    ctx.summary = summarize_store(ctx.store);
    ctx.gt = std::move(g);
    return ctx;
  }
};

}  // namespace star
