#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "star/model.hpp"
#include "star/telemetry.hpp"

// Telemetry interpretation shared by the stage executor, the audit checks
// and the patch critics: anomaly scans, evidence item construction, fault
// signature templates, evidence re-verification and path scoring. Keeping
// one canonical implementation here is what makes "re-derive from the store"
// mean the same thing everywhere.

namespace star {

// ---------------------------------------------------------------------------
// Metric scanning

struct MetricAnomaly {
  std::string metric;
  double max_abs_z = 0.0;
  TimeMs first_breach = 0;  // first |z| >= 3 sample in the scanned window
  TimeMs last_breach = 0;
  std::string trend;  // "elevated", "ramping" or "saturated"
};

// Highest-|z| behaviour of one metric in a window; nullopt when the series
// never breaches |z| >= 3 there.
std::optional<MetricAnomaly> scan_metric(const TelemetryStore& store,
                                         const std::string& entity,
                                         const std::string& metric,
                                         const TimeWindow& window);

// ---------------------------------------------------------------------------
// Evidence summaries (compact, parseable stat lines)

struct MetricSummary {
  std::string metric;
  double z = 0.0;
  std::string trend;
};
struct LogSummary {
  int errors = 0;
  int warns = 0;
  std::string template_id;
};
struct SpanSummary {
  int slow = 0;
  int errors = 0;
  double max_z = 0.0;
};

std::string format_metric_summary(const MetricSummary& s);
std::string format_log_summary(const LogSummary& s);
std::string format_span_summary(const SpanSummary& s);
std::optional<MetricSummary> parse_metric_summary(const std::string& s);
std::optional<LogSummary> parse_log_summary(const std::string& s);
std::optional<SpanSummary> parse_span_summary(const std::string& s);

// ---------------------------------------------------------------------------
// Evidence collection

// Scans the given entities (and the call edges touching their services) for
// anomalies within the window and builds evidence items in canonical order.
// Items carry no ids; the caller assigns them. Only signal-bearing items are
// produced; their anomaly scores follow min(1, z/10)-style normalization.
std::vector<EvidenceItem> collect_scope_evidence(
    const IncidentContext& ctx, const std::vector<std::string>& scope,
    const TimeWindow& window);

// Assigns "eNN" ids in order, starting at start_index (1-based).
void assign_item_ids(std::vector<EvidenceItem>& items, int start_index = 1);

// ---------------------------------------------------------------------------
// Fault signatures

struct EntitySignature {
  std::set<std::string> anomalous_metrics;  // metric names with |z| >= 3
  std::set<std::string> trends;             // trends seen on those metrics
  bool error_logs = false;
  bool warn_logs = false;
  bool error_spans = false;
  bool slow_spans = false;
};

// From the store (ground-level view), over a window.
EntitySignature signature_from_store(const IncidentContext& ctx,
                                     const std::string& entity,
                                     const TimeWindow& window);
// From the evidence package (the agent's possibly-wrong view of the world).
EntitySignature signature_from_items(const EvidencePackage& ep,
                                     const std::string& entity,
                                     double min_score = 0.3);

// Template match: which of the five fault classes best explains a signature.
// nullopt when nothing matches (quiet entity).
std::optional<std::string> classify_signature(const EntitySignature& sig);

// Modalities a fault class is expected to show up in.
std::vector<Modality> expected_modalities(const std::string& fault_class);
// The single metric/signal that discriminates a class in a verification test.
std::string discriminating_signal(const std::string& fault_class);
// Ambiguity partner used for counter-hypotheses (cpu_hog<->network_delay,
// memory_leak<->disk_exhaustion, packet_loss<->network_delay).
std::optional<std::string> counter_class(const std::string& fault_class);

// Store-level guess of the incident class: signature of the earliest-onset
// entity over the whole horizon. Stable under any trace corruption.
std::optional<std::string> incident_class_guess(const IncidentContext& ctx);

// ---------------------------------------------------------------------------
// Evidence re-verification

// True when the item's target is the entity or a call edge touching it.
bool item_touches(const EvidenceItem& item, const std::string& entity);

// True when the item's claim is reproducible from the store: the slice it
// points at exists, a high claimed score (>=0.5) coincides with a real
// breach, a dismissive claimed score (<0.3) coincides with quiet, and the
// claimed statistics are within rounding of recomputation. Both fabrication
// and misreading fail this.
bool item_backed(const IncidentContext& ctx, const EvidenceItem& item);

// Ids of backed items among the given ids (resolved against ep).
std::vector<std::string> backed_subset(const IncidentContext& ctx,
                                       const EvidencePackage& ep,
                                       const std::vector<std::string>& ids);

// Earliest claimed window start among items targeting the entity
// (anomaly_score >= 0.3); the fallback onset for entities the store has no
// breach for.
std::optional<TimeMs> claimed_onset(const EvidencePackage& ep,
                                    const std::string& entity);

// Store onset if present, else the evidence-claimed onset.
std::optional<TimeMs> effective_onset(const IncidentContext& ctx,
                                      const EvidencePackage& ep,
                                      const std::string& entity);

// ---------------------------------------------------------------------------
// Path scoring (canonical; S4 ranking and the audit consistency check share
// this definition)

// distinct support ids + 0.75 per link + 2 per minute of onset lead over the
// incident sink (capped at 10 minutes). One-step chains have no links, so
// their support is the set of items directly implicating the lone entity.
double path_score(const PropagationPath& p, const EvidencePackage& ep,
                  const IncidentContext& ctx);

// Distinct backed supporting items across the candidate's derived paths.
int backed_support_count(const IncidentContext& ctx, const RcaTrace& t,
                         const RankedCandidate& c);

// Item ids (score >= 0.3) that support a hop between a and b: anything
// targeting either endpoint or a call edge touching one of them. Path
// construction and the link-support repair both derive support this way.
std::vector<std::string> link_support_ids(const EvidencePackage& ep,
                                          const std::string& a,
                                          const std::string& b);

}  // namespace star
