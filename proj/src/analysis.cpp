#include "star/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace star {

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Pulls "key=value" out of a summary token stream.
std::optional<std::string> token_value(const std::string& s,
                                       const std::string& key) {
  auto pos = s.find(key + "=");
  if (pos == std::string::npos) return std::nullopt;
  pos += key.size() + 1;
  auto end = s.find(' ', pos);
  return s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

}  // namespace

std::optional<MetricAnomaly> scan_metric(const TelemetryStore& store,
                                         const std::string& entity,
                                         const std::string& metric,
                                         const TimeWindow& window) {
  auto eit = store.metrics.find(entity);
  if (eit == store.metrics.end()) return std::nullopt;
  auto mit = eit->second.find(metric);
  if (mit == eit->second.end()) return std::nullopt;

  MetricAnomaly out;
  out.metric = metric;
  bool any = false;
  std::vector<MetricPoint> breached;
  double first_val = 0.0, max_val = 0.0;
  bool have_first = false;
  int rises = 0, falls = 0;
  std::optional<double> prev;
  for (const auto& p : mit->second) {
    if (!window.contains(p.ts)) continue;
    if (!have_first) {
      first_val = p.value;
      have_first = true;
    }
    max_val = std::max(max_val, p.value);
    if (prev) {
      if (p.value > *prev) ++rises;
      else if (p.value < *prev) ++falls;
    }
    prev = p.value;
    double z = std::abs(store.zscore(entity, metric, p.value));
    if (z >= kOnsetZ) {
      if (!any) out.first_breach = p.ts;
      out.last_breach = p.ts;
      out.max_abs_z = std::max(out.max_abs_z, z);
      breached.push_back(p);
      any = true;
    }
  }
  if (!any) return std::nullopt;

  // Trend classification: saturation beats ramping beats a plain step.
  if (metric == "disk" && max_val >= 99.0) {
    out.trend = "saturated";
  } else if (breached.size() >= 3 &&
             breached.back().value >
                 breached.front().value + 3.0 * std::max(
                     1e-9, store.baseline(entity, metric)->stddev) &&
             rises > 3 * std::max(1, falls)) {
    out.trend = "ramping";
  } else {
    out.trend = "elevated";
  }
  (void)first_val;
  return out;
}

std::string format_metric_summary(const MetricSummary& s) {
  return s.metric + " z=" + fmt1(s.z) + " " + s.trend;
}
std::string format_log_summary(const LogSummary& s) {
  return "errors=" + std::to_string(s.errors) +
         " warns=" + std::to_string(s.warns) + " template=" + s.template_id;
}
std::string format_span_summary(const SpanSummary& s) {
  return "spans slow=" + std::to_string(s.slow) +
         " err=" + std::to_string(s.errors) + " zmax=" + fmt1(s.max_z);
}

std::optional<MetricSummary> parse_metric_summary(const std::string& s) {
  auto z = token_value(s, "z");
  if (!z) return std::nullopt;
  auto sp = s.find(' ');
  if (sp == std::string::npos) return std::nullopt;
  MetricSummary out;
  out.metric = s.substr(0, sp);
  try {
    out.z = std::stod(*z);
  } catch (...) {
    return std::nullopt;
  }
  auto last = s.rfind(' ');
  if (last != std::string::npos && last + 1 < s.size())
    out.trend = s.substr(last + 1);
  return out;
}

std::optional<LogSummary> parse_log_summary(const std::string& s) {
  auto e = token_value(s, "errors");
  auto w = token_value(s, "warns");
  if (!e || !w) return std::nullopt;
  LogSummary out;
  try {
    out.errors = std::stoi(*e);
    out.warns = std::stoi(*w);
  } catch (...) {
    return std::nullopt;
  }
  if (auto t = token_value(s, "template")) out.template_id = *t;
  return out;
}

std::optional<SpanSummary> parse_span_summary(const std::string& s) {
  if (s.rfind("spans ", 0) != 0) return std::nullopt;
  auto sl = token_value(s, "slow");
  auto er = token_value(s, "err");
  if (!sl || !er) return std::nullopt;
  SpanSummary out;
  try {
    out.slow = std::stoi(*sl);
    out.errors = std::stoi(*er);
    if (auto z = token_value(s, "zmax")) out.max_z = std::stod(*z);
  } catch (...) {
    return std::nullopt;
  }
  return out;
}

namespace {

std::optional<EvidenceItem> log_item_for(const IncidentContext& ctx,
                                         const std::string& entity,
                                         const TimeWindow& window) {
  auto slice = query_telemetry(ctx.store, Modality::Log, {entity}, window);
  int errors = 0, warns = 0;
  std::map<std::string, int> templates;
  TimeMs first = 0, last = 0;
  bool any = false;
  for (const auto& l : slice.logs) {
    if (l.severity == "error") ++errors;
    else if (l.severity == "warn") ++warns;
    else continue;
    ++templates[l.template_id];
    if (!any) first = l.ts;
    last = l.ts;
    any = true;
  }
  if (!any) return std::nullopt;
  std::string dominant;
  int best = -1;
  for (const auto& [tid, n] : templates)
    if (n > best) { best = n; dominant = tid; }
  EvidenceItem item;
  item.modality = Modality::Log;
  item.target = entity;
  item.window = {first, last + 1};
  item.anomaly_score = std::min(1.0, (errors + 0.3 * warns) / 5.0);
  item.summary = format_log_summary({errors, warns, dominant});
  return item;
}

std::optional<EvidenceItem> span_item_for(const IncidentContext& ctx,
                                          const std::string& edge,
                                          const TimeWindow& window) {
  auto slice = query_telemetry(ctx.store, Modality::Trace, {edge}, window);
  int slow = 0, errors = 0;
  double max_z = 0.0;
  TimeMs first = 0, last = 0;
  bool any = false;
  for (const auto& s : slice.spans) {
    double z = ctx.store.zscore(edge, kSpanDurationMetric, s.duration_ms);
    bool anomalous = s.status != "ok" || z >= kOnsetZ;
    if (!anomalous) continue;
    if (s.status != "ok") ++errors;
    if (z >= kOnsetZ) ++slow;
    max_z = std::max(max_z, z);
    if (!any) first = s.start;
    last = s.start;
    any = true;
  }
  if (!any) return std::nullopt;
  EvidenceItem item;
  item.modality = Modality::Trace;
  item.target = edge;
  item.window = {first, last + 1};
  item.anomaly_score = std::min(1.0, (slow + 2.0 * errors) / 8.0);
  item.summary = format_span_summary({slow, errors, max_z});
  return item;
}

}  // namespace

std::vector<EvidenceItem> collect_scope_evidence(
    const IncidentContext& ctx, const std::vector<std::string>& scope,
    const TimeWindow& window) {
  std::vector<std::string> sorted_scope = scope;
  std::sort(sorted_scope.begin(), sorted_scope.end());
  sorted_scope.erase(std::unique(sorted_scope.begin(), sorted_scope.end()),
                     sorted_scope.end());

  std::vector<EvidenceItem> items;
  for (const auto& entity : sorted_scope) {
    auto eit = ctx.store.metrics.find(entity);
    if (eit == ctx.store.metrics.end()) continue;
    for (const auto& [metric, _] : eit->second) {
      auto an = scan_metric(ctx.store, entity, metric, window);
      if (!an) continue;
      EvidenceItem item;
      item.modality = Modality::Metric;
      item.target = entity;
      item.window = {an->first_breach, an->last_breach + 1};
      item.anomaly_score = std::min(1.0, an->max_abs_z / 10.0);
      item.summary = format_metric_summary({metric, an->max_abs_z, an->trend});
      items.push_back(std::move(item));
    }
  }
  for (const auto& entity : sorted_scope)
    if (auto item = log_item_for(ctx, entity, window))
      items.push_back(std::move(*item));
  // Call edges touching any scoped service, in canonical edge order.
  std::set<std::string> scoped(sorted_scope.begin(), sorted_scope.end());
  for (const auto& [caller, callee] : ctx.topo.call_edges) {
    if (!scoped.count(caller) && !scoped.count(callee)) continue;
    if (auto item = span_item_for(ctx, make_edge_target(caller, callee), window))
      items.push_back(std::move(*item));
  }
  return items;
}

void assign_item_ids(std::vector<EvidenceItem>& items, int start_index) {
  int n = start_index;
  for (auto& item : items) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "e%02d", n++);
    item.id = buf;
  }
}

EntitySignature signature_from_store(const IncidentContext& ctx,
                                     const std::string& entity,
                                     const TimeWindow& window) {
  EntitySignature sig;
  auto eit = ctx.store.metrics.find(entity);
  if (eit != ctx.store.metrics.end()) {
    for (const auto& [metric, _] : eit->second) {
      if (auto an = scan_metric(ctx.store, entity, metric, window)) {
        sig.anomalous_metrics.insert(metric);
        sig.trends.insert(an->trend);
      }
    }
  }
  auto logs = query_telemetry(ctx.store, Modality::Log, {entity}, window);
  for (const auto& l : logs.logs) {
    if (l.severity == "error") sig.error_logs = true;
    if (l.severity == "warn") sig.warn_logs = true;
  }
  auto spans = query_telemetry(ctx.store, Modality::Trace, {entity}, window);
  for (const auto& s : spans.spans) {
    const std::string edge = make_edge_target(s.caller, s.callee);
    if (s.status != "ok") sig.error_spans = true;
    if (ctx.store.zscore(edge, kSpanDurationMetric, s.duration_ms) >= kOnsetZ)
      sig.slow_spans = true;
  }
  return sig;
}

EntitySignature signature_from_items(const EvidencePackage& ep,
                                     const std::string& entity,
                                     double min_score) {
  EntitySignature sig;
  for (const auto& item : ep.items) {
    bool mine = item.target == entity;
    if (auto edge = parse_edge_target(item.target))
      mine = edge->first == entity || edge->second == entity;
    if (!mine) continue;
    switch (item.modality) {
      case Modality::Metric: {
        if (item.anomaly_score < min_score) break;
        if (auto ms = parse_metric_summary(item.summary)) {
          sig.anomalous_metrics.insert(ms->metric);
          sig.trends.insert(ms->trend);
        }
        break;
      }
      case Modality::Log: {
        if (auto ls = parse_log_summary(item.summary)) {
          if (ls->errors > 0) sig.error_logs = true;
          if (ls->warns > 0) sig.warn_logs = true;
        }
        break;
      }
      case Modality::Trace: {
        if (auto ss = parse_span_summary(item.summary)) {
          if (ss->errors > 0) sig.error_spans = true;
          if (ss->slow > 0) sig.slow_spans = true;
        }
        break;
      }
    }
  }
  return sig;
}

std::optional<std::string> classify_signature(const EntitySignature& sig) {
  const auto& m = sig.anomalous_metrics;
  // Resource signatures are the most specific, then loss, then plain
  // slowness. Order matters: a disk-full incident also drags latency.
  if (m.count("disk")) return "disk_exhaustion";
  if (m.count("memory")) return "memory_leak";
  if (m.count("cpu")) return "cpu_hog";
  if (sig.error_logs || sig.error_spans) return "packet_loss";
  if (m.count("latency") || sig.slow_spans) return "network_delay";
  return std::nullopt;
}

std::vector<Modality> expected_modalities(const std::string& fault_class) {
  if (fault_class == "cpu_hog" || fault_class == "memory_leak")
    return {Modality::Metric};
  if (fault_class == "disk_exhaustion")
    return {Modality::Metric, Modality::Log};
  if (fault_class == "network_delay")
    return {Modality::Metric, Modality::Trace};
  if (fault_class == "packet_loss") return {Modality::Log, Modality::Trace};
  return {Modality::Metric};
}

std::string discriminating_signal(const std::string& fault_class) {
  if (fault_class == "cpu_hog") return "cpu z-score >= 3 sustained";
  if (fault_class == "memory_leak") return "memory monotone ramp, z >= 3";
  if (fault_class == "disk_exhaustion") return "disk usage saturated >= 99%";
  if (fault_class == "network_delay") return "latency z >= 3 with slow spans";
  if (fault_class == "packet_loss") return "error logs and failed spans present";
  return "latency z-score >= 3";
}

std::optional<std::string> counter_class(const std::string& fault_class) {
  if (fault_class == "cpu_hog") return "network_delay";
  if (fault_class == "network_delay") return "packet_loss";
  if (fault_class == "packet_loss") return "network_delay";
  if (fault_class == "memory_leak") return "disk_exhaustion";
  if (fault_class == "disk_exhaustion") return "memory_leak";
  return std::nullopt;
}

std::optional<std::string> incident_class_guess(const IncidentContext& ctx) {
  if (!ctx.summary.earliest_entity) return std::nullopt;
  return classify_signature(signature_from_store(
      ctx, *ctx.summary.earliest_entity, ctx.store.horizon));
}

bool item_touches(const EvidenceItem& item, const std::string& entity) {
  if (item.target == entity) return true;
  if (auto edge = parse_edge_target(item.target))
    return edge->first == entity || edge->second == entity;
  return false;
}

bool item_backed(const IncidentContext& ctx, const EvidenceItem& item) {
  switch (item.modality) {
    case Modality::Metric: {
      auto parsed = parse_metric_summary(item.summary);
      auto eit = ctx.store.metrics.find(item.target);
      if (eit == ctx.store.metrics.end()) return false;
      double real_max = 0.0;
      bool any_points = false;
      for (const auto& [metric, pts] : eit->second) {
        if (parsed && parsed->metric != metric) continue;
        for (const auto& p : pts) {
          if (!item.window.contains(p.ts)) continue;
          any_points = true;
          real_max = std::max(real_max,
                              std::abs(ctx.store.zscore(item.target, metric,
                                                        p.value)));
        }
      }
      if (!any_points) return false;  // fabricated: nothing recorded there
      if (item.anomaly_score >= 0.5 && real_max < kOnsetZ) return false;
      if (item.anomaly_score < 0.3 && real_max >= kOnsetZ) return false;
      // Misreading: the claimed z-score diverges far beyond what rounding or
      // windowing can explain.
      if (parsed &&
          std::abs(parsed->z - real_max) > std::max(2.0, 0.5 * real_max))
        return false;
      return true;
    }
    case Modality::Log: {
      auto slice =
          query_telemetry(ctx.store, Modality::Log, {item.target}, item.window);
      int errors = 0, warns = 0;
      for (const auto& l : slice.logs) {
        if (l.severity == "error") ++errors;
        if (l.severity == "warn") ++warns;
      }
      double real_score = std::min(1.0, (errors + 0.3 * warns) / 5.0);
      if (item.anomaly_score >= 0.5 && real_score < 0.3) return false;
      if (item.anomaly_score < 0.3 && real_score >= 0.3) return false;
      if (auto parsed = parse_log_summary(item.summary))
        if (parsed->errors > 0 && errors == 0) return false;
      return !slice.logs.empty();
    }
    case Modality::Trace: {
      auto slice = query_telemetry(ctx.store, Modality::Trace, {item.target},
                                   item.window);
      if (slice.spans.empty()) return false;
      int slow = 0, errors = 0;
      for (const auto& s : slice.spans) {
        const std::string edge = make_edge_target(s.caller, s.callee);
        if (ctx.store.zscore(edge, kSpanDurationMetric, s.duration_ms) >=
            kOnsetZ)
          ++slow;
        if (s.status != "ok") ++errors;
      }
      double real_score = std::min(1.0, (slow + 2.0 * errors) / 8.0);
      if (item.anomaly_score >= 0.5 && real_score < 0.3) return false;
      if (item.anomaly_score < 0.3 && real_score >= 0.3) return false;
      if (auto parsed = parse_span_summary(item.summary))
        if (parsed->errors > 0 && errors == 0) return false;
      return true;
    }
  }
  return false;
}

std::vector<std::string> backed_subset(const IncidentContext& ctx,
                                       const EvidencePackage& ep,
                                       const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    const EvidenceItem* item = ep.find_item(id);
    if (item && item_backed(ctx, *item)) out.push_back(id);
  }
  return out;
}

std::optional<TimeMs> claimed_onset(const EvidencePackage& ep,
                                    const std::string& entity) {
  std::optional<TimeMs> best;
  for (const auto& item : ep.items) {
    bool mine = item.target == entity;
    if (auto edge = parse_edge_target(item.target))
      mine = edge->first == entity || edge->second == entity;
    if (!mine || item.anomaly_score < 0.3) continue;
    if (!best || item.window.start < *best) best = item.window.start;
  }
  return best;
}

std::optional<TimeMs> effective_onset(const IncidentContext& ctx,
                                      const EvidencePackage& ep,
                                      const std::string& entity) {
  auto it = ctx.summary.entity_onsets.find(entity);
  if (it != ctx.summary.entity_onsets.end()) return it->second;
  return claimed_onset(ep, entity);
}

double path_score(const PropagationPath& p, const EvidencePackage& ep,
                  const IncidentContext& ctx) {
  std::set<std::string> support;
  for (const auto& [_, ids] : p.link_support)
    for (const auto& id : ids)
      if (ep.find_item(id)) support.insert(id);
  if (p.steps.size() == 1) {
    // A one-step chain has no links; its support is whatever directly
    // implicates the lone entity.
    const std::string& e = p.steps.front().entity;
    for (const auto& item : ep.items) {
      if (item.anomaly_score < 0.3) continue;
      bool mine = item.target == e;
      if (auto edge = parse_edge_target(item.target))
        mine = edge->first == e || edge->second == e;
      if (mine) support.insert(item.id);
    }
  }
  if (!p.steps.empty()) {
    // The first mover carries the fault's native signature, not just the
    // propagated latency its victims show; its own evidence counts too.
    const std::string& head = p.steps.front().entity;
    for (const auto& item : ep.items)
      if (item.anomaly_score >= 0.3 && item.target == head)
        support.insert(item.id);
  }

  double earliness = 0.0;
  if (!p.steps.empty() && ctx.summary.sink_onset) {
    std::optional<TimeMs> root_onset = p.steps.front().onset;
    if (!root_onset)
      root_onset = effective_onset(ctx, ep, p.steps.front().entity);
    if (root_onset) {
      earliness = static_cast<double>(*ctx.summary.sink_onset - *root_onset) /
                  60000.0;
      earliness = std::clamp(earliness, 0.0, 10.0);
    }
  }
  // An onset bucket earlier outweighs the support a chain can pick up by
  // stitching sibling victims together, yet leaves support visible in the
  // score ratios so tied-onset candidates still separate.
  constexpr double kEarlinessWeight = 100.0;
  return static_cast<double>(support.size()) +
         0.75 * static_cast<double>(p.steps.empty() ? 0 : p.steps.size() - 1) +
         kEarlinessWeight * earliness;
}

int backed_support_count(const IncidentContext& ctx, const RcaTrace& t,
                         const RankedCandidate& c) {
  std::set<std::string> ids;
  for (const auto& pid : c.derived_from) {
    for (const auto& p : t.as_.paths) {
      if (p.id != pid) continue;
      for (const auto& [_, support] : p.link_support)
        for (const auto& id : support) ids.insert(id);
    }
  }
  int n = 0;
  for (const auto& id : ids) {
    const EvidenceItem* item = t.ep.find_item(id);
    if (item && item_backed(ctx, *item)) ++n;
  }
  return n;
}

std::vector<std::string> link_support_ids(const EvidencePackage& ep,
                                          const std::string& a,
                                          const std::string& b) {
  std::set<std::string> ids;
  for (const auto& item : ep.items) {
    if (item.anomaly_score < 0.3) continue;
    bool touches = item.target == a || item.target == b;
    if (!touches) {
      if (auto edge = parse_edge_target(item.target))
        touches = edge->first == a || edge->second == a || edge->first == b ||
                  edge->second == b;
    }
    if (touches) ids.insert(item.id);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace star
