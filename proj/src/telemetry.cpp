#include "star/telemetry.hpp"

#include <algorithm>
#include <cmath>

namespace star {

std::optional<BaselineStats> TelemetryStore::baseline(
    const std::string& key, const std::string& metric) const {
  auto it = baseline_stats.find(key);
  if (it == baseline_stats.end()) return std::nullopt;
  auto jt = it->second.find(metric);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

double TelemetryStore::zscore(const std::string& key, const std::string& metric,
                              double value) const {
  auto b = baseline(key, metric);
  if (!b || b->stddev <= 0.0) return 0.0;
  return (value - b->mean) / b->stddev;
}

void TelemetryStore::erase_entity(const std::string& entity) {
  metrics.erase(entity);
  baseline_stats.erase(entity);
  // Edge baselines referencing the entity as an endpoint go too.
  for (auto it = baseline_stats.begin(); it != baseline_stats.end();) {
    auto edge = parse_edge_target(it->first);
    if (edge && (edge->first == entity || edge->second == entity))
      it = baseline_stats.erase(it);
    else
      ++it;
  }
  std::erase_if(logs, [&](const LogLine& l) { return l.entity == entity; });
  std::erase_if(spans, [&](const Span& s) {
    return s.caller == entity || s.callee == entity;
  });
}

TelemetrySlice query_telemetry(const TelemetryStore& store, Modality modality,
                               const std::vector<std::string>& targets,
                               const TimeWindow& window) {
  TelemetrySlice out;
  auto wants = [&](const std::string& id) {
    return std::find(targets.begin(), targets.end(), id) != targets.end();
  };
  switch (modality) {
    case Modality::Metric: {
      for (const auto& t : targets) {
        auto it = store.metrics.find(t);
        if (it == store.metrics.end()) continue;
        for (const auto& [name, pts] : it->second) {
          std::vector<MetricPoint> sel;
          for (const auto& p : pts)
            if (window.contains(p.ts)) sel.push_back(p);
          if (!sel.empty()) out.metrics[t][name] = std::move(sel);
        }
      }
      break;
    }
    case Modality::Log: {
      for (const auto& l : store.logs) {
        if (!window.contains(l.ts)) continue;
        if (wants(l.entity)) out.logs.push_back(l);
      }
      break;
    }
    case Modality::Trace: {
      for (const auto& s : store.spans) {
        if (!window.contains(s.start)) continue;
        bool hit = false;
        for (const auto& t : targets) {
          if (auto edge = parse_edge_target(t)) {
            if (s.caller == edge->first && s.callee == edge->second) hit = true;
          } else if (s.caller == t || s.callee == t) {
            hit = true;
          }
          if (hit) break;
        }
        if (hit) out.spans.push_back(s);
      }
      break;
    }
  }
  return out;
}

std::optional<TimeMs> entity_onset(const TelemetryStore& store,
                                   const std::string& entity) {
  auto it = store.metrics.find(entity);
  if (it == store.metrics.end()) return std::nullopt;
  std::optional<TimeMs> best;
  for (const auto& [name, pts] : it->second) {
    for (const auto& p : pts) {
      if (std::abs(store.zscore(entity, name, p.value)) >= kOnsetZ) {
        if (!best || p.ts < *best) best = p.ts;
        break;  // points are ts-ascending; first breach is enough
      }
    }
  }
  return best;
}

StoreSummary summarize_store(const TelemetryStore& store) {
  StoreSummary s;
  for (const auto& [entity, _] : store.metrics) {
    auto o = entity_onset(store, entity);
    if (o) s.entity_onsets[entity] = *o;
  }
  for (const auto& [entity, onset] : s.entity_onsets) {
    if (!s.earliest_onset || onset < *s.earliest_onset ||
        (onset == *s.earliest_onset && entity < *s.earliest_entity)) {
      s.earliest_onset = onset;
      s.earliest_entity = entity;
    }
    if (!s.sink_onset || onset > *s.sink_onset ||
        (onset == *s.sink_onset && entity < *s.sink_entity)) {
      s.sink_onset = onset;
      s.sink_entity = entity;
    }
  }
  return s;
}

}  // namespace star
