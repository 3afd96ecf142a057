#include "star/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <set>

namespace star {

namespace {

// First ten services borrow familiar webshop roles so generated incidents
// read naturally; anything beyond that falls back to numbered names.
constexpr const char* kServiceNames[] = {
    "frontend", "cart",  "productcatalog", "currency",       "payment",
    "shipping", "email", "checkout",       "recommendation", "ad"};

std::string service_base_name(int index) {
  if (index < static_cast<int>(std::size(kServiceNames)))
    return kServiceNames[index];
  return "extra-" + std::to_string(index);
}

struct MetricSpec {
  const char* name;
  double mean;
};
// sigma is uniformly 5% of the baseline mean.
constexpr MetricSpec kServiceMetrics[] = {
    {"cpu", 30.0}, {"memory", 400.0}, {"latency", 120.0}, {"disk", 55.0}};
constexpr MetricSpec kNodeMetrics[] = {
    {"cpu", 30.0}, {"memory", 400.0}, {"disk", 55.0}};
constexpr double kSpanBaseMs = 50.0;

double sigma_of(double mean) { return mean * 0.05; }

// Gaussian noise clamped to +/-2.5 sigma: quiet series never breach the
// z>=3 detection threshold on their own.
double clamped_noise(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  double v = dist(rng);
  return std::clamp(v, -2.5 * sigma, 2.5 * sigma);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4b5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// How strongly the class signature shows at a given hop-scaled entity.
struct Affected {
  int hop = 0;
  double class_scale = 0.0;    // class-signature strength (root = 1.0)
  double latency_scale = 0.0;  // propagated latency bump strength
};

}  // namespace

SystemTopology generate_topology(std::uint64_t seed, int n_services,
                                 int replicas_per_service, int n_nodes) {
  if (n_services < 2)
    throw std::invalid_argument("topology needs at least 2 services");
  if (replicas_per_service < 1)
    throw std::invalid_argument("topology needs at least 1 replica per service");
  if (n_nodes < 1) throw std::invalid_argument("topology needs at least 1 node");

  std::mt19937_64 rng(mix_seed(seed, 1));

  SystemTopology topo;
  std::vector<std::string> by_index;
  for (int i = 0; i < n_services; ++i)
    by_index.push_back("svc:" + service_base_name(i));
  topo.services = by_index;
  std::sort(topo.services.begin(), topo.services.end());

  for (int i = 0; i < n_nodes; ++i)
    topo.nodes.push_back("node:n" + std::to_string(i));
  std::sort(topo.nodes.begin(), topo.nodes.end());

  // Every service after the entry gets one caller among the earlier
  // services, keeping the graph a connected DAG with a single entry.
  std::set<std::pair<std::string, std::string>> edges;
  for (int i = 1; i < n_services; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    edges.insert({by_index[pick(rng)], by_index[i]});
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int j = 0; j < n_services; ++j)
    for (int i = j + 1; i < n_services; ++i)
      if (coin(rng) < 0.25) edges.insert({by_index[j], by_index[i]});
  topo.call_edges.assign(edges.begin(), edges.end());

  int node_cursor = 0;
  for (int i = 0; i < n_services; ++i) {
    for (int r = 0; r < replicas_per_service; ++r) {
      std::string pod = "pod:" + service_base_name(i) + "-" + std::to_string(r);
      topo.pods.push_back(pod);
      topo.ownership[pod] = by_index[i];
      topo.placement[pod] = topo.nodes[node_cursor % n_nodes];
      ++node_cursor;
    }
  }
  std::sort(topo.pods.begin(), topo.pods.end());
  return topo;
}

std::pair<TelemetryStore, GroundTruth> inject_service_fault(
    const SystemTopology& topo, std::uint64_t seed, const FaultSpec& fault,
    const SimParams& params) {
  if (!is_fault_class(fault.fault_class))
    throw std::invalid_argument("unknown fault class: " + fault.fault_class);
  if (!topo.has_entity(fault.root_entity))
    throw std::invalid_argument("root entity not in topology: " +
                                fault.root_entity);
  TimeWindow horizon{params.t0,
                     params.t0 + static_cast<TimeMs>(params.horizon_min) * 60000};
  if (!horizon.contains(fault.onset))
    throw std::invalid_argument("fault onset outside the telemetry horizon");

  const double m = fault.magnitude;
  const TimeMs res_ms = static_cast<TimeMs>(params.resolution_s) * 1000;

  // --- figure out who the fault touches, and when
  std::map<std::string, Affected> affected;
  affected[fault.root_entity] = {0, 1.0, 1.0};

  auto bfs_callers = [&](const std::string& svc, int start_hop) {
    std::queue<std::pair<std::string, int>> q;
    q.push({svc, start_hop - 1});
    std::set<std::string> seen{svc};
    while (!q.empty()) {
      auto [cur, hop] = q.front();
      q.pop();
      for (const auto& caller : topo.callers_of(cur)) {
        if (!seen.insert(caller).second) continue;
        int h = hop + 1;
        affected[caller] = {h, 0.0, std::pow(0.75, h)};
        q.push({caller, h});
      }
    }
  };

  switch (entity_kind(fault.root_entity)) {
    case EntityKind::Service:
      bfs_callers(fault.root_entity, 1);
      break;
    case EntityKind::Pod: {
      auto svc = topo.service_of(fault.root_entity);
      if (svc) {
        affected[*svc] = {1, 0.7, 0.7};
        bfs_callers(*svc, 2);
      }
      break;
    }
    case EntityKind::Node: {
      std::set<std::string> svcs;
      for (const auto& pod : topo.pods_on(fault.root_entity)) {
        affected[pod] = {1, 0.8, 0.8};
        if (auto svc = topo.service_of(pod)) svcs.insert(*svc);
      }
      for (const auto& svc : svcs) {
        affected[svc] = {2, 0.6, 0.6};
      }
      for (const auto& svc : svcs) bfs_callers(svc, 3);
      break;
    }
    default:
      throw std::invalid_argument("root entity must be a service, pod or node");
  }

  GroundTruth gt;
  gt.root_entity = fault.root_entity;
  gt.fault_class = fault.fault_class;
  gt.onset = fault.onset;
  for (const auto& [entity, a] : affected)
    gt.propagation_order.emplace_back(
        entity, fault.onset + a.hop * params.prop_delay_ms);
  std::sort(gt.propagation_order.begin(), gt.propagation_order.end(),
            [](const auto& x, const auto& y) {
              if (x.second != y.second) return x.second < y.second;
              return x.first < y.first;
            });

  // --- metrics
  TelemetryStore store;
  store.horizon = horizon;

  auto entity_metrics = [&](const std::string& id) {
    return entity_kind(id) == EntityKind::Node
               ? std::vector<MetricSpec>(std::begin(kNodeMetrics),
                                         std::end(kNodeMetrics))
               : std::vector<MetricSpec>(std::begin(kServiceMetrics),
                                         std::end(kServiceMetrics));
  };

  std::vector<std::string> all_entities;
  all_entities.insert(all_entities.end(), topo.services.begin(),
                      topo.services.end());
  all_entities.insert(all_entities.end(), topo.pods.begin(), topo.pods.end());
  all_entities.insert(all_entities.end(), topo.nodes.begin(), topo.nodes.end());
  std::sort(all_entities.begin(), all_entities.end());

  const std::string& cls = fault.fault_class;

  for (const auto& entity : all_entities) {
    const Affected* a = nullptr;
    if (auto it = affected.find(entity); it != affected.end()) a = &it->second;
    TimeMs onset_e =
        a ? fault.onset + a->hop * params.prop_delay_ms : horizon.end;

    for (const auto& spec : entity_metrics(entity)) {
      const double sigma = sigma_of(spec.mean);
      store.baseline_stats[entity][spec.name] = {spec.mean, sigma};
      std::mt19937_64 rng(
          mix_seed(seed, hash_str(entity + "/" + spec.name)));
      std::vector<MetricPoint> pts;
      for (TimeMs ts = horizon.start; ts < horizon.end; ts += res_ms) {
        double v = spec.mean + clamped_noise(rng, sigma);
        if (a && ts >= onset_e) {
          const double steps = static_cast<double>((ts - onset_e) / res_ms);
          const std::string name = spec.name;
          // Class signature, scaled by how close this entity is to the root.
          if (a->class_scale > 0.0) {
            const double cs = a->class_scale * m;
            if (cls == "cpu_hog") {
              if (name == "cpu") v += 12.0 * sigma * cs;
              if (name == "latency") v += 10.0 * sigma * cs;
            } else if (cls == "memory_leak") {
              if (name == "memory") v += 4.0 * sigma * cs * steps;
              if (name == "latency")
                v += 6.0 * sigma * cs * std::min(1.0, steps / 20.0);
            } else if (cls == "network_delay") {
              if (name == "latency") v += 12.0 * sigma * cs;
              if (name == "cpu" && entity_kind(entity) == EntityKind::Node)
                v += 6.0 * sigma * cs;  // softirq pressure on the host
            } else if (cls == "packet_loss") {
              if (name == "latency") v += 5.0 * sigma * cs;
              if (name == "cpu" && entity_kind(entity) == EntityKind::Node)
                v += 6.0 * sigma * cs;
            } else if (cls == "disk_exhaustion") {
              if (name == "disk") v += 8.0 * sigma * cs * steps;
              if (name == "latency") v += 4.0 * sigma * cs;
            }
          }
          // Downstream symptom: callers see latency, nothing else.
          if (a->class_scale == 0.0 && name == "latency")
            v += 10.0 * sigma * a->latency_scale * m;
        }
        if (spec.name == "cpu" || spec.name == "disk")
          v = std::clamp(v, 0.0, 100.0);
        pts.push_back({ts, v});
      }
      store.metrics[entity][spec.name] = std::move(pts);
    }
  }

  // --- logs: baseline heartbeats plus class/propagation chatter
  auto emit_poisson = [&](const std::string& entity, double per_min,
                          TimeMs from, TimeMs to, const std::string& severity,
                          const std::string& tid, const std::string& text,
                          std::uint64_t salt) {
    if (per_min <= 0.0 || from >= to) return;
    std::mt19937_64 rng(mix_seed(seed, hash_str(entity + "#" + tid) + salt));
    std::exponential_distribution<double> gap(per_min / 60000.0);
    double t = static_cast<double>(from) + gap(rng);
    while (t < static_cast<double>(to)) {
      store.logs.push_back(
          {static_cast<TimeMs>(t), entity, severity, tid, text});
      t += gap(rng);
    }
  };

  for (const auto& entity : all_entities)
    emit_poisson(entity, 1.0, horizon.start, horizon.end, "info", "T_ok",
                 "heartbeat ok", 1);

  for (const auto& [entity, a] : affected) {
    TimeMs onset_e = fault.onset + a.hop * params.prop_delay_ms;
    if (a.class_scale > 0.0) {
      if (cls == "packet_loss")
        emit_poisson(entity, 4.0 * m * a.class_scale, onset_e, horizon.end,
                     "error", "T_pkt", "packet loss detected on interface", 2);
      if (cls == "disk_exhaustion")
        emit_poisson(entity, 3.0 * m * a.class_scale, onset_e + 2 * res_ms,
                     horizon.end, "error", "T_disk",
                     "write failed: no space left on device", 3);
    } else {
      emit_poisson(entity, 1.5 * m * a.latency_scale, onset_e, horizon.end,
                   "warn", "T_up", "upstream timeouts observed", 4);
    }
  }
  std::stable_sort(store.logs.begin(), store.logs.end(),
                   [](const LogLine& x, const LogLine& y) {
                     if (x.ts != y.ts) return x.ts < y.ts;
                     return x.entity < y.entity;
                   });

  // --- spans
  const double span_sigma = kSpanBaseMs * 0.05;
  std::uint64_t trace_counter = 0;
  for (const auto& [caller, callee] : topo.call_edges) {
    const std::string edge = make_edge_target(caller, callee);
    store.baseline_stats[edge][kSpanDurationMetric] = {kSpanBaseMs, span_sigma};
    std::mt19937_64 rng(mix_seed(seed, hash_str(edge) + 7));
    std::uniform_real_distribution<double> jitter(0.0, 2000.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    double t = static_cast<double>(horizon.start) + jitter(rng);
    while (t < static_cast<double>(horizon.end)) {
      Span s;
      s.trace_id = "tr-" + std::to_string(trace_counter++);
      s.caller = caller;
      s.callee = callee;
      s.start = static_cast<TimeMs>(t);
      s.duration_ms = kSpanBaseMs + clamped_noise(rng, span_sigma);
      s.status = "ok";
      // Calls into (or out of) a degraded service slow down; packet loss
      // additionally fails a share of them outright.
      const Affected* hit = nullptr;
      if (auto it = affected.find(callee); it != affected.end())
        hit = &it->second;
      else if (auto it2 = affected.find(caller);
               it2 != affected.end() && cls == "network_delay")
        hit = &it2->second;
      if (hit) {
        const std::string& edge_svc =
            affected.count(callee) ? callee : caller;
        TimeMs onset_e = fault.onset + hit->hop * params.prop_delay_ms;
        (void)edge_svc;
        if (s.start >= onset_e) {
          double strength =
              hit->class_scale > 0.0 ? hit->class_scale : hit->latency_scale;
          double factor = cls == "network_delay" ? 1.5 : 0.5;
          s.duration_ms *= 1.0 + factor * m * strength;
          if (cls == "packet_loss" &&
              coin(rng) < std::min(0.8, 0.4 * m * strength)) {
            s.status = "error";
            s.duration_ms *= 2.0;  // timeout before failing
          }
        }
      }
      s.duration_ms = std::max(0.1, s.duration_ms);
      store.spans.push_back(std::move(s));
      t += params.span_period_s * 1000.0 * (0.6 + 0.8 * coin(rng));
    }
  }
  std::stable_sort(store.spans.begin(), store.spans.end(),
                   [](const Span& x, const Span& y) {
                     if (x.start != y.start) return x.start < y.start;
                     return x.trace_id < y.trace_id;
                   });

  return {std::move(store), std::move(gt)};
}

IncidentContext simulate_incident(std::uint64_t seed, int n_services,
                                  int replicas_per_service, int n_nodes,
                                  const FaultSpec& fault,
                                  const SimParams& params) {
  SystemTopology topo =
      generate_topology(seed, n_services, replicas_per_service, n_nodes);
  auto [store, gt] = inject_service_fault(topo, seed, fault, params);
  std::string id = "inc-" + std::to_string(seed) + "-" + fault.fault_class +
                   "-" + fault.root_entity;
  return IncidentContext::make(std::move(id), std::move(topo),
                               std::move(store), std::move(gt));
}

}  // namespace star
