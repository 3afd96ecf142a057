#pragma once

#include <cstdint>
#include <utility>

#include "star/model.hpp"
#include "star/telemetry.hpp"

// Synthetic microservice incident generator. Deterministic per seed: the
// same (seed, params) pair reproduces the topology and every telemetry
// record byte for byte.

namespace star {

struct SimParams {
  TimeMs t0 = 1700000000000;      // horizon start (epoch ms)
  int horizon_min = 30;           // total window length
  int resolution_s = 15;          // metric sampling period
  TimeMs prop_delay_ms = 30000;   // symptom delay per propagation hop
  double span_period_s = 5.0;     // mean span arrival period per edge
};

// Seeded service DAG with a single entry service, pod replicas round-robin
// over nodes. Throws std::invalid_argument on degenerate shapes
// (n_services < 2, replicas < 1, n_nodes < 1).
SystemTopology generate_topology(std::uint64_t seed, int n_services,
                                 int replicas_per_service, int n_nodes);

// Injects one service-level fault and synthesizes the full telemetry story:
// class-specific signature at the root, attenuated latency symptoms at the
// entities the fault propagates to (transitive callers; pods and owning
// services for pod/node roots), Poisson baseline logs, per-edge spans.
// Noise is Gaussian (sigma = 5% of each metric's baseline mean) clamped to
// +/-2.5 sigma, so pre-onset z-scores stay below the detection threshold by
// construction. Throws std::invalid_argument when the root entity is not in
// the topology, the fault class is unknown, or the onset lies outside the
// horizon.
std::pair<TelemetryStore, GroundTruth> inject_service_fault(
    const SystemTopology& topo, std::uint64_t seed, const FaultSpec& fault,
    const SimParams& params = {});

// Convenience: generate topology + inject + assemble an IncidentContext.
IncidentContext simulate_incident(std::uint64_t seed, int n_services,
                                  int replicas_per_service, int n_nodes,
                                  const FaultSpec& fault,
                                  const SimParams& params = {});

}  // namespace star
