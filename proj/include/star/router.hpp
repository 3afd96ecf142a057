#pragma once

#include <optional>
#include <string>

#include "star/audit.hpp"

// Triage: every audited trace lands in exactly one of three lanes.
//   S >= tau            -> pass (ship the decision unchanged)
//   tau - eps <= S < tau -> fast repair (one targeted patch, verify, commit)
//   S < tau - eps        -> slow repair (stage localization + counterfactuals)

namespace star {

enum class Route { Pass, FastRepair, SlowRepair };

std::string to_string(Route r);

struct RouterConfig {
  double tau = 0.96;
  double epsilon = 0.12;
  // Throws std::invalid_argument unless 0 < tau - epsilon < tau <= 1.
  void validate() const;
};

struct RoutingDecision {
  Route route = Route::Pass;
  double S = 1.0;
  // Set only for the fast lane: the stage a single patch should target.
  std::optional<StageIndex> blamed_stage_hint;
};

// Pure threshold split; total over all finite S.
Route route_score(double S, const RouterConfig& cfg);

// Stage with the worst severity; ties broken by the number of checks at that
// severity, then toward the earlier stage.
StageIndex severity_hint(const AuditReport& report);

RoutingDecision route_trace(const AuditReport& report,
                            const RouterConfig& cfg);

}  // namespace star
