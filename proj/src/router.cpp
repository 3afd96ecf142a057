#include "star/router.hpp"

#include <stdexcept>

namespace star {

std::string to_string(Route r) {
  switch (r) {
    case Route::Pass: return "pass";
    case Route::FastRepair: return "fast_repair";
    case Route::SlowRepair: return "slow_repair";
  }
  return "pass";
}

void RouterConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("router.tau must be in (0, 1]");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("router.epsilon must be positive");
  if (!(tau - epsilon > 0.0))
    throw std::invalid_argument("router.tau - router.epsilon must stay "
                                "positive; the slow lane needs nonzero room");
}

Route route_score(double S, const RouterConfig& cfg) {
  if (S >= cfg.tau) return Route::Pass;
  if (S >= cfg.tau - cfg.epsilon) return Route::FastRepair;
  return Route::SlowRepair;
}

StageIndex severity_hint(const AuditReport& report) {
  StageIndex best = StageIndex::S1;
  Severity best_sev = Severity::Info;
  int best_count = -1;
  for (const auto& d : report.diagnostics) {
    int count = 0;
    for (const auto& c : d.checks)
      if (c.severity == d.stage_severity) ++count;
    // Earlier stages win ties because a flaw there invalidates everything
    // built on top of it; iteration order is S1..S4 so strict > keeps the
    // first stage seen at any given (severity, count).
    if (d.stage_severity > best_sev ||
        (d.stage_severity == best_sev && count > best_count)) {
      best = d.stage;
      best_sev = d.stage_severity;
      best_count = count;
    }
  }
  return best;
}

RoutingDecision route_trace(const AuditReport& report,
                            const RouterConfig& cfg) {
  cfg.validate();
  RoutingDecision d;
  d.S = report.S;
  d.route = route_score(report.S, cfg);
  if (d.route == Route::FastRepair) d.blamed_stage_hint = severity_hint(report);
  return d;
}

}  // namespace star
