#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "star/analysis.hpp"
#include "star/model.hpp"
#include "star/telemetry.hpp"

// Stage executors: the agents that produce trace artifacts. run_stage builds
// one stage from the upstream artifacts already present in the trace, which
// is exactly the contract replay relies on — patch stage s, re-run only the
// stages after s.

namespace star {

class StageExecutor {
 public:
  virtual ~StageExecutor() = default;
  virtual std::string executor_id() const = 0;
  // Produces the artifact for stage `s`. `upstream` carries valid artifacts
  // for every stage before `s`; later stages are ignored. Must be
  // deterministic in (upstream, ctx, seed).
  virtual StageArtifact run_stage(StageIndex s, const RcaTrace& upstream,
                                  const IncidentContext& ctx,
                                  std::uint64_t seed) = 0;
};

// Deterministic template-driven executor. The strong preset does the whole
// job properly: alert-anchored window, neighbor-expanded scope, per-entity
// signature hypotheses, onset-ordered propagation paths with per-link
// support, score-calibrated ranking. The weak preset is a lazy diagnoser —
// sink-only scope, single candidate — useful as a contrast agent.
class RuleBasedExecutor : public StageExecutor {
 public:
  enum class Strength { Strong, Weak };

  explicit RuleBasedExecutor(Strength strength = Strength::Strong)
      : strength_(strength) {}

  std::string executor_id() const override;
  StageArtifact run_stage(StageIndex s, const RcaTrace& upstream,
                          const IncidentContext& ctx,
                          std::uint64_t seed) override;

  // Stage bodies, exposed for targeted tests.
  EvidencePackage build_evidence(const IncidentContext& ctx) const;
  HypothesisSet build_hypotheses(const EvidencePackage& ep,
                                 const IncidentContext& ctx) const;
  AnalysisStructure build_analysis(const EvidencePackage& ep,
                                   const HypothesisSet& hs,
                                   const IncidentContext& ctx) const;
  DecisionReport build_decision(const EvidencePackage& ep,
                                const HypothesisSet& hs,
                                const AnalysisStructure& as,
                                const IncidentContext& ctx) const;

 private:
  Strength strength_;
};

// Wraps another executor and counts run_stage invocations per stage; the
// replay-scope tests assert on these counters.
class CountingExecutor : public StageExecutor {
 public:
  explicit CountingExecutor(StageExecutor& inner) : inner_(inner) {}

  std::string executor_id() const override { return inner_.executor_id(); }
  StageArtifact run_stage(StageIndex s, const RcaTrace& upstream,
                          const IncidentContext& ctx,
                          std::uint64_t seed) override {
    ++counts_[stage_number(s) - 1];
    return inner_.run_stage(s, upstream, ctx, seed);
  }

  int count(StageIndex s) const { return counts_[stage_number(s) - 1]; }
  int total() const { return counts_[0] + counts_[1] + counts_[2] + counts_[3]; }
  void reset() { counts_ = {0, 0, 0, 0}; }

 private:
  StageExecutor& inner_;
  std::array<int, 4> counts_ = {0, 0, 0, 0};
};

// Runs all four stages in order on a fresh trace.
RcaTrace run_pipeline(StageExecutor& exec, const IncidentContext& ctx,
                      std::uint64_t seed);

// The incident window the executor anchors on: [alert - 10min, alert + 5min]
// clamped to the store horizon, where the alert fires at the earliest onset.
TimeWindow alert_window(const IncidentContext& ctx);

}  // namespace star
