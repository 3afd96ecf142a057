#pragma once

#include <map>
#include <string>
#include <vector>

// Scoring primitives for evaluation reports: top-k accuracy over ranked
// root-cause predictions, micro/macro classification quality over fault
// classes, and the repair-iteration histogram. Everything here is a pure
// fold over per-case records, so reports stay recomputable offline.

namespace star {

// One scored prediction, reduced to exactly what the metrics read.
struct ScoredCase {
  std::vector<std::string> ranked_entities;  // best first; may be empty
  std::string true_entity;
  std::string predicted_class;  // fault class of the top candidate
  std::string true_class;       // fault class the simulator injected
};

// Fraction of cases whose true entity appears among the first k ranked
// entries. Throws std::invalid_argument when cases is empty or k < 1.
double acc_at_k(const std::vector<ScoredCase>& cases, int k);

struct ClassificationMetrics {
  double micro_precision = 0.0;
  double macro_precision = 0.0;
  double micro_recall = 0.0;
  double macro_recall = 0.0;
  double micro_f1 = 0.0;  // harmonic mean of micro precision and micro recall
  double macro_f1 = 0.0;  // unweighted mean of per-class F1
};

// Per-class TP/FP/FN over the union of true and predicted labels. Macro
// metrics are unweighted class means; micro metrics pool the counts. Any
// zero denominator scores 0.
ClassificationMetrics classification_metrics(
    const std::vector<ScoredCase>& cases);

// How a repaired case ended: fixed after `rounds` iterations, or never
// lifted over the bar within budget.
struct RepairRounds {
  bool resolved = false;
  int rounds = 0;  // meaningful when resolved; clamped into [1, budget]
};

// Proportions over the keys {"1", ..., "<budget>", "unresolved"}; always
// sums to 1. An empty input puts all mass on "unresolved" so the sum
// invariant holds unconditionally. Throws std::invalid_argument for
// budget < 1.
std::map<std::string, double> iteration_histogram(
    const std::vector<RepairRounds>& cases, int budget);

}  // namespace star
