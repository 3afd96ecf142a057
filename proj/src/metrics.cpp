#include "star/metrics.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace star {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

double acc_at_k(const std::vector<ScoredCase>& cases, int k) {
  if (cases.empty())
    throw std::invalid_argument("acc_at_k over an empty case set");
  if (k < 1) throw std::invalid_argument("acc_at_k needs k >= 1");
  std::size_t hits = 0;
  for (const auto& c : cases) {
    std::size_t depth =
        std::min(c.ranked_entities.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i) {
      if (c.ranked_entities[i] == c.true_entity) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

ClassificationMetrics classification_metrics(
    const std::vector<ScoredCase>& cases) {
  std::set<std::string> labels;
  for (const auto& c : cases) {
    labels.insert(c.true_class);
    labels.insert(c.predicted_class);
  }

  double tp_pool = 0, fp_pool = 0, fn_pool = 0;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (const auto& label : labels) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& c : cases) {
      const bool predicted = c.predicted_class == label;
      const bool actual = c.true_class == label;
      if (predicted && actual) ++tp;
      if (predicted && !actual) ++fp;
      if (!predicted && actual) ++fn;
    }
    const double p = safe_div(tp, tp + fp);
    const double r = safe_div(tp, tp + fn);
    p_sum += p;
    r_sum += r;
    f_sum += safe_div(2 * p * r, p + r);
    tp_pool += tp;
    fp_pool += fp;
    fn_pool += fn;
  }

  ClassificationMetrics m;
  const double n_labels = static_cast<double>(labels.size());
  m.macro_precision = safe_div(p_sum, n_labels);
  m.macro_recall = safe_div(r_sum, n_labels);
  m.macro_f1 = safe_div(f_sum, n_labels);
  m.micro_precision = safe_div(tp_pool, tp_pool + fp_pool);
  m.micro_recall = safe_div(tp_pool, tp_pool + fn_pool);
  m.micro_f1 = safe_div(2 * m.micro_precision * m.micro_recall,
                        m.micro_precision + m.micro_recall);
  return m;
}

std::map<std::string, double> iteration_histogram(
    const std::vector<RepairRounds>& cases, int budget) {
  if (budget < 1)
    throw std::invalid_argument("iteration histogram needs budget >= 1");
  std::map<std::string, double> hist;
  for (int i = 1; i <= budget; ++i) hist[std::to_string(i)] = 0.0;
  hist["unresolved"] = 0.0;
  if (cases.empty()) {
    hist["unresolved"] = 1.0;
    return hist;
  }
  for (const auto& c : cases) {
    if (c.resolved)
      hist[std::to_string(std::clamp(c.rounds, 1, budget))] += 1.0;
    else
      hist["unresolved"] += 1.0;
  }
  for (auto& [key, mass] : hist) mass /= static_cast<double>(cases.size());
  return hist;
}

}  // namespace star
