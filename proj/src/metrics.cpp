#include "isurv/metrics.hpp"

#include "isurv/baselines.hpp"
#include "isurv/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace isurv {

ConcordanceResult concordance(const Eigen::VectorXd& predicted, const Eigen::VectorXd& times,
                              const Eigen::VectorXi& events) {
  const Index n = times.size();
  if (predicted.size() != n || events.size() != n) throw ShapeError("c-index inputs differ in length");
  ConcordanceResult r;
  double score = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (events[i] != 1) continue;
    for (Index j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      ++r.admissible;
      if (predicted[i] < predicted[j]) score += 1.0;
      else if (predicted[i] == predicted[j]) {
        score += 0.5;
        ++r.tied_predictions;
      }
    }
  }
  if (r.admissible == 0) throw DomainError("c-index undefined: no admissible pairs");
  r.value = score / static_cast<double>(r.admissible);
  return r;
}

double c_index(const Eigen::VectorXd& predicted, const Eigen::VectorXd& times, const Eigen::VectorXi& events) {
  return concordance(predicted, times, events).value;
}

SurvivalCurve censoring_km(const Eigen::VectorXd& times, const Eigen::VectorXi& events) {
  return kaplan_meier(times, (1 - events.array()).matrix());
}

double brier_score(double t, const Eigen::VectorXd& predicted, const Eigen::VectorXd& times,
                   const Eigen::VectorXi& events, const SurvivalCurve& censor_km) {
  const Index n = times.size();
  if (predicted.size() != n || events.size() != n) throw ShapeError("brier inputs differ in length");
  if (n == 0) throw SizeError("brier score needs at least one subject");
  const double g_t = censor_km.at(t);
  double total = 0.0;
  Index used = 0, excluded = 0;
  for (Index i = 0; i < n; ++i) {
    if (times[i] <= t && events[i] == 1) {
      const double g = censor_km.left_limit(times[i]);
      if (g <= 0.0) {
        ++excluded;
        continue;
      }
      total += predicted[i] * predicted[i] / g;
    } else if (times[i] > t) {
      if (g_t <= 0.0) {
        ++excluded;
        continue;
      }
      total += (1.0 - predicted[i]) * (1.0 - predicted[i]) / g_t;
    }
    ++used;
  }
  if (excluded > 0)
    warn("brier score at t=" + std::to_string(t) + ": " + std::to_string(excluded) +
         " subjects with zero censoring survival excluded");
  if (used == 0) throw DomainError("brier score undefined: every subject excluded");
  return total / static_cast<double>(used);
}

BrierCurve integrated_brier(std::span<const SurvivalCurve> curves, const Eigen::VectorXd& times,
                            const Eigen::VectorXi& events, const Eigen::VectorXd& eval_times) {
  if (static_cast<Index>(curves.size()) != times.size()) throw ShapeError("one curve per test subject required");
  if (eval_times.size() == 0) throw SizeError("no evaluation times");
  const SurvivalCurve g = censoring_km(times, events);
  BrierCurve out;
  out.times = eval_times;
  out.values.resize(eval_times.size());
  Eigen::VectorXd predicted(times.size());
  for (Index k = 0; k < eval_times.size(); ++k) {
    for (std::size_t i = 0; i < curves.size(); ++i) predicted[static_cast<Index>(i)] = curves[i].at(eval_times[k]);
    out.values[k] = brier_score(eval_times[k], predicted, times, events, g);
  }
  if (eval_times.size() == 1) {
    out.integrated = out.values[0];
    return out;
  }
  double area = 0.0;
  for (Index k = 1; k < eval_times.size(); ++k)
    area += 0.5 * (out.values[k] + out.values[k - 1]) * (eval_times[k] - eval_times[k - 1]);
  const double span = eval_times[eval_times.size() - 1] - eval_times[0];
  out.integrated = span > 0.0 ? area / span : out.values[0];
  return out;
}

Eigen::VectorXd evaluation_times(const Eigen::VectorXd& candidates, const Eigen::VectorXd& test_times,
                                 std::optional<double> horizon) {
  if (test_times.size() == 0) throw SizeError("no test times");
  const double limit = horizon.value_or(test_times.maxCoeff());
  std::vector<double> kept;
  for (Index i = 0; i < candidates.size(); ++i)
    if (candidates[i] > 0.0 && candidates[i] <= limit) kept.push_back(candidates[i]);
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  if (kept.empty()) throw SizeError("no evaluation times within the horizon");
  return Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Index>(kept.size()));
}

double ks_distance(const SurvivalCurve& a, const SurvivalCurve& b) {
  double best = 0.0;
  for (Index i = 0; i < a.times.size(); ++i) best = std::max(best, std::abs(a.values[i] - b.at(a.times[i])));
  for (Index i = 0; i < b.times.size(); ++i) best = std::max(best, std::abs(b.values[i] - a.at(b.times[i])));
  return best;
}

SurvivalCurve unconditional_sf(std::span<const SurvivalCurve> curves) {
  if (curves.empty()) throw SizeError("unconditional curve needs at least one curve");
  SurvivalCurve out;
  out.times = curves.front().times;
  out.values = Eigen::VectorXd::Zero(out.times.size());
  for (const auto& c : curves) {
    if (c.times.size() != out.times.size() || c.times != out.times)
      throw ShapeError("curves do not share a time grid");
    out.values += c.values;
  }
  out.values /= static_cast<double>(curves.size());
  return out;
}

nlohmann::ordered_json EvaluationReport::to_json() const {
  nlohmann::ordered_json brier = nlohmann::ordered_json::array();
  for (Index k = 0; k < brier_times.size(); ++k) brier.push_back({brier_times[k], brier_values[k]});
  return {{"model", model},
          {"dataset", dataset},
          {"seed", seed},
          {"config_hash", config_hash},
          {"c_index", c_index},
          {"admissible_pairs", admissible_pairs},
          {"tied_prediction_pairs", tied_pairs},
          {"ibs", ibs},
          {"brier", std::move(brier)}};
}

EvaluationReport evaluate_curves(std::span<const SurvivalCurve> curves, const Eigen::VectorXd& predicted_times,
                                 const Eigen::VectorXd& times, const Eigen::VectorXi& events,
                                 const Eigen::VectorXd& eval_times) {
  EvaluationReport r;
  const ConcordanceResult c = concordance(predicted_times, times, events);
  r.c_index = c.value;
  r.admissible_pairs = c.admissible;
  r.tied_pairs = c.tied_predictions;
  const BrierCurve b = integrated_brier(curves, times, events, eval_times);
  r.ibs = b.integrated;
  r.brier_times = b.times;
  r.brier_values = b.values;
  return r;
}

}  // namespace isurv
