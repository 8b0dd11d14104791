#pragma once

#include "isurv/curve.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace isurv {

struct ConcordanceResult {
  double value = 0.0;
  Index admissible = 0;       // pairs with δᵢ = 1 and Tᵢ < Tⱼ
  Index tied_predictions = 0; // admissible pairs scored 0.5
};

/// Harrell's C over admissible pairs; larger predicted time means longer
/// survival. Tied predictions score 0.5.
ConcordanceResult concordance(const Eigen::VectorXd& predicted, const Eigen::VectorXd& times,
                              const Eigen::VectorXi& events);
double c_index(const Eigen::VectorXd& predicted, const Eigen::VectorXd& times, const Eigen::VectorXi& events);

/// Kaplan-Meier estimate of the censoring distribution (flipped indicators).
SurvivalCurve censoring_km(const Eigen::VectorXd& times, const Eigen::VectorXi& events);

/// IPCW Brier score at time t. `predicted[i]` is Ŝ(t | xᵢ). Events before t
/// are weighted by 1/G(Tᵢ−), survivors by 1/G(t), and subjects censored
/// before t contribute zero. Subjects whose weight would divide by zero are
/// dropped from the average with a warning.
double brier_score(double t, const Eigen::VectorXd& predicted, const Eigen::VectorXd& times,
                   const Eigen::VectorXi& events, const SurvivalCurve& censor_km);

struct BrierCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
  double integrated = 0.0;
};

/// Trapezoidal mean of the Brier score over `eval_times`, normalised by their
/// span; a single time returns that point's score.
BrierCurve integrated_brier(std::span<const SurvivalCurve> curves, const Eigen::VectorXd& times,
                            const Eigen::VectorXi& events, const Eigen::VectorXd& eval_times);

/// Candidate times not beyond `horizon` (default: the largest test time).
Eigen::VectorXd evaluation_times(const Eigen::VectorXd& candidates, const Eigen::VectorXd& test_times,
                                 std::optional<double> horizon = std::nullopt);

/// sup_t |a(t) − b(t)| over the union of both curves' step points.
double ks_distance(const SurvivalCurve& a, const SurvivalCurve& b);

/// Pointwise mean of curves sharing one time grid.
SurvivalCurve unconditional_sf(std::span<const SurvivalCurve> curves);

struct EvaluationReport {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  double c_index = 0.0;
  Index admissible_pairs = 0;
  Index tied_pairs = 0;
  double ibs = 0.0;
  Eigen::VectorXd brier_times;
  Eigen::VectorXd brier_values;
  std::string config_hash;

  nlohmann::ordered_json to_json() const;
};

/// Full evaluation of one set of predicted curves against a test sample.
EvaluationReport evaluate_curves(std::span<const SurvivalCurve> curves, const Eigen::VectorXd& predicted_times,
                                 const Eigen::VectorXd& times, const Eigen::VectorXi& events,
                                 const Eigen::VectorXd& eval_times);

}  // namespace isurv
