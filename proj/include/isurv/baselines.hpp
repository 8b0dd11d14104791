#pragma once

#include "isurv/curve.hpp"
#include "isurv/data.hpp"

#include <Eigen/Dense>

namespace isurv {

/// Product-limit estimate with a point at time 0 and one at every distinct
/// observed time.
SurvivalCurve kaplan_meier(const Eigen::VectorXd& times, const Eigen::VectorXi& events);

/// Weighted product-limit estimate. Items are processed by ascending time,
/// events before censorings at equal times, then by index; each event
/// multiplies survival by 1 − w_i / (1 − Σ w of items already processed).
/// Uniform weights reproduce `kaplan_meier` exactly.
SurvivalCurve weighted_product_limit(const Eigen::VectorXd& times, const Eigen::VectorXi& events,
                                     const Eigen::Ref<const Eigen::VectorXd>& weights);

/// Normalised weights exp(−‖x₀ − xᵢ‖²/τ).
Eigen::VectorXd gaussian_weights(const Eigen::MatrixXd& X, const Eigen::Ref<const Eigen::RowVectorXd>& x0,
                                 double tau);

/// Beran's conditional Kaplan-Meier estimate at x₀.
SurvivalCurve beran(const SurvivalDataset& train, const Eigen::Ref<const Eigen::RowVectorXd>& x0, double tau);

}  // namespace isurv
