#pragma once

#include <Eigen/Dense>

namespace isurv {

using Eigen::Index;

/// Right-continuous survival step function: S(t) = values[j] for
/// times[j] ≤ t < times[j+1]. The first point is time 0.
struct SurvivalCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  double at(double t) const;
  /// S(t−), the value just before t.
  double left_limit(double t) const;
  Eigen::VectorXd at(const Eigen::VectorXd& ts) const;
  /// H = −log S with S floored at 1e−12.
  Eigen::VectorXd cumulative_hazard() const;
  /// Non-increasing, inside [0,1], times strictly increasing from 0.
  bool valid(double tol = 1e-12) const;
  /// Mean of the step distribution with each drop placed at the midpoint of
  /// its step and the remaining mass at the last time.
  double expected_time() const;
};

struct IntervalCurve {
  SurvivalCurve lower;
  SurvivalCurve upper;
};

}  // namespace isurv
