#include "isurv/curve.hpp"

#include <algorithm>
#include <cmath>

namespace isurv {

namespace {

// Number of curve points with time ≤ t (strict < when `strict`).
Index points_before(const Eigen::VectorXd& times, double t, bool strict) {
  const double* first = times.data();
  const double* last = first + times.size();
  return static_cast<Index>((strict ? std::lower_bound(first, last, t) : std::upper_bound(first, last, t)) - first);
}

}  // namespace

double SurvivalCurve::at(double t) const {
  const Index k = points_before(times, t, false);
  return k == 0 ? 1.0 : values[k - 1];
}

double SurvivalCurve::left_limit(double t) const {
  const Index k = points_before(times, t, true);
  return k == 0 ? 1.0 : values[k - 1];
}

Eigen::VectorXd SurvivalCurve::at(const Eigen::VectorXd& ts) const {
  Eigen::VectorXd out(ts.size());
  for (Index i = 0; i < ts.size(); ++i) out[i] = at(ts[i]);
  return out;
}

Eigen::VectorXd SurvivalCurve::cumulative_hazard() const {
  return -values.array().max(1e-12).log();
}

bool SurvivalCurve::valid(double tol) const {
  if (times.size() != values.size() || times.size() == 0) return false;
  if (times[0] != 0.0) return false;
  for (Index i = 0; i < values.size(); ++i) {
    if (values[i] < -tol || values[i] > 1.0 + tol) return false;
    if (i > 0 && (values[i] > values[i - 1] + tol || times[i] <= times[i - 1])) return false;
  }
  return true;
}

double SurvivalCurve::expected_time() const {
  double value = 0.0;
  for (Index i = 1; i < times.size(); ++i) value += (values[i - 1] - values[i]) * 0.5 * (times[i - 1] + times[i]);
  return value + values[values.size() - 1] * times[times.size() - 1];
}

}  // namespace isurv
