#include "isurv/baselines.hpp"

#include "isurv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace isurv {

namespace {

void check_inputs(const Eigen::VectorXd& times, const Eigen::VectorXi& events) {
  if (times.size() == 0) throw SizeError("survival estimate needs at least one observation");
  if (events.size() != times.size()) throw ShapeError("times and events differ in length");
  for (Index i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw ValidationError("times must be finite and non-negative");
    if (events[i] != 0 && events[i] != 1) throw ValidationError("event indicators must be 0 or 1");
  }
}

// Collapses the running product into a step curve with one point per
// distinct time (plus the origin).
SurvivalCurve to_curve(const std::vector<double>& at_time, const std::vector<double>& value_after) {
  std::vector<double> ts{0.0}, vs{1.0};
  for (std::size_t i = 0; i < at_time.size(); ++i) {
    if (at_time[i] == ts.back()) vs.back() = value_after[i];
    else {
      ts.push_back(at_time[i]);
      vs.push_back(value_after[i]);
    }
  }
  SurvivalCurve c;
  c.times = Eigen::Map<const Eigen::VectorXd>(ts.data(), static_cast<Index>(ts.size()));
  c.values = Eigen::Map<const Eigen::VectorXd>(vs.data(), static_cast<Index>(vs.size()));
  return c;
}

}  // namespace

SurvivalCurve kaplan_meier(const Eigen::VectorXd& times, const Eigen::VectorXi& events) {
  check_inputs(times, events);
  std::vector<Index> order(static_cast<std::size_t>(times.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return times[a] < times[b]; });

  std::vector<double> ts, vs;
  double s = 1.0;
  Index at_risk = times.size();
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    Index deaths = 0, leaving = 0;
    for (; i < order.size() && times[order[i]] == t; ++i, ++leaving) deaths += events[order[i]];
    if (deaths > 0) s *= static_cast<double>(at_risk - deaths) / static_cast<double>(at_risk);
    at_risk -= leaving;
    ts.push_back(t);
    vs.push_back(s);
  }
  return to_curve(ts, vs);
}

SurvivalCurve weighted_product_limit(const Eigen::VectorXd& times, const Eigen::VectorXi& events,
                                     const Eigen::Ref<const Eigen::VectorXd>& weights) {
  check_inputs(times, events);
  if (weights.size() != times.size()) throw ShapeError("one weight per observation required");
  std::vector<Index> order(static_cast<std::size_t>(times.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (times[a] != times[b]) return times[a] < times[b];
    if (events[a] != events[b]) return events[a] > events[b];
    return a < b;
  });

  std::vector<double> ts, vs;
  double s = 1.0, used = 0.0;
  bool clamped = false;
  for (Index i : order) {
    if (events[i] == 1 && !clamped) {
      const double denom = 1.0 - used;
      if (denom <= 0.0) {
        warn("product-limit denominator vanished; survival clamped to zero");
        clamped = true;
        s = 0.0;
      } else {
        s *= std::max(0.0, 1.0 - weights[i] / denom);
      }
    }
    used += weights[i];
    ts.push_back(times[i]);
    vs.push_back(s);
  }
  return to_curve(ts, vs);
}

Eigen::VectorXd gaussian_weights(const Eigen::MatrixXd& X, const Eigen::Ref<const Eigen::RowVectorXd>& x0,
                                 double tau) {
  if (!(tau > 0.0)) throw DomainError("bandwidth tau must be positive");
  if (x0.size() != X.cols()) throw ShapeError("dimension mismatch between query and training features");
  Eigen::VectorXd d2 = (X.rowwise() - x0).rowwise().squaredNorm();
  const double shift = d2.minCoeff();
  Eigen::VectorXd w = (-(d2.array() - shift) / tau).exp();
  return w / w.sum();
}

SurvivalCurve beran(const SurvivalDataset& train, const Eigen::Ref<const Eigen::RowVectorXd>& x0, double tau) {
  return weighted_product_limit(train.times, train.events, gaussian_weights(train.features, x0, tau));
}

}  // namespace isurv
