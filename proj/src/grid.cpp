#include "isurv/grid.hpp"

#include "isurv/error.hpp"

#include <algorithm>
#include <random>

namespace isurv {

TimeGrid build_grid(const Eigen::VectorXd& times, const Eigen::VectorXi& events) {
  if (times.size() == 0) throw SizeError("cannot build a time grid from no observations");
  if (events.size() != times.size()) throw ShapeError("times and events differ in length");
  std::vector<double> positive;
  for (Index i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw DomainError("negative observed time");
    if (times[i] > 0.0) positive.push_back(times[i]);
  }
  if (positive.empty()) throw SizeError("time grid needs at least one positive time");
  std::sort(positive.begin(), positive.end());
  positive.erase(std::unique(positive.begin(), positive.end()), positive.end());

  TimeGrid grid;
  grid.boundaries = Eigen::Map<const Eigen::VectorXd>(positive.data(), static_cast<Index>(positive.size()));
  return grid;
}

Index interval_index(const TimeGrid& grid, double time) {
  if (time < 0.0) throw DomainError("negative time has no interval");
  const double* first = grid.boundaries.data();
  const double* last = first + grid.boundaries.size();
  return static_cast<Index>(std::lower_bound(first, last, time) - first);
}

std::vector<ImpreciseLabel> make_labels(const TimeGrid& grid, const Eigen::VectorXd& times,
                                        const Eigen::VectorXi& events) {
  if (events.size() != times.size()) throw ShapeError("times and events differ in length");
  std::vector<ImpreciseLabel> labels(static_cast<std::size_t>(times.size()));
  for (Index i = 0; i < times.size(); ++i)
    labels[static_cast<std::size_t>(i)] = {interval_index(grid, times[i]), events[i] == 0};
  return labels;
}

LabelBounds label_bounds(const ImpreciseLabel& label, Index T) {
  if (label.interval < 0 || label.interval >= T) throw DomainError("label interval outside the grid");
  if (!label.representable(T))
    throw DomainError("censored label in the last interval has no admissible distribution");
  LabelBounds b{Eigen::VectorXd::Zero(T), Eigen::VectorXd::Zero(T)};
  if (label.censored) {
    b.upper.segment(label.support_begin(), T - label.support_begin()).setOnes();
  } else {
    b.lower[label.interval] = 1.0;
    b.upper[label.interval] = 1.0;
  }
  return b;
}

Eigen::MatrixXd sample_credal(const ImpreciseLabel& label, Index T, Index M, Rng& rng) {
  if (M < 1) throw DomainError("need at least one generation");
  if (!label.representable(T))
    throw DomainError("censored label in the last interval has no admissible distribution");
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(M, T);
  if (!label.censored) {
    S.col(label.interval).setOnes();
    return S;
  }
  // Normalized unit exponentials are uniform on the simplex.
  std::exponential_distribution<double> expo(1.0);
  const Index begin = label.support_begin();
  for (Index m = 0; m < M; ++m) {
    double total = 0.0;
    for (Index j = begin; j < T; ++j) total += S(m, j) = expo(rng);
    S.row(m).segment(begin, T - begin) /= total;
  }
  return S;
}

}  // namespace isurv
