#pragma once

#include "isurv/data.hpp"

#include <Eigen/Dense>

#include <vector>

namespace isurv {

/// Partition of [0, ∞) by strictly increasing positive boundaries
/// t_1 < ... < t_{T-1}. Interval j (zero-based) is (t_{j}, t_{j+1}] with
/// t_0 = 0; the last interval is (t_{T-1}, ∞).
struct TimeGrid {
  Eigen::VectorXd boundaries;

  Index intervals() const { return boundaries.size() + 1; }
  /// Left end of interval j (0 for the first).
  double lower(Index j) const { return j == 0 ? 0.0 : boundaries[j - 1]; }
};

/// Boundaries are the sorted distinct positive observed times.
TimeGrid build_grid(const Eigen::VectorXd& times, const Eigen::VectorXi& events);

/// Smallest zero-based j with time ≤ boundary j; the last interval past the
/// final boundary.
Index interval_index(const TimeGrid& grid, double time);

/// Interval index plus censoring flag. An uncensored label pins all mass on
/// `interval`; a censored one admits any distribution over later intervals.
struct ImpreciseLabel {
  Index interval = 0;
  bool censored = false;

  /// First admissible interval (inclusive).
  Index support_begin() const { return censored ? interval + 1 : interval; }
  /// One past the last admissible interval.
  Index support_end(Index T) const { return censored ? T : interval + 1; }
  bool representable(Index T) const { return support_begin() < support_end(T); }
};

std::vector<ImpreciseLabel> make_labels(const TimeGrid& grid, const Eigen::VectorXd& times,
                                        const Eigen::VectorXi& events);

struct LabelBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

LabelBounds label_bounds(const ImpreciseLabel& label, Index T);

/// M rows drawn from the label's credal set: copies of the degenerate vector
/// when uncensored, flat-Dirichlet draws over the trailing intervals otherwise.
Eigen::MatrixXd sample_credal(const ImpreciseLabel& label, Index T, Index M, Rng& rng);

}  // namespace isurv
