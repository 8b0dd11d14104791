#pragma once

#include "isurv/attention.hpp"
#include "isurv/grid.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace isurv {

/// Lower bound applied to every logarithm argument.
inline constexpr double kLogFloor = 1e-12;

/// Intervals whose mass enters an instance's likelihood, as [begin, end).
/// Uncensored: the 2k+1 intervals centred on the event interval, clipped to
/// the grid. Censored: every interval after the censoring interval.
struct LossRegion {
  Index begin = 0;
  Index end = 0;
};

LossRegion loss_region(const ImpreciseLabel& label, Index T, Index window);

/// −log of the probability mass `p` puts on the label's loss region.
double instance_loss(const Eigen::Ref<const Eigen::RowVectorXd>& p, const ImpreciseLabel& label, Index window);

/// P = W·S: each row a convex combination of the rows of S.
Eigen::MatrixXd mix_probabilities(const Eigen::MatrixXd& W, const Eigen::MatrixXd& S);

/// Σ_i instance_loss(P.row(i), labels[i]).
double summed_instance_loss(const Eigen::MatrixXd& P, std::span<const ImpreciseLabel> labels, Index window);

/// Sum over generations and instances; `per_generation[m]` is the N × T
/// mixed distribution matrix of generation m.
double loss_isurvm(std::span<const Eigen::MatrixXd> per_generation, std::span<const ImpreciseLabel> labels,
                   Index window);

/// Number of worst generations kept: ⌈r·M⌉, at least one.
Index quantile_count(Index generations, double fraction);

/// Indices of the ⌈r·M⌉ largest totals (ties broken by lower index).
std::vector<Index> worst_generations(std::span<const double> totals, double fraction);

/// Sum of the ⌈r·M⌉ largest per-generation totals.
double loss_isurvq(std::span<const double> totals, double fraction);

/// Shannon entropy −Σ π log π with floored logarithms.
double entropy(const Eigen::Ref<const Eigen::RowVectorXd>& pi);

/// Σ_i [instance_loss(P.row(i)) + γ·entropy(π̃_i)].
double loss_isurvj(const Eigen::MatrixXd& P, std::span<const ImpreciseLabel> labels, const Eigen::MatrixXd& pi,
                   double gamma, Index window);

// ---------------------------------------------------------------------------
// Fused forms used by training. They never materialise W·S: the loss only
// depends on region sums, which prefix sums of S give in O(1) per key.

struct MixtureLoss {
  double value = 0.0;
  Eigen::MatrixXd d_weights;       // B × N
  Eigen::MatrixXd d_distributions; // N × T, only when requested
};

/// Σ_r instance_loss((W·S).row(r), labels[rows[r]]) and its gradients.
MixtureLoss mixture_loss(const Eigen::MatrixXd& W, std::span<const Index> rows, const Eigen::MatrixXd& S,
                         std::span<const ImpreciseLabel> labels, Index window, bool want_distribution_grad);

/// Each instance's admissible intervals stored back to back, so per-instance
/// distributions and logits cost O(support) instead of O(T).
class SupportLayout {
 public:
  SupportLayout() = default;
  SupportLayout(std::span<const ImpreciseLabel> labels, Index T);

  Index instances() const { return static_cast<Index>(begin_.size()); }
  Index intervals() const { return intervals_; }
  Index packed_size() const { return offset_.empty() ? 0 : offset_.back(); }
  Index begin(Index i) const { return begin_[static_cast<std::size_t>(i)]; }
  Index length(Index i) const { return offset(i + 1) - offset(i); }
  Index offset(Index i) const { return offset_[static_cast<std::size_t>(i)]; }

  /// N × T matrix with zeros off the supports.
  Eigen::MatrixXd expand(const Eigen::VectorXd& packed) const;
  /// Support entries of an N × T matrix.
  Eigen::VectorXd pack(const Eigen::MatrixXd& dense) const;

 private:
  Index intervals_ = 0;
  std::vector<Index> begin_;
  std::vector<Index> offset_;  // N + 1 entries
};

struct PackedMixtureLoss {
  double value = 0.0;
  Eigen::MatrixXd d_weights;     // B × N
  Eigen::VectorXd d_distributions;  // packed, only when requested
};

/// `mixture_loss` for distributions supported on their labels' supports.
PackedMixtureLoss packed_mixture_loss(const Eigen::MatrixXd& W, std::span<const Index> rows,
                                      const SupportLayout& layout, const Eigen::VectorXd& S,
                                      std::span<const ImpreciseLabel> labels, Index window,
                                      bool want_distribution_grad);

/// Row softmax of `logits` restricted to each label's admissible support;
/// zeros elsewhere.
Eigen::MatrixXd support_softmax(const Eigen::MatrixXd& logits, std::span<const ImpreciseLabel> labels);

/// Softmax of each packed segment.
Eigen::VectorXd packed_softmax(const Eigen::VectorXd& logits, const SupportLayout& layout);
Eigen::VectorXd packed_softmax_backward(const Eigen::VectorXd& pi, const Eigen::VectorXd& d_pi,
                                        const SupportLayout& layout);

/// Packed logits reproducing `pi` on the supports (floored logarithms).
Eigen::VectorXd logits_from_distributions(const Eigen::MatrixXd& pi, const SupportLayout& layout);

// ---------------------------------------------------------------------------
// Per-step training objectives.

enum class Variant { M, Q, J, JG };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
inline bool is_joint(Variant v) { return v == Variant::J || v == Variant::JG; }

struct TrainableState {
  AttentionState attention;
  Eigen::VectorXd logits;  // packed by SupportLayout, joint variants only
};

TrainableState zeros_like(const TrainableState& s);

struct ObjectiveSettings {
  Variant variant = Variant::J;
  double gamma = 0.1;
  double quantile = 0.5;
  Index window = 5;
};

struct StepInputs {
  std::span<const Index> rows;            // query rows in this step
  const MaskMatrix* mask = nullptr;
  const SupportLayout* layout = nullptr;  // of the training labels
  Eigen::MatrixXd dropout;                // N × d scale, empty for none
  std::vector<Eigen::VectorXd> samples;   // M/Q: one packed distribution set per generation
};

/// Loss of one step; accumulates gradients into `grad` when non-null.
double step_objective(const TrainableState& state, const Eigen::MatrixXd& X, std::span<const ImpreciseLabel> labels,
                      const ObjectiveSettings& settings, const StepInputs& inputs, TrainableState* grad);

/// Fine-tuning: attention weights `W` (N × N) fixed, packed logits free.
double fine_tune_objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& logits,
                           std::span<const ImpreciseLabel> labels, const SupportLayout& layout, double gamma,
                           Index window, Eigen::VectorXd* d_logits);

}  // namespace isurv
