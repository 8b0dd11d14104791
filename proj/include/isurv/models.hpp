#pragma once

#include "isurv/attention.hpp"
#include "isurv/curve.hpp"
#include "isurv/data.hpp"
#include "isurv/grid.hpp"
#include "isurv/objective.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace isurv {

struct ModelConfig {
  Variant variant = Variant::J;
  Index epochs = 300;
  double learning_rate = 1e-2;
  double gamma = 0.1;          // entropy coefficient
  double quantile = 0.5;       // r, iSurvQ
  Index generations = 20;      // M, iSurvM/Q
  Index window = 5;            // k
  double mask_rate = 0.5;      // p_mask
  Index embed_dims = 64;       // d
  double dropout = 0.5;
  double batch_rate = 0.2;
  double weight_decay = 2e-3;
  double initial_tau = 1.0;    // iSurvJ(G)
  Index fine_tune_epochs = 100;
  double fine_tune_learning_rate = 5e-2;
  std::uint64_t seed = 0;

  void validate() const;
  ObjectiveSettings objective() const { return {variant, gamma, quantile, window}; }
};

struct TrainedModel {
  ModelConfig config;
  TimeGrid grid;
  AttentionState attention;
  Eigen::MatrixXd keys;                // training features, N × d₀
  std::vector<ImpreciseLabel> labels;  // one per key
  Eigen::MatrixXd distributions;       // π̂, N × T
  std::vector<double> loss_history;    // summed step losses per epoch
  std::vector<double> fine_tune_history;
  Index dropped = 0;                   // unrepresentable training rows

  Index intervals() const { return grid.intervals(); }
  Index feature_dims() const { return keys.cols(); }
};

/// Adam with decoupled weight decay (decay applies to tensors flagged so).
class AdamW {
 public:
  AdamW(double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(TrainableState& params, TrainableState& grads);
  void step(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::Ref<const Eigen::MatrixXd>& grads);

 private:
  struct Slot {
    Eigen::MatrixXd m, v;
  };
  void update(Slot& slot, Eigen::Ref<Eigen::MatrixXd> param, const Eigen::Ref<const Eigen::MatrixXd>& grad,
              bool decays);

  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Slot> slots_;
};

TrainedModel train(const SurvivalDataset& data, const ModelConfig& config);
TrainedModel train(const SurvivalDataset& data, const TimeGrid& grid, std::span<const ImpreciseLabel> labels,
                   const ModelConfig& config);

/// Optimises per-instance distributions from `initial` with the attention
/// frozen; keeps the best iterate, so the final loss never exceeds the
/// initial one.
void fine_tune(TrainedModel& model, const Eigen::MatrixXd& initial);

/// Mask-and-dropout-free N × N weights the fine-tuning stage uses.
Eigen::MatrixXd fine_tune_weights(const TrainedModel& model);

Eigen::MatrixXd predict_distributions(const TrainedModel& model, const Eigen::MatrixXd& X);
Eigen::RowVectorXd predict_distribution(const TrainedModel& model, const Eigen::RowVectorXd& x);

SurvivalCurve survival_from_distribution(const TimeGrid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& p);
SurvivalCurve predict_survival(const TrainedModel& model, const Eigen::RowVectorXd& x);

struct IntervalPrediction {
  Eigen::RowVectorXd lower_probs;
  Eigen::RowVectorXd upper_probs;
  IntervalCurve curve;
};

/// Envelope of every mixture Σ_i a_i π_i with π_i in instance i's credal set.
IntervalPrediction predict_interval_survival(const Eigen::Ref<const Eigen::RowVectorXd>& weights,
                                             std::span<const ImpreciseLabel> labels, const TimeGrid& grid);

/// Σ_k p_k · rep_k with interval midpoints, and the last boundary for the
/// open interval.
double expected_time(const TimeGrid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& p);
Eigen::VectorXd expected_times(const TimeGrid& grid, const Eigen::MatrixXd& P);

}  // namespace isurv
