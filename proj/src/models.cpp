#include "isurv/models.hpp"

#include "isurv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace isurv {

void ModelConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(gamma >= 0.0)) throw ValidationError("entropy coefficient must be non-negative");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ValidationError("quantile fraction r must lie in (0,1]");
  if (generations < 1) throw ValidationError("generations M must be at least 1");
  if (window < 0) throw ValidationError("window k must be non-negative");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw ValidationError("mask rate must lie in [0,1]");
  if (embed_dims < 1) throw ValidationError("embedding dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0,1)");
  if (!(batch_rate > 0.0 && batch_rate <= 1.0)) throw ValidationError("batch rate must lie in (0,1]");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be non-negative");
  if (!(initial_tau > 0.0)) throw ValidationError("initial tau must be positive");
  if (fine_tune_epochs < 0) throw ValidationError("fine-tune epochs must be non-negative");
  if (!(fine_tune_learning_rate > 0.0)) throw ValidationError("fine-tune learning rate must be positive");
}

// ---------------------------------------------------------------------------

AdamW::AdamW(double learning_rate, double weight_decay, double beta1, double beta2, double eps)
    : lr_(learning_rate), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::update(Slot& slot, Eigen::Ref<Eigen::MatrixXd> param, const Eigen::Ref<const Eigen::MatrixXd>& grad,
                   bool decays) {
  if (slot.m.size() == 0) {
    slot.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    slot.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  slot.m = beta1_ * slot.m + (1.0 - beta1_) * grad;
  slot.v = beta2_ * slot.v + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  if (decays && wd_ > 0.0) param *= 1.0 - lr_ * wd_;
  param.array() -= lr_ * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + eps_);
}

void AdamW::step(TrainableState& params, TrainableState& grads) {
  ++t_;
  std::vector<std::pair<Eigen::Map<Eigen::MatrixXd>, bool>> grad_views;
  grads.attention.for_each_tensor([&](std::string_view, auto& g, bool decays) { grad_views.emplace_back(g, decays); });
  std::size_t k = 0;
  params.attention.for_each_tensor([&](std::string_view, auto& p, bool decays) {
    if (slots_.size() <= k) slots_.emplace_back();
    update(slots_[k], p, grad_views[k].first, decays);
    ++k;
  });
  if (params.logits.size() > 0) {
    if (slots_.size() <= k) slots_.emplace_back();
    update(slots_[k], params.logits, grads.logits, false);
  }
}

void AdamW::step(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::Ref<const Eigen::MatrixXd>& grads) {
  ++t_;
  if (slots_.empty()) slots_.emplace_back();
  update(slots_[0], params, grads, false);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd mean_sample(std::span<const Eigen::VectorXd> samples) {
  Eigen::VectorXd mean = samples.front();
  for (std::size_t m = 1; m < samples.size(); ++m) mean += samples[m];
  return mean / static_cast<double>(samples.size());
}

std::vector<Eigen::VectorXd> draw_generations(std::span<const ImpreciseLabel> labels, const SupportLayout& layout,
                                              Index M, Rng& rng) {
  const Index T = layout.intervals();
  std::vector<Eigen::VectorXd> samples(static_cast<std::size_t>(M), Eigen::VectorXd::Ones(layout.packed_size()));
  for (Index i = 0; i < layout.instances(); ++i) {
    const auto& label = labels[static_cast<std::size_t>(i)];
    if (!label.censored) continue;
    const Eigen::MatrixXd rows = sample_credal(label, T, M, rng);
    for (Index m = 0; m < M; ++m)
      samples[static_cast<std::size_t>(m)].segment(layout.offset(i), layout.length(i)) =
          rows.row(m).segment(layout.begin(i), layout.length(i)).transpose();
  }
  return samples;
}

void check_finite(double value, Index epoch, const char* stage) {
  if (!std::isfinite(value))
    throw TrainingError(std::string("non-finite loss during ") + stage + " at epoch " + std::to_string(epoch));
}

}  // namespace

TrainedModel train(const SurvivalDataset& data, const ModelConfig& config) {
  data.validate();
  const TimeGrid grid = build_grid(data.times, data.events);
  const auto labels = make_labels(grid, data.times, data.events);
  return train(data, grid, labels, config);
}

TrainedModel train(const SurvivalDataset& data, const TimeGrid& grid, std::span<const ImpreciseLabel> labels,
                   const ModelConfig& config) {
  config.validate();
  if (static_cast<Index>(labels.size()) != data.size()) throw ShapeError("one label per training row required");
  const Index T = grid.intervals();

  TrainedModel model;
  model.config = config;
  model.grid = grid;
  std::vector<Index> kept;
  for (Index i = 0; i < data.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)].representable(T)) kept.push_back(i);
  }
  model.dropped = data.size() - static_cast<Index>(kept.size());
  if (model.dropped > 0)
    warn("dropped " + std::to_string(model.dropped) + " censored rows with no interval after their time");
  if (kept.size() < 2) throw SizeError("training needs at least two representable instances");
  model.keys = data.features(kept, Eigen::all);
  for (Index i : kept) model.labels.push_back(labels[static_cast<std::size_t>(i)]);

  const Index N = model.keys.rows();
  Rng rng(config.seed);
  TrainableState state;
  state.attention = config.variant == Variant::JG
                        ? init_gaussian(config.initial_tau)
                        : init_dot_product(model.keys.cols(), config.embed_dims, config.dropout, rng);
  const SupportLayout layout(model.labels, T);
  if (is_joint(config.variant)) state.logits = Eigen::VectorXd::Zero(layout.packed_size());
  const MaskMatrix mask = make_mask(N, config.mask_rate, rng);

  const Index batch = std::clamp<Index>(static_cast<Index>(std::ceil(config.batch_rate * static_cast<double>(N))), 1, N);
  const bool uses_dropout = state.attention.kind == AttentionKind::DotProduct && config.dropout > 0.0;
  const ObjectiveSettings settings = config.objective();
  AdamW optimizer(config.learning_rate, config.weight_decay);

  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  StepInputs inputs;
  inputs.mask = &mask;
  inputs.layout = &layout;

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    if (!is_joint(config.variant)) inputs.samples = draw_generations(model.labels, layout, config.generations, rng);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Index start = 0; start < N; start += batch) {
      const Index count = std::min(batch, N - start);
      inputs.rows = std::span<const Index>(order).subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(count));
      inputs.dropout = uses_dropout ? dropout_scale(N, config.embed_dims, config.dropout, rng) : Eigen::MatrixXd();
      TrainableState grad = zeros_like(state);
      const double value = step_objective(state, model.keys, model.labels, settings, inputs, &grad);
      check_finite(value, epoch, "training");
      optimizer.step(state, grad);
      epoch_loss += value;
    }
    model.loss_history.push_back(epoch_loss);
  }

  model.attention = state.attention;
  if (is_joint(config.variant)) {
    model.distributions = layout.expand(packed_softmax(state.logits, layout));
  } else {
    if (inputs.samples.empty()) inputs.samples = draw_generations(model.labels, layout, config.generations, rng);
    fine_tune(model, layout.expand(mean_sample(inputs.samples)));
  }
  return model;
}

Eigen::MatrixXd fine_tune_weights(const TrainedModel& model) {
  const Index N = model.keys.rows();
  // The fixed training mask is re-derived from the seed so that the weights
  // match those used during training.
  Rng rng(model.config.seed);
  if (model.attention.kind == AttentionKind::DotProduct)
    (void)init_dot_product(model.keys.cols(), model.config.embed_dims, model.config.dropout, rng);
  const MaskMatrix mask = make_mask(N, model.config.mask_rate, rng);
  return training_weights(model.attention, model.keys, {}, &mask, Eigen::MatrixXd());
}

void fine_tune(TrainedModel& model, const Eigen::MatrixXd& initial) {
  const ModelConfig& config = model.config;
  const SupportLayout layout(model.labels, model.intervals());
  const Eigen::MatrixXd W = fine_tune_weights(model);
  Eigen::VectorXd logits = logits_from_distributions(initial, layout);
  Eigen::VectorXd best = logits;
  Eigen::VectorXd d_logits;
  auto objective = [&](const Eigen::VectorXd& z) {
    return fine_tune_objective(W, z, model.labels, layout, config.gamma, config.window, &d_logits);
  };
  double best_value = objective(logits);
  check_finite(best_value, 0, "fine-tuning");
  model.fine_tune_history = {best_value};

  AdamW optimizer(config.fine_tune_learning_rate, 0.0);
  for (Index epoch = 0; epoch < config.fine_tune_epochs; ++epoch) {
    optimizer.step(logits, d_logits);
    const double value = objective(logits);
    check_finite(value, epoch, "fine-tuning");
    model.fine_tune_history.push_back(value);
    if (value < best_value) {
      best_value = value;
      best = logits;
    }
  }
  model.distributions = layout.expand(packed_softmax(best, layout));
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd predict_distributions(const TrainedModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd W = inference_weights(model.attention, model.keys, X);
  return mix_probabilities(W, model.distributions);
}

Eigen::RowVectorXd predict_distribution(const TrainedModel& model, const Eigen::RowVectorXd& x) {
  return predict_distributions(model, Eigen::MatrixXd(x)).row(0);
}

SurvivalCurve survival_from_distribution(const TimeGrid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  const Index T = grid.intervals();
  if (p.size() != T) throw ShapeError("distribution length does not match the grid");
  SurvivalCurve curve;
  curve.times.resize(T);
  curve.values.resize(T);
  curve.times[0] = 0.0;
  curve.times.tail(T - 1) = grid.boundaries;
  double tail = 1.0;
  curve.values[0] = 1.0;
  // Accumulate from the right to avoid 1 − Σ cancellation.
  Eigen::VectorXd tails(T);
  tails[T - 1] = p[T - 1];
  for (Index j = T - 2; j >= 0; --j) tails[j] = tails[j + 1] + p[j];
  for (Index b = 1; b < T; ++b) {
    tail = std::clamp(tails[b], 0.0, 1.0);
    curve.values[b] = std::min(tail, curve.values[b - 1]);
  }
  return curve;
}

SurvivalCurve predict_survival(const TrainedModel& model, const Eigen::RowVectorXd& x) {
  return survival_from_distribution(model.grid, predict_distribution(model, x));
}

IntervalPrediction predict_interval_survival(const Eigen::Ref<const Eigen::RowVectorXd>& weights,
                                             std::span<const ImpreciseLabel> labels, const TimeGrid& grid) {
  const Index T = grid.intervals();
  if (weights.size() != static_cast<Index>(labels.size())) throw ShapeError("one weight per label required");
  IntervalPrediction out;
  out.lower_probs = Eigen::RowVectorXd::Zero(T);
  Eigen::RowVectorXd censored_from = Eigen::RowVectorXd::Zero(T + 1);  // weight of censored labels by interval
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double a = weights[static_cast<Index>(i)];
    if (labels[i].censored) censored_from[labels[i].interval] += a;
    else out.lower_probs[labels[i].interval] += a;
  }
  out.upper_probs = out.lower_probs;
  double running = 0.0;
  for (Index k = 0; k < T; ++k) {
    out.upper_probs[k] += running;  // censored labels with c < k admit interval k
    running += censored_from[k];
  }
  const double censored_total = running;

  // Tail extremes at boundary b (time t_{b+1}): uncensored mass past b plus
  // either every censored label (upper) or only those wholly past b (lower).
  Eigen::RowVectorXd unc_tail(T + 1), cens_tail(T + 1);
  unc_tail[T] = cens_tail[T] = 0.0;
  for (Index k = T - 1; k >= 0; --k) {
    unc_tail[k] = unc_tail[k + 1] + out.lower_probs[k];
    cens_tail[k] = cens_tail[k + 1] + censored_from[k];
  }
  auto& lower = out.curve.lower;
  auto& upper = out.curve.upper;
  lower.times.resize(T);
  lower.times[0] = 0.0;
  lower.times.tail(T - 1) = grid.boundaries;
  upper.times = lower.times;
  lower.values.resize(T);
  upper.values.resize(T);
  lower.values[0] = upper.values[0] = 1.0;
  for (Index b = 0; b + 1 < T; ++b) {
    upper.values[b + 1] = std::min(1.0, unc_tail[b + 1] + censored_total);
    lower.values[b + 1] = std::min(1.0, unc_tail[b + 1] + cens_tail[b]);
  }
  return out;
}

double expected_time(const TimeGrid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  const Index T = grid.intervals();
  if (p.size() != T) throw ShapeError("distribution length does not match the grid");
  double value = 0.0;
  for (Index k = 0; k + 1 < T; ++k) value += p[k] * 0.5 * (grid.lower(k) + grid.boundaries[k]);
  value += p[T - 1] * grid.boundaries[T - 2];
  return value;
}

Eigen::VectorXd expected_times(const TimeGrid& grid, const Eigen::MatrixXd& P) {
  Eigen::VectorXd out(P.rows());
  for (Index i = 0; i < P.rows(); ++i) out[i] = expected_time(grid, P.row(i));
  return out;
}

}  // namespace isurv
