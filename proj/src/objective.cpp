#include "isurv/objective.hpp"

#include "isurv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace isurv {

LossRegion loss_region(const ImpreciseLabel& label, Index T, Index window) {
  if (label.censored) return {label.interval + 1, T};
  return {std::max<Index>(0, label.interval - window), std::min<Index>(T, label.interval + window + 1)};
}

double instance_loss(const Eigen::Ref<const Eigen::RowVectorXd>& p, const ImpreciseLabel& label, Index window) {
  const LossRegion region = loss_region(label, p.size(), window);
  const double mass = region.end > region.begin ? p.segment(region.begin, region.end - region.begin).sum() : 0.0;
  return -std::log(std::max(mass, kLogFloor));
}

Eigen::MatrixXd mix_probabilities(const Eigen::MatrixXd& W, const Eigen::MatrixXd& S) {
  if (W.cols() != S.rows())
    throw ShapeError("mixing weights cover " + std::to_string(W.cols()) + " instances, distributions " +
                     std::to_string(S.rows()));
  return W * S;
}

double summed_instance_loss(const Eigen::MatrixXd& P, std::span<const ImpreciseLabel> labels, Index window) {
  if (static_cast<Index>(labels.size()) != P.rows()) throw ShapeError("one label per row required");
  double total = 0.0;
  for (Index i = 0; i < P.rows(); ++i) total += instance_loss(P.row(i), labels[static_cast<std::size_t>(i)], window);
  return total;
}

double loss_isurvm(std::span<const Eigen::MatrixXd> per_generation, std::span<const ImpreciseLabel> labels,
                   Index window) {
  double total = 0.0;
  for (const auto& P : per_generation) total += summed_instance_loss(P, labels, window);
  return total;
}

Index quantile_count(Index generations, double fraction) {
  if (generations < 1) throw DomainError("need at least one generation");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("quantile fraction must lie in (0,1]");
  const auto count = static_cast<Index>(std::ceil(fraction * static_cast<double>(generations) - 1e-9));
  return std::clamp<Index>(count, 1, generations);
}

std::vector<Index> worst_generations(std::span<const double> totals, double fraction) {
  const Index keep = quantile_count(static_cast<Index>(totals.size()), fraction);
  std::vector<Index> order(totals.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return totals[static_cast<std::size_t>(a)] > totals[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(keep));
  return order;
}

double loss_isurvq(std::span<const double> totals, double fraction) {
  double sum = 0.0;
  for (Index m : worst_generations(totals, fraction)) sum += totals[static_cast<std::size_t>(m)];
  return sum;
}

double entropy(const Eigen::Ref<const Eigen::RowVectorXd>& pi) {
  double h = 0.0;
  for (Index j = 0; j < pi.size(); ++j)
    if (pi[j] != 0.0) h -= pi[j] * std::log(std::max(pi[j], kLogFloor));
  return h;
}

double loss_isurvj(const Eigen::MatrixXd& P, std::span<const ImpreciseLabel> labels, const Eigen::MatrixXd& pi,
                   double gamma, Index window) {
  if (pi.rows() != P.rows()) throw ShapeError("one learned distribution per instance required");
  double total = summed_instance_loss(P, labels, window);
  for (Index i = 0; i < pi.rows(); ++i) total += gamma * entropy(pi.row(i));
  return total;
}

// ---------------------------------------------------------------------------

MixtureLoss mixture_loss(const Eigen::MatrixXd& W, std::span<const Index> rows, const Eigen::MatrixXd& S,
                         std::span<const ImpreciseLabel> labels, Index window, bool want_distribution_grad) {
  const Index N = S.rows();
  const Index T = S.cols();
  if (W.cols() != N) throw ShapeError("mixing weights and distributions disagree on instance count");
  if (static_cast<Index>(rows.size()) != W.rows()) throw ShapeError("one query row index per weight row required");

  // prefix(l, j) = Σ_{j' < j} S(l, j')
  Eigen::MatrixXd prefix(N, T + 1);
  prefix.col(0).setZero();
  for (Index j = 0; j < T; ++j) prefix.col(j + 1) = prefix.col(j) + S.col(j);

  MixtureLoss out;
  out.d_weights.resize(W.rows(), N);
  Eigen::MatrixXd diff;
  if (want_distribution_grad) diff = Eigen::MatrixXd::Zero(N, T + 1);

  Eigen::VectorXd region_mass(N);
  for (Index r = 0; r < W.rows(); ++r) {
    const LossRegion region = loss_region(labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])], T, window);
    if (region.end > region.begin) region_mass = prefix.col(region.end) - prefix.col(region.begin);
    else region_mass.setZero();
    const double mass = W.row(r).dot(region_mass);
    out.value -= std::log(std::max(mass, kLogFloor));
    const double coef = mass > kLogFloor ? -1.0 / mass : 0.0;
    out.d_weights.row(r) = coef * region_mass.transpose();
    if (want_distribution_grad && coef != 0.0 && region.end > region.begin) {
      diff.col(region.begin) += coef * W.row(r).transpose();
      diff.col(region.end) -= coef * W.row(r).transpose();
    }
  }
  if (want_distribution_grad) {
    out.d_distributions.resize(N, T);
    out.d_distributions.col(0) = diff.col(0);
    for (Index j = 1; j < T; ++j) out.d_distributions.col(j) = out.d_distributions.col(j - 1) + diff.col(j);
  }
  return out;
}

Eigen::MatrixXd support_softmax(const Eigen::MatrixXd& logits, std::span<const ImpreciseLabel> labels) {
  const Index N = logits.rows();
  const Index T = logits.cols();
  if (static_cast<Index>(labels.size()) != N) throw ShapeError("one label per logit row required");
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(N, T);
  for (Index i = 0; i < N; ++i) {
    const auto& label = labels[static_cast<std::size_t>(i)];
    const Index b = label.support_begin(), e = label.support_end(T);
    if (e - b == 1) {
      pi(i, b) = 1.0;
      continue;
    }
    const double top = logits.row(i).segment(b, e - b).maxCoeff();
    double total = 0.0;
    for (Index j = b; j < e; ++j) total += pi(i, j) = std::exp(logits(i, j) - top);
    pi.row(i).segment(b, e - b) /= total;
  }
  return pi;
}

SupportLayout::SupportLayout(std::span<const ImpreciseLabel> labels, Index T) : intervals_(T) {
  begin_.reserve(labels.size());
  offset_.reserve(labels.size() + 1);
  offset_.push_back(0);
  for (const auto& label : labels) {
    if (label.interval < 0 || label.interval >= T) throw DomainError("label interval outside the grid");
    if (!label.representable(T)) throw DomainError("label has an empty support");
    begin_.push_back(label.support_begin());
    offset_.push_back(offset_.back() + label.support_end(T) - label.support_begin());
  }
}

Eigen::MatrixXd SupportLayout::expand(const Eigen::VectorXd& packed) const {
  if (packed.size() != packed_size()) throw ShapeError("packed vector does not match the layout");
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(instances(), intervals_);
  for (Index i = 0; i < instances(); ++i) dense.row(i).segment(begin(i), length(i)) = packed.segment(offset(i), length(i)).transpose();
  return dense;
}

Eigen::VectorXd SupportLayout::pack(const Eigen::MatrixXd& dense) const {
  if (dense.rows() != instances() || dense.cols() != intervals_) throw ShapeError("matrix does not match the layout");
  Eigen::VectorXd packed(packed_size());
  for (Index i = 0; i < instances(); ++i) packed.segment(offset(i), length(i)) = dense.row(i).segment(begin(i), length(i)).transpose();
  return packed;
}

PackedMixtureLoss packed_mixture_loss(const Eigen::MatrixXd& W, std::span<const Index> rows,
                                      const SupportLayout& layout, const Eigen::VectorXd& S,
                                      std::span<const ImpreciseLabel> labels, Index window,
                                      bool want_distribution_grad) {
  const Index N = layout.instances();
  const Index T = layout.intervals();
  if (W.cols() != N) throw ShapeError("mixing weights and distributions disagree on instance count");
  if (static_cast<Index>(rows.size()) != W.rows()) throw ShapeError("one query row index per weight row required");
  if (S.size() != layout.packed_size()) throw ShapeError("packed distributions do not match the layout");

  // Segment l of `prefix` starts at offset(l) + l and holds length(l) + 1 partial sums.
  Eigen::VectorXd prefix(layout.packed_size() + N);
  for (Index l = 0; l < N; ++l) {
    const Index base = layout.offset(l) + l;
    prefix[base] = 0.0;
    for (Index k = 0; k < layout.length(l); ++k) prefix[base + k + 1] = prefix[base + k] + S[layout.offset(l) + k];
  }

  PackedMixtureLoss out;
  out.d_weights.resize(W.rows(), N);
  Eigen::VectorXd diff;
  if (want_distribution_grad) diff = Eigen::VectorXd::Zero(prefix.size());
  const Eigen::MatrixXd Wt = W.transpose();
  Eigen::VectorXd region_mass(N);
  std::vector<Index> lo(static_cast<std::size_t>(N)), hi(static_cast<std::size_t>(N));

  for (Index r = 0; r < W.rows(); ++r) {
    const LossRegion region = loss_region(labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])], T, window);
    double mass = 0.0;
    for (Index l = 0; l < N; ++l) {
      const Index b = layout.begin(l);
      const Index a = std::max(region.begin, b) - b;
      const Index e = std::min(region.end, b + layout.length(l)) - b;
      const Index base = layout.offset(l) + l;
      lo[static_cast<std::size_t>(l)] = base + a;
      hi[static_cast<std::size_t>(l)] = base + e;
      region_mass[l] = e > a ? prefix[base + e] - prefix[base + a] : 0.0;
      mass += Wt(l, r) * region_mass[l];
    }
    out.value -= std::log(std::max(mass, kLogFloor));
    const double coef = mass > kLogFloor ? -1.0 / mass : 0.0;
    out.d_weights.row(r) = coef * region_mass.transpose();
    if (!want_distribution_grad || coef == 0.0) continue;
    for (Index l = 0; l < N; ++l) {
      const double w = Wt(l, r);
      if (w == 0.0 || hi[static_cast<std::size_t>(l)] <= lo[static_cast<std::size_t>(l)]) continue;
      diff[lo[static_cast<std::size_t>(l)]] += coef * w;
      diff[hi[static_cast<std::size_t>(l)]] -= coef * w;
    }
  }
  if (want_distribution_grad) {
    out.d_distributions.resize(layout.packed_size());
    for (Index l = 0; l < N; ++l) {
      const Index base = layout.offset(l) + l;
      double running = 0.0;
      for (Index k = 0; k < layout.length(l); ++k) out.d_distributions[layout.offset(l) + k] = running += diff[base + k];
    }
  }
  return out;
}

Eigen::VectorXd packed_softmax(const Eigen::VectorXd& logits, const SupportLayout& layout) {
  if (logits.size() != layout.packed_size()) throw ShapeError("packed logits do not match the layout");
  Eigen::VectorXd pi(logits.size());
  for (Index i = 0; i < layout.instances(); ++i) {
    const auto seg = logits.segment(layout.offset(i), layout.length(i));
    auto out = pi.segment(layout.offset(i), layout.length(i));
    out = (seg.array() - seg.maxCoeff()).exp().matrix();
    out /= out.sum();
  }
  return pi;
}

Eigen::VectorXd packed_softmax_backward(const Eigen::VectorXd& pi, const Eigen::VectorXd& d_pi,
                                        const SupportLayout& layout) {
  Eigen::VectorXd d_logits(pi.size());
  for (Index i = 0; i < layout.instances(); ++i) {
    const auto p = pi.segment(layout.offset(i), layout.length(i));
    const auto g = d_pi.segment(layout.offset(i), layout.length(i));
    d_logits.segment(layout.offset(i), layout.length(i)) = p.array() * (g.array() - p.dot(g));
  }
  return d_logits;
}

Eigen::VectorXd logits_from_distributions(const Eigen::MatrixXd& pi, const SupportLayout& layout) {
  return layout.pack(pi).array().max(kLogFloor).log().matrix();
}

// ---------------------------------------------------------------------------

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::M: return "isurvm";
    case Variant::Q: return "isurvq";
    case Variant::J: return "isurvj";
    case Variant::JG: return "isurvjg";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "m" || lower == "isurvm") return Variant::M;
  if (lower == "q" || lower == "isurvq") return Variant::Q;
  if (lower == "j" || lower == "isurvj") return Variant::J;
  if (lower == "jg" || lower == "j(g)" || lower == "isurvjg" || lower == "isurvj(g)") return Variant::JG;
  throw UsageError("unknown model variant '" + std::string(name) + "'");
}

TrainableState zeros_like(const TrainableState& s) {
  return {zeros_like(s.attention), Eigen::VectorXd::Zero(s.logits.size())};
}

namespace {

void add_entropy_terms(const Eigen::VectorXd& pi, const SupportLayout& layout, std::span<const Index> rows,
                       double gamma, double& value, Eigen::VectorXd* d_pi) {
  if (gamma == 0.0) return;
  for (Index i : rows) {
    for (Index k = layout.offset(i); k < layout.offset(i + 1); ++k) {
      const double p = pi[k];
      if (p == 0.0) continue;
      value -= gamma * p * std::log(std::max(p, kLogFloor));
      if (d_pi) (*d_pi)[k] += p > kLogFloor ? -gamma * (std::log(p) + 1.0) : -gamma * std::log(kLogFloor);
    }
  }
}

}  // namespace

double step_objective(const TrainableState& state, const Eigen::MatrixXd& X, std::span<const ImpreciseLabel> labels,
                      const ObjectiveSettings& settings, const StepInputs& inputs, TrainableState* grad) {
  if (!inputs.layout) throw DomainError("step objective needs the support layout");
  const SupportLayout& layout = *inputs.layout;
  if (layout.instances() != static_cast<Index>(labels.size())) throw ShapeError("layout and labels disagree");
  AttentionTape tape;
  const Eigen::MatrixXd W = training_weights(state.attention, X, inputs.rows, inputs.mask, inputs.dropout, &tape);
  const std::span<const Index> rows(tape.rows);
  double value = 0.0;

  if (is_joint(settings.variant)) {
    const Eigen::VectorXd pi = packed_softmax(state.logits, layout);
    PackedMixtureLoss ml = packed_mixture_loss(W, rows, layout, pi, labels, settings.window, grad != nullptr);
    value = ml.value;
    add_entropy_terms(pi, layout, rows, settings.gamma, value, grad ? &ml.d_distributions : nullptr);
    if (grad) {
      training_weights_backward(state.attention, tape, ml.d_weights, grad->attention);
      grad->logits += packed_softmax_backward(pi, ml.d_distributions, layout);
    }
    return value;
  }

  if (inputs.samples.empty()) throw DomainError("sampled distributions required for iSurvM/iSurvQ");
  std::vector<double> totals;
  std::vector<Eigen::MatrixXd> d_weights;
  for (const auto& S : inputs.samples) {
    PackedMixtureLoss ml = packed_mixture_loss(W, rows, layout, S, labels, settings.window, false);
    totals.push_back(ml.value);
    if (grad) d_weights.push_back(std::move(ml.d_weights));
  }
  std::vector<Index> selected(totals.size());
  std::iota(selected.begin(), selected.end(), Index{0});
  if (settings.variant == Variant::Q) selected = worst_generations(totals, settings.quantile);

  Eigen::MatrixXd d_W;
  if (grad) d_W = Eigen::MatrixXd::Zero(W.rows(), W.cols());
  for (Index m : selected) {
    value += totals[static_cast<std::size_t>(m)];
    if (grad) d_W += d_weights[static_cast<std::size_t>(m)];
  }
  if (grad) training_weights_backward(state.attention, tape, d_W, grad->attention);
  return value;
}

double fine_tune_objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& logits,
                           std::span<const ImpreciseLabel> labels, const SupportLayout& layout, double gamma,
                           Index window, Eigen::VectorXd* d_logits) {
  std::vector<Index> rows(static_cast<std::size_t>(W.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  const Eigen::VectorXd pi = packed_softmax(logits, layout);
  PackedMixtureLoss ml = packed_mixture_loss(W, rows, layout, pi, labels, window, d_logits != nullptr);
  double value = ml.value;
  add_entropy_terms(pi, layout, rows, gamma, value, d_logits ? &ml.d_distributions : nullptr);
  if (d_logits) *d_logits = packed_softmax_backward(pi, ml.d_distributions, layout);
  return value;
}

}  // namespace isurv
