#include "isurv/attention.hpp"

#include "isurv/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace isurv {

namespace {

Index query_row(std::span<const Index> rows, Index r) { return rows.empty() ? r : rows[static_cast<std::size_t>(r)]; }

void check_rows(const Eigen::MatrixXd& logits, const MaskMatrix* mask, std::span<const Index> rows) {
  if (!rows.empty() && static_cast<Index>(rows.size()) != logits.rows())
    throw ShapeError("row index list does not match logit rows");
  if (mask && mask->size() != logits.cols())
    throw ShapeError("mask size does not match key count");
  if (mask && rows.empty() && logits.rows() != mask->size())
    throw ShapeError("mask size does not match query count");
}

}  // namespace

EmbeddingParams init_embedding(Index in_dims, Index out_dims, double dropout, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(std::max<Index>(in_dims, 1))));
  EmbeddingParams p;
  p.weight.resize(in_dims, out_dims);
  for (Index j = 0; j < out_dims; ++j)
    for (Index i = 0; i < in_dims; ++i) p.weight(i, j) = normal(rng);
  p.bias = Eigen::RowVectorXd::Zero(out_dims);
  p.dropout = dropout;
  return p;
}

Eigen::MatrixXd dropout_scale(Index rows, Index cols, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("dropout probability must lie in [0,1]");
  if (p >= 1.0) return Eigen::MatrixXd::Zero(rows, cols);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double kept = 1.0 / (1.0 - p);
  Eigen::MatrixXd s(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) s(i, j) = unif(rng) < p ? 0.0 : kept;
  return s;
}

Eigen::MatrixXd embed_with(const Eigen::MatrixXd& X, const EmbeddingParams& params,
                           const Eigen::MatrixXd& scale, EmbeddingTape* tape) {
  if (X.cols() != params.in_dims())
    throw ShapeError("embedding expects " + std::to_string(params.in_dims()) + " features, got " +
                     std::to_string(X.cols()));
  Eigen::MatrixXd z = X * params.weight;
  z.rowwise() += params.bias;
  if (params.activation == Activation::Tanh) z = z.array().tanh();
  if (tape) {
    tape->input = X;
    tape->activated = z;
    tape->scale = scale;
  }
  if (scale.size() == 0) return z;
  if (scale.rows() != z.rows() || scale.cols() != z.cols()) throw ShapeError("dropout scale has wrong shape");
  return z.cwiseProduct(scale);
}

Eigen::MatrixXd embed(const Eigen::MatrixXd& X, const EmbeddingParams& params, bool training, Rng& rng) {
  if (!training || params.dropout <= 0.0) return embed_with(X, params, Eigen::MatrixXd());
  return embed_with(X, params, dropout_scale(X.rows(), params.out_dims(), params.dropout, rng));
}

void embed_backward(const EmbeddingTape& tape, const EmbeddingParams& params,
                    const Eigen::MatrixXd& d_out, EmbeddingParams& grad) {
  Eigen::MatrixXd dz = tape.scale.size() ? d_out.cwiseProduct(tape.scale) : d_out;
  if (params.activation == Activation::Tanh) dz.array() *= 1.0 - tape.activated.array().square();
  grad.weight.noalias() += tape.input.transpose() * dz;
  grad.bias += dz.colwise().sum();
}

AttentionParams init_attention(Index d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  AttentionParams p{Eigen::MatrixXd(d, d), Eigen::MatrixXd(d, d)};
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) p.query(i, j) = normal(rng);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) p.key(i, j) = normal(rng);
  return p;
}

Eigen::MatrixXd raw_attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K, const AttentionParams& params) {
  const Index d = Q.cols();
  if (d == 0) throw DomainError("attention dimension must be positive");
  if (K.cols() != d || params.query.rows() != d || params.key.rows() != d)
    throw ShapeError("query/key/projection dimensions disagree");
  const Eigen::MatrixXd qp = Q * params.query;
  const Eigen::MatrixXd kp = K * params.key;
  return (qp * kp.transpose()) / std::sqrt(static_cast<double>(d));
}

void raw_attention_backward(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K, const AttentionParams& params,
                            const Eigen::MatrixXd& d_logits, AttentionParams& grad, Eigen::MatrixXd& d_Q,
                            Eigen::MatrixXd& d_K) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  const Eigen::MatrixXd qp = Q * params.query;
  const Eigen::MatrixXd kp = K * params.key;
  const Eigen::MatrixXd d_qp = (d_logits * kp) * inv;
  const Eigen::MatrixXd d_kp = (d_logits.transpose() * qp) * inv;
  grad.query.noalias() += Q.transpose() * d_qp;
  grad.key.noalias() += K.transpose() * d_kp;
  d_Q = d_qp * params.query.transpose();
  d_K = d_kp * params.key.transpose();
}

MaskMatrix::MaskMatrix(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep) : keep_(std::move(keep)) {
  if (keep_.rows() != keep_.cols()) throw ShapeError("mask must be square");
  keep_.matrix().diagonal().setConstant(false);
}

MaskMatrix MaskMatrix::off_diagonal(Index n) {
  return MaskMatrix(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, true));
}

MaskMatrix make_mask(Index n, double p_mask, Rng& rng) {
  if (n < 2) throw SizeError("mask needs at least two instances");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) keep(i, j) = unif(rng) > p_mask;
  return MaskMatrix(std::move(keep));
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits, const MaskMatrix* mask, std::span<const Index> rows) {
  check_rows(logits, mask, rows);
  const Index n = logits.cols();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(logits.rows(), n);
  Index fallbacks = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const Index q = query_row(rows, r);
    double top = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j)
      if (!mask || mask->keep(q, j)) top = std::max(top, logits(r, j));
    if (top == -std::numeric_limits<double>::infinity()) {
      ++fallbacks;
      const Index others = mask && n > 1 ? n - 1 : n;
      for (Index j = 0; j < n; ++j)
        if (!mask || j != q || n == 1) W(r, j) = 1.0 / static_cast<double>(others);
      continue;
    }
    double total = 0.0;
    for (Index j = 0; j < n; ++j)
      if (!mask || mask->keep(q, j)) total += W(r, j) = std::exp(logits(r, j) - top);
    W.row(r) /= total;
  }
  if (fallbacks > 0)
    warn(std::to_string(fallbacks) + " fully masked attention rows fell back to uniform weights");
  return W;
}

Eigen::MatrixXd row_softmax_backward(const Eigen::MatrixXd& W, const Eigen::MatrixXd& d_W, const MaskMatrix* mask,
                                     std::span<const Index> rows) {
  check_rows(W, mask, rows);
  const Eigen::VectorXd inner = (W.cwiseProduct(d_W)).rowwise().sum();
  Eigen::MatrixXd d_logits = W.cwiseProduct(d_W.colwise() - inner);
  if (mask) {
    for (Index r = 0; r < W.rows(); ++r) {
      const Index q = query_row(rows, r);
      for (Index j = 0; j < W.cols(); ++j)
        if (!mask->keep(q, j)) d_logits(r, j) = 0.0;
    }
  }
  return d_logits;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys) {
  if (queries.cols() != keys.cols()) throw ShapeError("queries and keys differ in dimension");
  Eigen::MatrixXd D(queries.rows(), keys.rows());
  for (Index j = 0; j < keys.rows(); ++j)
    for (Index i = 0; i < queries.rows(); ++i) D(i, j) = (queries.row(i) - keys.row(j)).squaredNorm();
  return D;
}

Eigen::MatrixXd gaussian_attention(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys, double tau,
                                   const MaskMatrix* mask, std::span<const Index> rows) {
  if (!(tau > 0.0)) throw DomainError("Gaussian temperature must be positive");
  return row_softmax(-squared_distances(queries, keys) / tau, mask, rows);
}

// ---------------------------------------------------------------------------

double AttentionState::tau() const { return std::exp(log_tau); }

AttentionState init_dot_product(Index in_dims, Index embed_dims, double dropout, Rng& rng) {
  AttentionState s;
  s.kind = AttentionKind::DotProduct;
  s.embedding = init_embedding(in_dims, embed_dims, dropout, rng);
  s.projection = init_attention(embed_dims, rng);
  return s;
}

AttentionState init_gaussian(double tau) {
  if (!(tau > 0.0)) throw DomainError("Gaussian temperature must be positive");
  AttentionState s;
  s.kind = AttentionKind::Gaussian;
  s.log_tau = std::log(tau);
  return s;
}

AttentionState zeros_like(const AttentionState& s) {
  AttentionState z = s;
  z.for_each_tensor([](std::string_view, auto& t, bool) { t.setZero(); });
  return z;
}

Eigen::MatrixXd training_weights(const AttentionState& state, const Eigen::MatrixXd& X, std::span<const Index> rows,
                                 const MaskMatrix* mask, const Eigen::MatrixXd& dropout, AttentionTape* tape) {
  std::vector<Index> row_list(rows.begin(), rows.end());
  if (row_list.empty()) {
    row_list.resize(static_cast<std::size_t>(X.rows()));
    std::iota(row_list.begin(), row_list.end(), Index{0});
  }
  Eigen::MatrixXd W;
  if (state.kind == AttentionKind::Gaussian) {
    Eigen::MatrixXd D = squared_distances(X(row_list, Eigen::all), X);
    W = row_softmax(-D / state.tau(), mask, row_list);
    if (tape) tape->distances = std::move(D);
  } else {
    EmbeddingTape etape;
    Eigen::MatrixXd E = embed_with(X, state.embedding, dropout, tape ? &etape : nullptr);
    W = row_softmax(raw_attention(E(row_list, Eigen::all), E, state.projection), mask, row_list);
    if (tape) {
      tape->embedding = std::move(etape);
      tape->embedded = std::move(E);
    }
  }
  if (tape) {
    tape->rows = std::move(row_list);
    tape->weights = W;
    tape->mask = mask;
  }
  return W;
}

void training_weights_backward(const AttentionState& state, const AttentionTape& tape, const Eigen::MatrixXd& d_W,
                               AttentionState& grad) {
  const Eigen::MatrixXd d_logits = row_softmax_backward(tape.weights, d_W, tape.mask, tape.rows);
  if (state.kind == AttentionKind::Gaussian) {
    grad.log_tau += d_logits.cwiseProduct(tape.distances).sum() / state.tau();
    return;
  }
  const Eigen::MatrixXd Q = tape.embedded(tape.rows, Eigen::all);
  Eigen::MatrixXd d_Q, d_K;
  raw_attention_backward(Q, tape.embedded, state.projection, d_logits, grad.projection, d_Q, d_K);
  for (std::size_t r = 0; r < tape.rows.size(); ++r) d_K.row(tape.rows[r]) += d_Q.row(static_cast<Index>(r));
  embed_backward(tape.embedding, state.embedding, d_K, grad.embedding);
}

Eigen::MatrixXd inference_weights(const AttentionState& state, const Eigen::MatrixXd& keys,
                                  const Eigen::MatrixXd& queries) {
  if (queries.cols() != keys.cols())
    throw ShapeError("dimension mismatch: model expects " + std::to_string(keys.cols()) + " features, got " +
                     std::to_string(queries.cols()));
  if (state.kind == AttentionKind::Gaussian) return gaussian_attention(queries, keys, state.tau());
  const Eigen::MatrixXd none;
  const Eigen::MatrixXd K = embed_with(keys, state.embedding, none);
  const Eigen::MatrixXd Q = embed_with(queries, state.embedding, none);
  return row_softmax(raw_attention(Q, K, state.projection));
}

}  // namespace isurv
