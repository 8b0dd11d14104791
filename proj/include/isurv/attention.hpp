#pragma once

#include "isurv/data.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>

namespace isurv {

enum class Activation { Identity, Tanh };

/// One dense layer d₀ → d, an elementwise activation, and output dropout.
struct EmbeddingParams {
  Eigen::MatrixXd weight;   // d₀ × d
  Eigen::RowVectorXd bias;  // d
  Activation activation = Activation::Tanh;
  double dropout = 0.0;

  Index in_dims() const { return weight.rows(); }
  Index out_dims() const { return weight.cols(); }
};

EmbeddingParams init_embedding(Index in_dims, Index out_dims, double dropout, Rng& rng);

/// Per-entry dropout factors: 0 with probability p, 1/(1−p) otherwise.
Eigen::MatrixXd dropout_scale(Index rows, Index cols, double p, Rng& rng);

struct EmbeddingTape {
  Eigen::MatrixXd input;
  Eigen::MatrixXd activated;  // before dropout
  Eigen::MatrixXd scale;      // empty when dropout is off
};

/// `scale` (if non-empty) multiplies the activations; `tape` records what
/// `embed_backward` needs.
Eigen::MatrixXd embed_with(const Eigen::MatrixXd& X, const EmbeddingParams& params,
                           const Eigen::MatrixXd& scale, EmbeddingTape* tape = nullptr);

/// Inference when `training` is false; fresh dropout draws otherwise.
Eigen::MatrixXd embed(const Eigen::MatrixXd& X, const EmbeddingParams& params, bool training, Rng& rng);

/// Accumulates d(loss)/d(weight, bias) into `grad`.
void embed_backward(const EmbeddingTape& tape, const EmbeddingParams& params,
                    const Eigen::MatrixXd& d_out, EmbeddingParams& grad);

struct AttentionParams {
  Eigen::MatrixXd query;  // W_Q, d × d
  Eigen::MatrixXd key;    // W_K, d × d
};

/// i.i.d. N(0, 1/d) entries.
AttentionParams init_attention(Index d, Rng& rng);

/// (Q·W_Q)(K·W_K)ᵀ / √d.
Eigen::MatrixXd raw_attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                              const AttentionParams& params);

/// Accumulates parameter gradients and writes d/dQ and d/dK.
void raw_attention_backward(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& K,
                            const AttentionParams& params, const Eigen::MatrixXd& d_logits,
                            AttentionParams& grad, Eigen::MatrixXd& d_Q, Eigen::MatrixXd& d_K);

/// Square keep/drop pattern over query × key pairs; the diagonal is always
/// dropped so no instance attends to itself.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  explicit MaskMatrix(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep);

  /// Keeps everything off the diagonal.
  static MaskMatrix off_diagonal(Index n);

  Index size() const { return keep_.rows(); }
  bool keep(Index i, Index j) const { return keep_(i, j); }
  const auto& pattern() const { return keep_; }

 private:
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep_;
};

/// Entry (i,j), i ≠ j, is kept iff its U(0,1) draw exceeds p_mask.
MaskMatrix make_mask(Index n, double p_mask, Rng& rng);

/// Row softmax with masked logits treated as −∞. Row r of `logits` is query
/// `rows[r]` of `mask` (all rows in order when `rows` is empty). A row with no
/// kept entries falls back to uniform weights over every other key.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits, const MaskMatrix* mask = nullptr,
                            std::span<const Index> rows = {});

/// d/d(logits) given W = row_softmax(logits) and d/dW. Masked entries and
/// fallback rows get zero gradient.
Eigen::MatrixXd row_softmax_backward(const Eigen::MatrixXd& W, const Eigen::MatrixXd& d_W,
                                     const MaskMatrix* mask = nullptr,
                                     std::span<const Index> rows = {});

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys);

/// Row softmax of −‖q − k‖²/τ.
Eigen::MatrixXd gaussian_attention(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys, double tau,
                                   const MaskMatrix* mask = nullptr, std::span<const Index> rows = {});

// ---------------------------------------------------------------------------
// Trainable attention used by the models.

enum class AttentionKind { DotProduct, Gaussian };

struct AttentionState {
  AttentionKind kind = AttentionKind::DotProduct;
  EmbeddingParams embedding;   // DotProduct only
  AttentionParams projection;  // DotProduct only
  double log_tau = 0.0;        // Gaussian only; τ = exp(log_tau)

  double tau() const;

  /// Visits every trainable tensor as (name, matrix view, decays).
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    if (kind == AttentionKind::Gaussian) {
      Eigen::Map<Eigen::MatrixXd> t(&log_tau, 1, 1);
      fn(std::string_view("log_tau"), t, false);
      return;
    }
    Eigen::Map<Eigen::MatrixXd> w(embedding.weight.data(), embedding.weight.rows(), embedding.weight.cols());
    Eigen::Map<Eigen::MatrixXd> b(embedding.bias.data(), 1, embedding.bias.size());
    Eigen::Map<Eigen::MatrixXd> q(projection.query.data(), projection.query.rows(), projection.query.cols());
    Eigen::Map<Eigen::MatrixXd> k(projection.key.data(), projection.key.rows(), projection.key.cols());
    fn(std::string_view("embedding.weight"), w, true);
    fn(std::string_view("embedding.bias"), b, true);
    fn(std::string_view("projection.query"), q, true);
    fn(std::string_view("projection.key"), k, true);
  }
};

AttentionState init_dot_product(Index in_dims, Index embed_dims, double dropout, Rng& rng);
AttentionState init_gaussian(double tau);

/// Same structure, all entries zero (gradient accumulator).
AttentionState zeros_like(const AttentionState& s);

struct AttentionTape {
  std::vector<Index> rows;
  EmbeddingTape embedding;
  Eigen::MatrixXd embedded;   // N × d keys (queries are rows of it)
  Eigen::MatrixXd distances;  // Gaussian: B × N
  Eigen::MatrixXd weights;    // B × N
  const MaskMatrix* mask = nullptr;
};

/// Training-time mixing weights of query rows `rows` over all N training
/// instances in X. `dropout` is the N × d scale matrix (empty: no dropout).
Eigen::MatrixXd training_weights(const AttentionState& state, const Eigen::MatrixXd& X,
                                 std::span<const Index> rows, const MaskMatrix* mask,
                                 const Eigen::MatrixXd& dropout, AttentionTape* tape = nullptr);

/// Accumulates d(loss)/d(parameters) into `grad` given d(loss)/dW.
void training_weights_backward(const AttentionState& state, const AttentionTape& tape,
                               const Eigen::MatrixXd& d_W, AttentionState& grad);

/// Unmasked, dropout-free weights of new queries over the training keys.
Eigen::MatrixXd inference_weights(const AttentionState& state, const Eigen::MatrixXd& keys,
                                  const Eigen::MatrixXd& queries);

}  // namespace isurv
