#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isurv/attention.hpp"
#include "isurv/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace isurv;

namespace {

Eigen::MatrixXd random_matrix(Index r, Index c, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

AttentionParams unit_projection() {
  AttentionParams p;
  p.query = Eigen::MatrixXd::Ones(1, 1);
  p.key = Eigen::MatrixXd::Ones(1, 1);
  return p;
}

struct Silence {
  Silence() { set_warnings_silenced(true); }
  ~Silence() { set_warnings_silenced(false); }
};

}  // namespace

TEST_CASE("identity embedding returns its input") {
  Rng rng(1);
  EmbeddingParams p;
  p.weight = Eigen::MatrixXd::Identity(3, 3);
  p.bias = Eigen::RowVectorXd::Zero(3);
  p.activation = Activation::Identity;
  const Eigen::MatrixXd X = random_matrix(4, 3, rng);
  CHECK(embed(X, p, false, rng).isApprox(X));
  CHECK(embed(X, p, true, rng).isApprox(X));
}

TEST_CASE("embedding dropout extremes") {
  Rng rng(2);
  EmbeddingParams p = init_embedding(3, 6, 0.0, rng);
  const Eigen::MatrixXd X = random_matrix(5, 3, rng);
  CHECK(embed(X, p, true, rng) == embed(X, p, false, rng));
  p.dropout = 1.0;
  CHECK(embed(X, p, true, rng).isZero(0.0));
  CHECK_FALSE(embed(X, p, false, rng).isZero(0.0));
}

TEST_CASE("embedding rejects the wrong feature count") {
  Rng rng(3);
  const EmbeddingParams p = init_embedding(3, 4, 0.0, rng);
  CHECK_THROWS_AS(embed(Eigen::MatrixXd::Zero(2, 2), p, false, rng), ShapeError);
}

TEST_CASE("raw attention on a one-dimensional example") {
  const Eigen::Vector2d q(1, 2);
  const Eigen::MatrixXd A = raw_attention(q, q, unit_projection());
  Eigen::Matrix2d expected;
  expected << 1, 2, 2, 4;
  CHECK(A.isApprox(expected));

  AttentionParams zero = unit_projection();
  zero.query.setZero();
  CHECK(raw_attention(q, q, zero).isZero(0.0));

  Eigen::MatrixXd empty(2, 0);
  AttentionParams none;
  none.query.resize(0, 0);
  none.key.resize(0, 0);
  CHECK_THROWS_AS(raw_attention(empty, empty, none), DomainError);
}

TEST_CASE("raw attention is linear in the queries") {
  Rng rng(4);
  const AttentionParams p = init_attention(3, rng);
  const Eigen::MatrixXd Q1 = random_matrix(2, 3, rng), Q2 = random_matrix(2, 3, rng);
  const Eigen::MatrixXd K = random_matrix(4, 3, rng);
  const Eigen::MatrixXd lhs = raw_attention(2.0 * Q1 + Q2, K, p);
  const Eigen::MatrixXd rhs = 2.0 * raw_attention(Q1, K, p) + raw_attention(Q2, K, p);
  CHECK(lhs.isApprox(rhs, 1e-12));
}

TEST_CASE("mask extremes and determinism") {
  Rng rng(5);
  const MaskMatrix none = make_mask(4, 0.0, rng);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(none.keep(i, j) == (i != j));

  const MaskMatrix all = make_mask(4, 1.0, rng);
  CHECK_FALSE(all.pattern().any());

  Rng a(42), b(42);
  CHECK((make_mask(10, 0.5, a).pattern() == make_mask(10, 0.5, b).pattern()).all());

  Rng c(6);
  const MaskMatrix half = make_mask(30, 0.5, c);
  for (Index i = 0; i < 30; ++i) CHECK_FALSE(half.keep(i, i));
}

TEST_CASE("row softmax examples") {
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(1, 2);
  CHECK(row_softmax(flat).isApprox(Eigen::RowVector2d(0.5, 0.5)));

  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep(2, 2);
  keep << true, true, true, true;
  const MaskMatrix m(keep);  // diagonal forced off
  Eigen::Matrix2d A;
  A << 1, 2, 2, 4;
  Eigen::Matrix2d expected;
  expected << 0, 1, 1, 0;
  CHECK(row_softmax(A, &m).isApprox(expected));

  // A single surviving entry takes all the weight.
  Eigen::MatrixXd logits(1, 2);
  logits << 5.0, 3.0;
  const std::vector<Index> row{1};
  CHECK(row_softmax(logits, &m, row).isApprox(Eigen::RowVector2d(1.0, 0.0)));
}

TEST_CASE("fully masked rows fall back to uniform off-diagonal weights") {
  Silence quiet;
  Rng rng(7);
  const MaskMatrix all = make_mask(4, 1.0, rng);
  const Eigen::MatrixXd W = row_softmax(random_matrix(4, 4, rng), &all);
  for (Index i = 0; i < 4; ++i) {
    CHECK(W(i, i) == 0.0);
    CHECK(W.row(i).sum() == doctest::Approx(1.0));
    for (Index j = 0; j < 4; ++j)
      if (j != i) CHECK(W(i, j) == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("softmax is invariant to row shifts") {
  Rng rng(8);
  const Eigen::MatrixXd A = random_matrix(5, 5, rng);
  const MaskMatrix m = make_mask(5, 0.3, rng);
  Eigen::MatrixXd shifted = A;
  for (Index i = 0; i < 5; ++i) shifted.row(i).array() += 3.0 * static_cast<double>(i) - 4.0;
  CHECK(row_softmax(A, &m).isApprox(row_softmax(shifted, &m), 1e-12));
}

TEST_CASE("gaussian attention examples") {
  Eigen::MatrixXd keys(2, 1), q(1, 1);
  keys << -1.0, 1.0;
  q << 0.0;
  CHECK(gaussian_attention(q, keys, 0.7).isApprox(Eigen::RowVector2d(0.5, 0.5)));

  Eigen::MatrixXd far(3, 2);
  far << 0, 0, 1, 3, -2, 5;
  Eigen::MatrixXd q2(1, 2);
  q2 << 0.5, 0.5;
  const Eigen::MatrixXd flat = gaussian_attention(q2, far, 1e9);
  CHECK((flat.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-6);

  Eigen::MatrixXd k2(2, 1), q3(1, 1);
  k2 << 0.0, 1.0;
  q3 << 0.0;
  CHECK(gaussian_attention(q3, k2, 0.01)(0, 0) > 0.999);

  CHECK_THROWS_AS(gaussian_attention(q3, k2, 0.0), DomainError);
  CHECK_THROWS_AS(gaussian_attention(q3, k2, -1.0), DomainError);
}

TEST_CASE("attention rows are stochastic") {
  Rng rng(9);
  const Eigen::MatrixXd X = random_matrix(12, 3, rng);
  const MaskMatrix m = make_mask(12, 0.5, rng);
  const AttentionState dot = init_dot_product(3, 8, 0.5, rng);
  const Eigen::MatrixXd drop = dropout_scale(12, 8, 0.5, rng);
  {
    Silence quiet;
    const Eigen::MatrixXd W = training_weights(dot, X, {}, &m, drop);
    CHECK((W.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((W.array() >= 0.0).all());
    for (Index i = 0; i < 12; ++i) CHECK(W(i, i) == 0.0);
  }
  const Eigen::MatrixXd V = inference_weights(dot, X, random_matrix(4, 3, rng));
  CHECK((V.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(inference_weights(dot, X, random_matrix(4, 2, rng)), ShapeError);
}

TEST_CASE("attention gradients match finite differences") {
  Silence quiet;
  Rng rng(10);
  const Index N = 7;
  const Eigen::MatrixXd X = random_matrix(N, 3, rng);
  const MaskMatrix m = make_mask(N, 0.3, rng);
  const std::vector<Index> rows{0, 2, 3, 6};
  const Eigen::MatrixXd G = random_matrix(4, N, rng);

  for (AttentionKind kind : {AttentionKind::DotProduct, AttentionKind::Gaussian}) {
    AttentionState s = kind == AttentionKind::Gaussian ? init_gaussian(0.8) : init_dot_product(3, 4, 0.3, rng);
    const Eigen::MatrixXd drop =
        kind == AttentionKind::Gaussian ? Eigen::MatrixXd() : dropout_scale(N, 4, 0.3, rng);
    auto value = [&](const AttentionState& st) {
      return training_weights(st, X, rows, &m, drop).cwiseProduct(G).sum();
    };
    AttentionTape tape;
    training_weights(s, X, rows, &m, drop, &tape);
    AttentionState grad = zeros_like(s);
    training_weights_backward(s, tape, G, grad);

    std::vector<double> analytic;
    grad.for_each_tensor([&](std::string_view, auto& t, bool) {
      for (Index i = 0; i < t.size(); ++i) analytic.push_back(t.data()[i]);
    });
    std::size_t k = 0;
    const double h = 1e-6;
    s.for_each_tensor([&](std::string_view name, auto& t, bool) {
      for (Index i = 0; i < t.size(); ++i, ++k) {
        const double keep = t.data()[i];
        t.data()[i] = keep + h;
        const double up = value(s);
        t.data()[i] = keep - h;
        const double down = value(s);
        t.data()[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        CAPTURE(name);
        CHECK(std::abs(numeric - analytic[k]) <= 1e-6 * std::max(1.0, std::abs(numeric)));
      }
    });
  }
}
