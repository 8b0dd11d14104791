#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isurv/error.hpp"
#include "isurv/models.hpp"
#include "isurv/serialize.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

using namespace isurv;

namespace {

SurvivalDataset linear_data(Index n, std::uint64_t seed, double censor = 0.2) {
  SyntheticSpec spec;
  spec.n_train = n;
  spec.n_test = 2;
  spec.seed = seed;
  spec.censor_prob = censor;
  return make_dataset(spec).first;
}

ModelConfig quick(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.epochs = 5;
  c.embed_dims = 8;
  c.generations = 4;
  c.fine_tune_epochs = 10;
  return c;
}

TimeGrid grid_with(std::initializer_list<double> b) {
  TimeGrid g;
  g.boundaries.resize(static_cast<Index>(b.size()));
  Index i = 0;
  for (double v : b) g.boundaries[i++] = v;
  return g;
}

struct Silence {
  Silence() { set_warnings_silenced(true); }
  ~Silence() { set_warnings_silenced(false); }
};

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.quantile = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ModelConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ModelConfig{};
  c.initial_tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("zero epochs returns a usable model") {
  const SurvivalDataset d = linear_data(25, 1);
  for (Variant v : {Variant::M, Variant::Q, Variant::J, Variant::JG}) {
    CAPTURE(to_string(v));
    ModelConfig c = quick(v);
    c.epochs = 0;
    const TrainedModel m = train(d, c);
    CHECK(m.loss_history.empty());
    const Eigen::MatrixXd P = predict_distributions(m, d.features);
    CHECK((P.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK((P.array() >= 0.0).all());
  }
}

TEST_CASE("training is deterministic per seed") {
  const SurvivalDataset d = linear_data(30, 2);
  for (Variant v : {Variant::Q, Variant::J, Variant::JG}) {
    CAPTURE(to_string(v));
    ModelConfig c = quick(v);
    c.seed = 17;
    const TrainedModel a = train(d, c);
    const TrainedModel b = train(d, c);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.distributions == b.distributions);
    CHECK(predict_distributions(a, d.features) == predict_distributions(b, d.features));
  }
}

TEST_CASE("iSurvJ training decreases the loss") {
  const SurvivalDataset d = linear_data(30, 3);
  ModelConfig c;
  c.variant = Variant::J;
  const TrainedModel m = train(d, c);
  REQUIRE(m.loss_history.size() == static_cast<std::size_t>(c.epochs));
  CHECK(m.loss_history.back() < m.loss_history.front());
}

TEST_CASE("fine-tuning never ends above its starting loss") {
  const SurvivalDataset d = linear_data(30, 4, 0.4);
  for (Variant v : {Variant::M, Variant::Q}) {
    const TrainedModel m = train(d, quick(v));
    REQUIRE(!m.fine_tune_history.empty());
    double best = m.fine_tune_history.front();
    for (double x : m.fine_tune_history) best = std::min(best, x);
    CHECK(best <= m.fine_tune_history.front());
  }
}

TEST_CASE("fine-tuning keeps uncensored rows degenerate and starts at the given sample") {
  const SurvivalDataset d = linear_data(30, 5, 0.4);
  ModelConfig c = quick(Variant::M);
  TrainedModel m = train(d, c);
  const Index T = m.intervals();
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const auto& l = m.labels[i];
    const Eigen::RowVectorXd row = m.distributions.row(static_cast<Index>(i));
    CHECK(row.sum() == doctest::Approx(1.0));
    if (!l.censored) CHECK(row[l.interval] == doctest::Approx(1.0));
    for (Index j = 0; j < T; ++j)
      if (j < l.support_begin() || j >= l.support_end(T)) CHECK(row[j] == 0.0);
  }

  Eigen::MatrixXd initial = Eigen::MatrixXd::Zero(m.keys.rows(), T);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const auto& l = m.labels[i];
    const Index len = l.support_end(T) - l.support_begin();
    initial.row(static_cast<Index>(i)).segment(l.support_begin(), len).setConstant(1.0 / static_cast<double>(len));
  }
  m.config.fine_tune_epochs = 0;
  fine_tune(m, initial);
  CHECK(m.distributions.isApprox(initial, 1e-12));
}

TEST_CASE("censored rows in the last interval are dropped") {
  Silence quiet;
  SurvivalDataset d = linear_data(20, 6, 0.0);
  Index top = 0;
  d.times.maxCoeff(&top);
  d.events[top] = 0;
  // A grid that ends below the censored time leaves it no later interval.
  Eigen::VectorXd others = d.times;
  others[top] = 0.0;
  const TimeGrid g = build_grid(others, d.events);
  const auto labels = make_labels(g, d.times, d.events);
  const TrainedModel m = train(d, g, labels, quick(Variant::JG));
  CHECK(m.dropped == 1);
  CHECK(m.keys.rows() == 19);
}

TEST_CASE("non-finite learning rate aborts") {
  const SurvivalDataset d = linear_data(20, 7);
  ModelConfig c = quick(Variant::J);
  c.learning_rate = 1e300;
  c.epochs = 30;
  CHECK_THROWS_AS(train(d, c), Error);
}

TEST_CASE("prediction from a single key reproduces its distribution") {
  TrainedModel m;
  m.grid = grid_with({1, 2});
  m.attention = init_gaussian(1.0);
  m.keys = Eigen::MatrixXd::Zero(1, 2);
  m.labels = {{1, false}};
  m.distributions = Eigen::RowVector3d(0, 1, 0);
  CHECK(predict_distribution(m, Eigen::RowVector2d(3, -1)).isApprox(Eigen::RowVector3d(0, 1, 0)));
  CHECK_THROWS_AS(predict_distribution(m, Eigen::RowVector3d(1, 1, 1)), ShapeError);
}

TEST_CASE("gaussian prediction concentrates on a matching key") {
  TrainedModel m;
  m.grid = grid_with({1, 2});
  m.attention = init_gaussian(1e-4);
  m.keys.resize(3, 1);
  m.keys << 0.0, 1.0, 2.0;
  m.labels = {{0, false}, {1, false}, {0, true}};
  m.distributions.resize(3, 3);
  m.distributions << 1, 0, 0, 0, 1, 0, 0, 0.3, 0.7;
  Eigen::RowVectorXd x(1);
  x << 2.0;
  CHECK(predict_distribution(m, x).isApprox(m.distributions.row(2), 1e-9));
}

TEST_CASE("survival from a distribution") {
  const TimeGrid g = grid_with({1, 2});
  const SurvivalCurve s = survival_from_distribution(g, Eigen::RowVector3d(0.2, 0.3, 0.5));
  CHECK(s.times.isApprox(Eigen::Vector3d(0, 1, 2)));
  CHECK(s.values.isApprox(Eigen::Vector3d(1.0, 0.8, 0.5)));
  CHECK(s.at(5.0) == doctest::Approx(0.5));

  const SurvivalCurve drop = survival_from_distribution(g, Eigen::RowVector3d(1, 0, 0));
  CHECK(drop.at(0.5) == 1.0);
  CHECK(drop.at(1.0) == 0.0);
  CHECK_THROWS_AS(survival_from_distribution(g, Eigen::RowVector2d(0.5, 0.5)), ShapeError);
}

TEST_CASE("interval-valued prediction") {
  const TimeGrid g = grid_with({1, 2});
  const std::vector<ImpreciseLabel> labels{{1, false}, {0, true}};
  const IntervalPrediction p = predict_interval_survival(Eigen::RowVector2d(0.6, 0.4), labels, g);
  CHECK(p.lower_probs.isApprox(Eigen::RowVector3d(0, 0.6, 0)));
  CHECK(p.upper_probs.isApprox(Eigen::RowVector3d(0, 1.0, 0.4)));
  CHECK(p.curve.lower.valid());
  CHECK(p.curve.upper.valid());
  // Upper keeps all censored mass alive; lower moves it to the earliest admissible interval.
  CHECK(p.curve.upper.at(1.0) == doctest::Approx(1.0));
  CHECK(p.curve.lower.at(1.0) == doctest::Approx(1.0));
  CHECK(p.curve.upper.at(2.0) == doctest::Approx(0.4));
  CHECK(p.curve.lower.at(2.0) == doctest::Approx(0.0));

  const std::vector<ImpreciseLabel> precise{{1, false}, {0, false}};
  const IntervalPrediction q = predict_interval_survival(Eigen::RowVector2d(0.6, 0.4), precise, g);
  CHECK(q.lower_probs == q.upper_probs);
  CHECK(q.curve.lower.values.isApprox(q.curve.upper.values));
}

TEST_CASE("interval envelope contains the precise curve") {
  const SurvivalDataset d = linear_data(40, 8, 0.5);
  const TrainedModel m = train(d, quick(Variant::JG));
  const Eigen::MatrixXd W = inference_weights(m.attention, m.keys, d.features);
  const Eigen::MatrixXd P = predict_distributions(m, d.features);
  for (Index i = 0; i < d.size(); ++i) {
    const IntervalPrediction ip = predict_interval_survival(W.row(i), m.labels, m.grid);
    const SurvivalCurve s = survival_from_distribution(m.grid, P.row(i));
    CHECK(((ip.curve.lower.values - s.values).array() <= 1e-12).all());
    CHECK(((s.values - ip.curve.upper.values).array() <= 1e-12).all());
  }
}

TEST_CASE("expected time uses interval midpoints") {
  CHECK(expected_time(grid_with({1}), Eigen::RowVector2d(1, 0)) == doctest::Approx(0.5));
  CHECK(expected_time(grid_with({1, 2}), Eigen::RowVector3d(0.5, 0.5, 0)) == doctest::Approx(1.0));
  CHECK(expected_time(grid_with({1, 2}), Eigen::RowVector3d(0, 0, 1)) == doctest::Approx(2.0));
}

TEST_CASE("model serialization round trip") {
  const SurvivalDataset d = linear_data(20, 9);
  for (Variant v : {Variant::J, Variant::JG}) {
    SavedModel saved{train(d, quick(v)), std::nullopt};
    const auto path = std::filesystem::temp_directory_path() / "isurv_model_roundtrip.json";
    save_model(saved, path);
    const SavedModel back = load_model(path);
    CHECK(back.model.distributions == saved.model.distributions);
    CHECK(back.model.grid.boundaries == saved.model.grid.boundaries);
    CHECK(back.model.config.variant == v);
    CHECK(predict_distributions(back.model, d.features) == predict_distributions(saved.model, d.features));
  }
  CHECK_THROWS_AS(model_from_json(nlohmann::ordered_json::parse(R"({"format": "isurv-model", "version": 99})")), FormatError);
}
