#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isurv/data.hpp"
#include "isurv/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

using namespace isurv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name, const std::string& contents) {
  const fs::path dir = fs::temp_directory_path() / "isurv_test_data";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

}  // namespace

TEST_CASE("friedman1 at the cube centre") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(1, 5, 0.5);
  const double y = response(SyntheticKind::Friedman1, X, {})[0];
  CHECK(y == doctest::Approx(10.0 * std::sin(std::numbers::pi / 4.0) + 7.5).epsilon(1e-12));
  CHECK(y == doctest::Approx(14.5711).epsilon(1e-5));
}

TEST_CASE("linear, quadratic and parabola responses") {
  ResponseCoefficients c;
  c.weights = Eigen::Vector2d(0.5, 0.5);
  CHECK(response(SyntheticKind::Linear, Eigen::RowVector2d(1.0, 1.0), c)[0] == doctest::Approx(1.0));

  ResponseCoefficients q;
  q.quadratic = Eigen::Matrix2d::Identity();
  CHECK(response(SyntheticKind::Quadratic, Eigen::RowVector2d(1.0, 0.0), q)[0] == doctest::Approx(1.0));

  Eigen::MatrixXd x(1, 1);
  x << 2.0;
  CHECK(response(SyntheticKind::Parabola, x, {})[0] == doctest::Approx(4.0));
}

TEST_CASE("response rejects too few columns") {
  CHECK_THROWS_AS(response(SyntheticKind::Friedman1, Eigen::MatrixXd::Zero(2, 3), {}), ValidationError);
  CHECK_THROWS_AS(response(SyntheticKind::Parabola, Eigen::MatrixXd::Zero(2, 2), {}), ValidationError);
}

TEST_CASE("weibull event times") {
  const double u = std::exp(-1.0);
  CHECK(weibull_event_time(2.0, 1.0, u) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(weibull_event_time(0.0, 3.0, 0.3) == 0.0);
  CHECK(weibull_event_time(1.0, 2.0, u) == doctest::Approx(1.12838).epsilon(1e-5));
  CHECK_THROWS_AS(weibull_event_time(1.0, 2.0, 0.0), DomainError);
  CHECK_THROWS_AS(weibull_event_time(1.0, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(weibull_event_time(1.0, 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(weibull_event_time(1.0, -1.0, 0.5), DomainError);
}

TEST_CASE("weibull with unit shape has mean equal to the scale") {
  Rng rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    sum += weibull_event_time(3.0, 1.0, u);
  }
  CHECK(sum / n == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("make_dataset without censoring marks every event") {
  SyntheticSpec spec;
  spec.censor_prob = 0.0;
  spec.n_train = 50;
  spec.n_test = 20;
  auto [train, test] = make_dataset(spec);
  CHECK(train.events.sum() == 50);
  CHECK(test.events.sum() == 20);
  CHECK(train.size() == 50);
  CHECK(test.size() == 20);
  CHECK(train.dims() == 5);
}

TEST_CASE("make_dataset is deterministic per seed") {
  SyntheticSpec spec;
  spec.seed = 7;
  spec.kind = SyntheticKind::Friedman1;
  auto a = make_dataset(spec);
  auto b = make_dataset(spec);
  CHECK(a.first.features == b.first.features);
  CHECK(a.first.times == b.first.times);
  CHECK(a.first.events == b.first.events);
  CHECK(a.second.times == b.second.times);

  spec.seed = 8;
  auto c = make_dataset(spec);
  CHECK(c.first.times != a.first.times);
}

TEST_CASE("every synthetic kind produces a valid dataset") {
  for (SyntheticKind kind : all_kinds()) {
    CAPTURE(to_string(kind));
    SyntheticSpec spec;
    spec.kind = kind;
    spec.n_train = 60;
    spec.n_test = 30;
    spec.seed = 3;
    auto [train, test] = make_dataset(spec);
    train.validate();
    test.validate();
    CHECK((train.times.array() >= 0.0).all());
    CHECK(train.features.allFinite());
    CHECK(parse_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_kind("friedman9"), UsageError);
}

TEST_CASE("parabola layout has 410 training points") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::Parabola;
  auto [train, test] = make_dataset(spec);
  CHECK(train.size() == 410);
  CHECK(train.dims() == 1);
  CHECK(test.size() == spec.n_test);
  // The centre region is thinned.
  int centre = 0;
  for (Index i = 0; i < train.size(); ++i)
    if (std::abs(train.features(i, 0)) < 2.0) ++centre;
  CHECK(centre == 10);
}

TEST_CASE("empirical censoring fraction tracks censor_prob") {
  for (double p : {0.2, 0.5}) {
    SyntheticSpec spec;
    spec.censor_prob = p;
    spec.n_train = 8000;
    spec.n_test = 2;
    spec.seed = 5;
    auto [train, test] = make_dataset(spec);
    CHECK(std::abs(train.censored_fraction() - p) < 0.02);
  }
}

TEST_CASE("load_csv standardizes numeric columns") {
  const fs::path p = scratch_file("three.csv", "f1,time,event\n1,1.5,1\n2,2.5,0\n3,0.5,1\n");
  SurvivalDataset d = load_csv(p);
  CHECK(d.size() == 3);
  CHECK(d.dims() == 1);
  CHECK(d.features.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  const double var = (d.features.col(0).array() - d.features.col(0).mean()).square().sum() / 2.0;
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d.times[1] == 2.5);
  CHECK(d.events[1] == 0);
}

TEST_CASE("load_csv error contracts") {
  CHECK_THROWS_AS(load_csv(scratch_file("bad_event.csv", "f1,time,event\n1,1,1\n2,2,2\n3,3,0\n")),
                  ValidationError);
  CHECK_THROWS_AS(load_csv(scratch_file("no_time.csv", "f1,t,event\n1,1,1\n2,2,1\n")), SchemaError);
  CHECK_THROWS_AS(load_csv(scratch_file("one_row.csv", "f1,time,event\n1,1,1\n")), SizeError);
  CHECK_THROWS_AS(load_csv(fs::temp_directory_path() / "isurv_missing_file.csv"), IoError);
}

TEST_CASE("categorical column is one-hot encoded") {
  const fs::path p =
      scratch_file("cat.csv", "cell,time,event\nsquamous,1,1\nlarge,2,1\nadeno,3,0\nlarge,4,1\n");
  SurvivalDataset d = load_csv(p);
  CHECK(d.dims() == 3);
  CHECK(d.size() == 4);
}

TEST_CASE("preprocessor reuses training statistics") {
  const CsvTable train = parse_csv("a,time,event\n0,1,1\n2,2,1\n4,3,0\n");
  const CsvTable test = parse_csv("a,time,event\n2,5,1\n6,1,0\n");
  const Preprocessor pre = Preprocessor::fit(train, "time", "event");
  const SurvivalDataset out = pre.transform(test);
  CHECK(out.features(0, 0) == doctest::Approx(0.0));
  CHECK(out.features(1, 0) == doctest::Approx(2.0));
  const CsvTable wrong = parse_csv("b,time,event\n2,5,1\n6,1,0\n");
  CHECK_THROWS_AS(pre.transform(wrong), ShapeError);
}

TEST_CASE("standardizer gives zero mean and unit spread") {
  Rng rng(2);
  std::normal_distribution<double> g(3.0, 2.0);
  Eigen::MatrixXd X(400, 3);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  const Eigen::MatrixXd Z = Standardizer::fit(X).apply(X);
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(Z.col(j).mean()) < 1e-12);
    const double sd = std::sqrt((Z.col(j).array() - Z.col(j).mean()).square().sum() / (Z.rows() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("csv round trip") {
  SyntheticSpec spec;
  spec.n_train = 20;
  spec.n_test = 5;
  auto [train, test] = make_dataset(spec);
  const fs::path p = fs::temp_directory_path() / "isurv_test_data" / "roundtrip.csv";
  fs::create_directories(p.parent_path());
  write_csv(train, p);
  const CsvTable t = read_csv(p);
  CHECK(t.rows.size() == 20);
  CHECK(t.column("time") >= 0);
  CHECK(t.column("event") >= 0);
}
