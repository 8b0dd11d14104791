#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isurv/error.hpp"
#include "isurv/harness.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

using namespace isurv;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "isurv_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int status = -1;
  std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + ISURV_CLI_PATH + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = read_text(err);
  return r;
}

Index csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  Index n = -1;  // header
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

ExperimentConfig small_experiment() {
  ExperimentConfig c = experiment_from_map({});
  c.synthetic.n_train = 45;
  c.synthetic.n_test = 15;
  c.model.epochs = 3;
  c.model.embed_dims = 8;
  c.model.fine_tune_epochs = 5;
  c.model.generations = 3;
  return c;
}

struct Silence {
  Silence() { set_warnings_silenced(true); }
  ~Silence() { set_warnings_silenced(false); }
};

}  // namespace

TEST_CASE("config text parsing") {
  const ConfigMap m = parse_config_text("# comment\nlearning-rate = 0.05\n\n  epochs=10  \nkind = friedman1\n");
  CHECK(m.at("learning_rate") == "0.05");
  CHECK(m.at("epochs") == "10");
  const ExperimentConfig c = experiment_from_map(m);
  CHECK(c.model.learning_rate == doctest::Approx(0.05));
  CHECK(c.model.epochs == 10);
  CHECK(c.synthetic.kind == SyntheticKind::Friedman1);
  CHECK_THROWS_AS(experiment_from_map({{"no_such_key", "1"}}), UsageError);
  CHECK_THROWS_AS(experiment_from_map({{"kind", "bogus"}}), UsageError);
  CHECK_THROWS_AS(experiment_from_map({{"epochs", "many"}}), UsageError);
  CHECK_THROWS_AS(parse_config_text("just words\n"), UsageError);
}

TEST_CASE("variant lists") {
  const ExperimentConfig c = experiment_from_map({{"variants", "isurvm, isurvjg"}});
  REQUIRE(c.variants.size() == 2);
  CHECK(c.variants[0] == Variant::M);
  CHECK(c.variants[1] == Variant::JG);
}

TEST_CASE("config hashing") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex_digest(0xabcULL) == "0000000000000abc");
  const std::string a = canonical_config(experiment_from_map({{"epochs", "10"}}));
  const std::string b = canonical_config(experiment_from_map({{"epochs", "10"}}));
  const std::string c = canonical_config(experiment_from_map({{"epochs", "11"}}));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("stratified folds") {
  Rng rng(1);
  std::bernoulli_distribution ev(0.7);
  Eigen::VectorXi e(90);
  for (Index i = 0; i < 90; ++i) e[i] = ev(rng) ? 1 : 0;
  const double global = e.cast<double>().mean();
  Rng a(5), b(5);
  const auto folds = stratified_folds(e, 3, a);
  CHECK(folds == stratified_folds(e, 3, b));
  for (Index f = 0; f < 3; ++f) {
    double events = 0.0, count = 0.0;
    for (Index i = 0; i < 90; ++i)
      if (folds[static_cast<std::size_t>(i)] == f) {
        ++count;
        events += e[i];
      }
    CHECK(count == doctest::Approx(30.0).epsilon(0.1));
    CHECK(std::abs(events / count - global) <= 0.1);
  }
}

TEST_CASE("derived seeds differ by path") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("nested cross-validation produces one entry per outer fit") {
  Silence quiet;
  ExperimentConfig c = small_experiment();
  c.outer_repeats = 2;
  c.outer_folds = 3;
  c.inner_folds = 2;
  c.trials = 4;
  c.search.epochs_min = 2;
  c.search.epochs_max = 4;
  c.search.dims_min = 4;
  c.search.dims_max = 8;
  auto [train, test] = make_dataset(c.synthetic);
  SurvivalDataset all = train;
  (void)test;
  all = train;
  CHECK(cv_fit_count(c) == 2 * 3 * (4 * 2 + 1));
  const CvSummary s = run_cv(all, Variant::JG, c);
  CHECK(s.folds.size() == 6);
  const auto j = s.to_json();
  CHECK(j.at("folds").size() == 6);
  CHECK(s.c_index_mean > 0.0);
  const CvSummary again = run_cv(all, Variant::JG, c);
  CHECK(again.c_index_mean == s.c_index_mean);
}

TEST_CASE("sampled configurations stay within the search space") {
  const SearchSpace space;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const ModelConfig m = sample_config(ModelConfig{}, space, rng);
    CHECK(m.learning_rate >= space.lr_min);
    CHECK(m.learning_rate <= space.lr_max);
    CHECK(m.gamma >= space.gamma_min);
    CHECK(m.gamma <= space.gamma_max);
    CHECK(m.epochs >= space.epochs_min);
    CHECK(m.epochs <= space.epochs_max);
    CHECK(m.window >= space.window_min);
    CHECK(m.window <= space.window_max);
    CHECK(m.embed_dims >= space.dims_min);
    CHECK(m.embed_dims <= space.dims_max);
    CHECK_NOTHROW(m.validate());
  }
}

TEST_CASE("window sweep row counts") {
  Silence quiet;
  ExperimentConfig c = small_experiment();
  c.synthetic.kind = SyntheticKind::Friedman1;
  SweepSpec s;
  s.parameter = SweepParameter::Window;
  s.from = 0;
  s.to = 3;
  s.step = 1;
  s.repetitions = 2;
  s.variants = {Variant::JG};
  const SweepResult r = run_sweep(s, c);
  std::map<std::string, int> per_model;
  for (const auto& row : r.rows) ++per_model[row.model];
  CHECK(per_model["isurvjg"] == 8);
  CHECK(per_model["beran"] == 8);
  CHECK_FALSE(r.has_ks);
}

TEST_CASE("censoring sweep carries ks only with both comparison models") {
  Silence quiet;
  ExperimentConfig c = small_experiment();
  SweepSpec s;
  s.parameter = SweepParameter::Censoring;
  s.from = 0.0;
  s.to = 0.2;
  s.step = 0.2;
  s.variants = {Variant::JG};
  const SweepResult with = run_sweep(s, c);
  CHECK(with.has_ks);
  CHECK(with.to_csv().find(",ks\n") != std::string::npos);
  for (const auto& row : with.rows) CHECK(row.ks.has_value());

  s.include_beran = false;
  const SweepResult without = run_sweep(s, c);
  CHECK_FALSE(without.has_ks);
  CHECK(without.to_csv().find(",ks") == std::string::npos);
}

TEST_CASE("sweep point defaults") {
  SweepSpec s;
  s.parameter = SweepParameter::Censoring;
  const auto c = s.points();
  CHECK(c.size() == 9);
  CHECK(c.front() == 0.0);
  CHECK(c.back() == doctest::Approx(0.8));
  s.parameter = SweepParameter::Features;
  CHECK(s.points().size() == 10);
  s.parameter = SweepParameter::Window;
  CHECK(s.points().size() == 21);
  CHECK_THROWS_AS(parse_sweep_parameter("bogus"), UsageError);
}

TEST_CASE("cli generate") {
  const fs::path dir = fresh_dir("generate");
  const Run r = cli("generate --kind linear --d 5 --n-train 500 --n-test 300 --censor-prob 0.2 --seed 3 --output-dir \"" +
                        (dir / "a").string() + "\"",
                    dir);
  REQUIRE(r.status == 0);
  CHECK(csv_rows(dir / "a" / "train.csv") == 500);
  CHECK(csv_rows(dir / "a" / "test.csv") == 300);
  const Run again = cli("generate --kind linear --d 5 --n-train 500 --n-test 300 --censor-prob 0.2 --seed 3 "
                        "--output-dir \"" + (dir / "b").string() + "\"",
                        dir);
  REQUIRE(again.status == 0);
  CHECK(read_text(dir / "a" / "train.csv") == read_text(dir / "b" / "train.csv"));

  const Run bad = cli("generate --kind friedman9 --output-dir \"" + (dir / "c").string() + "\"", dir);
  CHECK(bad.status == 2);
  CHECK(bad.err.find("usage") != std::string::npos);
}

TEST_CASE("cli train then eval") {
  const fs::path dir = fresh_dir("train_eval");
  REQUIRE(cli("generate --n-train 60 --n-test 20 --seed 1 --output-dir \"" + dir.string() + "\"", dir).status == 0);
  const std::string common = " --epochs 3 --embed-dims 8 --fine-tune-epochs 5 --generations 3 ";
  const Run t = cli("train --variant isurvj --train \"" + (dir / "train.csv").string() + "\" --test \"" +
                        (dir / "test.csv").string() + "\"" + common + "--output-dir \"" + (dir / "out").string() + "\"",
                    dir);
  REQUIRE(t.status == 0);
  const json report = json::parse(read_text(dir / "out" / "report.json"));
  for (const char* key : {"c_index", "ibs", "seed", "config_hash", "runtime_file"}) CHECK(report.contains(key));
  CHECK(fs::exists(dir / "out" / "timing.json"));

  const Run e = cli("eval --model \"" + (dir / "out" / "model.json").string() + "\" --data \"" +
                        (dir / "train.csv").string() + "\" --report \"" + (dir / "eval.json").string() + "\"",
                    dir);
  REQUIRE(e.status == 0);
  CHECK(json::parse(read_text(dir / "eval.json")).contains("c_index"));

  write_text(dir / "narrow.csv", "feature_1,time,event\n0.1,1,1\n0.5,2,0\n0.7,3,1\n");
  const Run bad = cli("eval --model \"" + (dir / "out" / "model.json").string() + "\" --data \"" +
                          (dir / "narrow.csv").string() + "\"",
                      dir);
  CHECK(bad.status == 1);
  CHECK(bad.err.find("dimension") != std::string::npos);
}

TEST_CASE("cli accepts a gamma override for iSurvM") {
  const fs::path dir = fresh_dir("gamma");
  const Run t = cli("train --variant isurvm --gamma 0.7 --n-train 40 --n-test 10 --epochs 2 --embed-dims 8 "
                    "--generations 3 --fine-tune-epochs 3 --output-dir \"" + dir.string() + "\"",
                    dir);
  REQUIRE(t.status == 0);
  const json model = json::parse(read_text(dir / "model.json"));
  CHECK(model.at("config").at("gamma").get<double>() == doctest::Approx(0.7));
  CHECK(model.at("fine_tune_history").size() == 4);
}

TEST_CASE("cli rejects unknown flags and multiple variants for train") {
  const fs::path dir = fresh_dir("usage");
  CHECK(cli("train --no-such-flag 1", dir).status == 2);
  CHECK(cli("train --variants isurvj,isurvjg --output-dir \"" + dir.string() + "\"", dir).status == 2);
  CHECK(cli("cv --plan-only --outer-repeats 4 --outer-folds 5 --inner-folds 3", dir).status == 0);
}
