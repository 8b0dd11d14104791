// Command-line front end: generate, train, eval, cv, sweep, compare.

#include "isurv/baselines.hpp"
#include "isurv/error.hpp"
#include "isurv/harness.hpp"
#include "isurv/serialize.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace isurv;

namespace {

struct Settings {
  std::string config_file;
  ConfigMap overrides;
};

// Every harness key becomes a `--key-with-dashes` flag on the subcommand.
void add_config_flags(CLI::App* app, Settings& s, const std::vector<std::string>& keys) {
  app->add_option("--config", s.config_file, "key=value configuration file")->check(CLI::ExistingFile);
  for (const auto& key : keys) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option_function<std::string>(
        "--" + flag, [&s, key](const std::string& v) { s.overrides[key] = v; }, "override '" + key + "'");
  }
}

struct Resolved {
  ExperimentConfig config;
  std::string config_hash;           // digest of the config file when given
  std::string resolved_config_hash;  // digest of the effective settings
};

Resolved resolve(const Settings& s) {
  ConfigMap values;
  std::string file_text;
  if (!s.config_file.empty()) {
    file_text = read_text(s.config_file);
    values = parse_config_text(file_text);
  }
  for (const auto& [k, v] : s.overrides) values[k] = v;
  Resolved r;
  r.config = experiment_from_map(values);
  r.config.validate();
  const std::string canonical = canonical_config(r.config);
  r.resolved_config_hash = hex_digest(fnv1a64(canonical));
  r.config_hash = s.config_file.empty() ? r.resolved_config_hash : hex_digest(fnv1a64(file_text));
  return r;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_timing(const fs::path& dir, const std::string& command, double seconds) {
  write_json(dir / "timing.json", json{{"command", command}, {"runtime_seconds", seconds}});
  std::cout << "runtime_seconds " << seconds << "\n";
}

// ---------------------------------------------------------------------------

int cmd_generate(const Settings& s) {
  const Resolved r = resolve(s);
  const auto& c = r.config;
  ensure_dir(c.output_dir);
  const auto [train, test] = make_dataset(c.synthetic);
  write_csv(train, c.output_dir / "train.csv");
  write_csv(test, c.output_dir / "test.csv");
  std::cout << json{{"kind", std::string(to_string(c.synthetic.kind))},
                    {"n_train", train.size()},
                    {"n_test", test.size()},
                    {"d", train.dims()},
                    {"train_censored_fraction", train.censored_fraction()},
                    {"test_censored_fraction", test.censored_fraction()},
                    {"output_dir", c.output_dir.string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const Settings& s) {
  const auto start = std::chrono::steady_clock::now();
  const Resolved r = resolve(s);
  const auto& c = r.config;
  if (c.variants.size() != 1) throw UsageError("train takes exactly one variant");
  ensure_dir(c.output_dir);
  const PreparedData data = prepare_data(c);
  ModelConfig mc = c.model;
  mc.variant = c.variants.front();
  SavedModel saved{train(data.train, mc), data.preprocessor};
  save_model(saved, c.output_dir / "model.json");

  EvaluationReport eval = evaluate_model(saved.model, data.test, c.horizon);
  eval.dataset = data.tag;
  eval.config_hash = r.config_hash;
  json report{{"command", "train"},
              {"model", std::string(to_string(mc.variant))},
              {"dataset", data.tag},
              {"seed", c.seed},
              {"config_hash", r.config_hash},
              {"resolved_config_hash", r.resolved_config_hash},
              {"train_rows", data.train.size()},
              {"test_rows", data.test.size()},
              {"dropped_rows", saved.model.dropped},
              {"final_loss", saved.model.loss_history.empty() ? 0.0 : saved.model.loss_history.back()},
              {"c_index", eval.c_index},
              {"ibs", eval.ibs},
              {"runtime_file", "timing.json"},
              {"model_file", "model.json"},
              {"evaluation", eval.to_json()}};
  write_json(c.output_dir / "report.json", report);
  std::cout << json{{"c_index", eval.c_index}, {"ibs", eval.ibs}, {"config_hash", r.config_hash}}.dump() << "\n";
  write_timing(c.output_dir, "train", seconds_since(start));
  return 0;
}

int cmd_eval(const Settings& s, const std::string& model_path, const std::string& data_path,
             const std::string& report_path) {
  const auto start = std::chrono::steady_clock::now();
  const Resolved r = resolve(s);
  const SavedModel saved = load_model(model_path);
  SurvivalDataset data;
  if (saved.preprocessor) data = saved.preprocessor->transform(read_csv(data_path));
  else data = load_csv(data_path, r.config.time_column, r.config.event_column);
  EvaluationReport eval = evaluate_model(saved.model, data, r.config.horizon);
  eval.dataset = fs::path(data_path).filename().string();
  eval.config_hash = r.config_hash;
  json report = eval.to_json();
  report["runtime_seconds"] = seconds_since(start);
  const std::string text = report.dump(2) + "\n";
  if (report_path.empty()) std::cout << text;
  else write_text(report_path, text);
  return 0;
}

int cmd_cv(const Settings& s, bool plan_only) {
  const auto start = std::chrono::steady_clock::now();
  const Resolved r = resolve(s);
  const auto& c = r.config;
  json plan{{"outer_repeats", c.outer_repeats},
            {"outer_folds", c.outer_folds},
            {"inner_folds", c.inner_folds},
            {"trials", c.trials},
            {"fits_per_model", cv_fit_count(c)},
            {"models", json::array()},
            {"search",
             {{"learning_rate", {c.search.lr_min, c.search.lr_max}},
              {"weight_decay", {c.search.wd_min, c.search.wd_max}},
              {"gamma", {c.search.gamma_min, c.search.gamma_max}},
              {"dropout", {c.search.dropout_min, c.search.dropout_max}},
              {"mask_rate", {c.search.mask_min, c.search.mask_max}},
              {"batch_rate", {c.search.batch_min, c.search.batch_max}},
              {"epochs", {c.search.epochs_min, c.search.epochs_max}},
              {"window", {c.search.window_min, c.search.window_max}},
              {"embed_dims", {c.search.dims_min, c.search.dims_max}}}},
            {"config_hash", r.config_hash}};
  for (Variant v : c.variants) plan["models"].push_back(std::string(to_string(v)));
  if (plan_only) {
    std::cout << plan.dump(2) << "\n";
    return 0;
  }
  ensure_dir(c.output_dir);
  // Cross-validation runs on all available rows: train plus test.
  const PreparedData data = prepare_data(c);
  SurvivalDataset all = data.train;
  all.features.conservativeResize(data.train.size() + data.test.size(), Eigen::NoChange);
  all.features.bottomRows(data.test.size()) = data.test.features;
  all.times.conservativeResize(all.features.rows());
  all.times.tail(data.test.size()) = data.test.times;
  all.events.conservativeResize(all.features.rows());
  all.events.tail(data.test.size()) = data.test.events;

  json summary{{"command", "cv"}, {"dataset", data.tag}, {"seed", c.seed}, {"config_hash", r.config_hash},
               {"resolved_config_hash", r.resolved_config_hash}, {"plan", plan}, {"models", json::array()}};
  for (Variant v : c.variants) {
    const CvSummary cv = run_cv(all, v, c);
    const json j = cv.to_json();
    for (const auto& f : j.at("folds"))
      write_json(c.output_dir / ("cv_" + std::string(to_string(v)) + "_r" + std::to_string(f.at("repeat").get<int>()) +
                                 "_f" + std::to_string(f.at("fold").get<int>()) + ".json"),
                 f);
    summary["models"].push_back(j);
    std::cout << to_string(v) << " c_index " << cv.c_index_mean << " +- " << cv.c_index_std << "  ibs "
              << cv.ibs_mean << " +- " << cv.ibs_std << "\n";
  }
  write_json(c.output_dir / "cv_report.json", summary);
  write_timing(c.output_dir, "cv", seconds_since(start));
  return 0;
}

int cmd_sweep(const Settings& s, SweepSpec sweep, const std::string& param) {
  const auto start = std::chrono::steady_clock::now();
  const Resolved r = resolve(s);
  const auto& c = r.config;
  if (c.train_csv) throw UsageError("sweeps run on synthetic data; drop --train");
  ensure_dir(c.output_dir);
  sweep.parameter = parse_sweep_parameter(param);
  sweep.variants = c.variants;
  sweep.include_beran = c.include_beran;
  if (sweep.curve_dir) sweep.curve_dir = c.output_dir / *sweep.curve_dir;
  const SweepResult result = run_sweep(sweep, c);
  write_text(c.output_dir / "sweep.csv", result.to_csv());
  std::cout << result.rows.size() << " rows written to " << (c.output_dir / "sweep.csv").string() << "\n";
  write_timing(c.output_dir, "sweep", seconds_since(start));
  return 0;
}

int cmd_compare(const Settings& s) {
  const auto start = std::chrono::steady_clock::now();
  const Resolved r = resolve(s);
  const auto& c = r.config;
  ensure_dir(c.output_dir);
  const PreparedData data = prepare_data(c);
  const auto results = compare_models(data, c);
  json out{{"command", "compare"}, {"dataset", data.tag}, {"seed", c.seed}, {"config_hash", r.config_hash},
           {"models", json::array()}};
  const SurvivalCurve km = kaplan_meier(data.test.times, data.test.events);
  write_text(c.output_dir / "km_test.csv", curve_csv(km));
  for (const auto& m : results) {
    json entry = m.report.to_json();
    entry["ks_unconditional_vs_km"] = ks_distance(m.unconditional, km);
    out["models"].push_back(entry);
    write_text(c.output_dir / ("unconditional_" + m.model + ".csv"), curve_csv(m.unconditional));
    std::cout << m.model << " c_index " << m.report.c_index << " ibs " << m.report.ibs << "\n";
  }
  write_json(c.output_dir / "compare.json", out);
  write_timing(c.output_dir, "compare", seconds_since(start));
  return 0;
}

void report_error(const std::string& code, const std::string& message) {
  std::cerr << "error: " << json{{"code", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival modelling with imprecise labels and attention"};
  app.require_subcommand(1);
  const auto& keys = known_config_keys();

  Settings generate_s, train_s, eval_s, cv_s, sweep_s, compare_s;
  auto* generate = app.add_subcommand("generate", "Write synthetic train/test CSV files");
  add_config_flags(generate, generate_s, keys);
  auto* train_cmd = app.add_subcommand("train", "Train one model and write model + report");
  add_config_flags(train_cmd, train_s, keys);

  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on a CSV file");
  add_config_flags(eval, eval_s, keys);
  std::string model_path, data_path, report_path;
  eval->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "CSV with the training columns")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", report_path, "write the report here instead of stdout");

  auto* cv = app.add_subcommand("cv", "Nested cross-validation with random search");
  add_config_flags(cv, cv_s, keys);
  bool plan_only = false;
  cv->add_flag("--plan-only", plan_only, "print the protocol and exit");

  auto* sweep = app.add_subcommand("sweep", "Metric sweep over features, censoring or window");
  add_config_flags(sweep, sweep_s, keys);
  SweepSpec sweep_spec;
  std::string sweep_param = "censoring";
  std::string curve_dir;
  double from = 0, to = 0, step = 0;
  sweep->add_option("--param", sweep_param, "features | censoring | window");
  auto* from_opt = sweep->add_option("--from", from);
  auto* to_opt = sweep->add_option("--to", to);
  auto* step_opt = sweep->add_option("--step", step);
  sweep->add_option("--reps", sweep_spec.repetitions, "repetitions per point");
  sweep->add_option("--curves", curve_dir, "subdirectory for per-instance curve files");
  sweep->add_option("--curve-instances", sweep_spec.curve_instances, "test instances per curve set");

  auto* compare = app.add_subcommand("compare", "Train every listed variant and Beran on one split");
  add_config_flags(compare, compare_s, keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (*generate) return cmd_generate(generate_s);
    if (*train_cmd) return cmd_train(train_s);
    if (*eval) return cmd_eval(eval_s, model_path, data_path, report_path);
    if (*cv) return cmd_cv(cv_s, plan_only);
    if (*sweep) {
      if (*from_opt) sweep_spec.from = from;
      if (*to_opt) sweep_spec.to = to;
      if (*step_opt) sweep_spec.step = step;
      if (!curve_dir.empty()) sweep_spec.curve_dir = curve_dir;
      return cmd_sweep(sweep_s, sweep_spec, sweep_param);
    }
    if (*compare) return cmd_compare(compare_s);
  } catch (const UsageError& e) {
    report_error(e.code(), e.what());
    return 2;
  } catch (const Error& e) {
    report_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
