#include "isurv/harness.hpp"

#include "isurv/baselines.hpp"
#include "isurv/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>

namespace isurv {

using json = nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto s = trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw UsageError("value '" + text + "' for '" + key + "' is not a number");
  return v;
}

Index to_index(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto s = trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError("value '" + text + "' for '" + key + "' is not an integer");
  return static_cast<Index>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto s = trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError("value '" + text + "' for '" + key + "' is not a non-negative integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw UsageError("value '" + text + "' for '" + key + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::pair<double, double> to_range(const std::string& key, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("range for '" + key + "' must be lo:hi");
  return {to_double(key, text.substr(0, colon)), to_double(key, text.substr(colon + 1))};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string normalize_key(std::string_view key) {
  std::string out(trim(key));
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("config line " + std::to_string(line_no) + " is not key=value");
    const std::string key = normalize_key(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + " has an empty key");
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "train", "test", "time_column", "event_column", "kind", "n_train", "n_test", "d", "weibull_shape",
      "censor_prob", "sparsity", "data_seed", "variant", "variants", "epochs", "learning_rate", "gamma",
      "quantile", "generations", "window", "mask_rate", "embed_dims", "dropout", "batch_rate", "weight_decay",
      "initial_tau", "fine_tune_epochs", "fine_tune_learning_rate", "beran_tau", "beran", "horizon", "holdout",
      "outer_repeats", "outer_folds", "inner_folds", "trials", "search_lr", "search_weight_decay",
      "search_gamma", "search_dropout", "search_mask_rate", "search_batch_rate", "search_epochs",
      "search_window", "search_embed_dims", "output_dir", "seed"};
  return keys;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<std::size_t>(i)] = digits[value & 0xF];
  return out;
}

void SearchSpace::validate() const {
  auto check = [](double lo, double hi, const char* name, bool positive) {
    if (!(lo <= hi) || (positive && !(lo > 0.0)))
      throw ValidationError(std::string("invalid search range for ") + name);
  };
  check(lr_min, lr_max, "learning rate", true);
  check(wd_min, wd_max, "weight decay", true);
  check(gamma_min, gamma_max, "gamma", true);
  check(dropout_min, dropout_max, "dropout", false);
  check(mask_min, mask_max, "mask rate", false);
  check(batch_min, batch_max, "batch rate", true);
  check(static_cast<double>(epochs_min), static_cast<double>(epochs_max), "epochs", false);
  check(static_cast<double>(window_min), static_cast<double>(window_max), "window", false);
  check(static_cast<double>(dims_min), static_cast<double>(dims_max), "embedding dims", true);
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!train_csv) synthetic.validate();
  if (variants.empty()) throw ValidationError("at least one model variant required");
  if (!(beran_tau > 0.0)) throw ValidationError("beran tau must be positive");
  if (!(holdout > 0.0 && holdout < 1.0)) throw ValidationError("holdout share must lie in (0,1)");
  if (outer_repeats < 1) throw ValidationError("outer repeats must be at least 1");
  if (outer_folds < 2 || inner_folds < 2) throw ValidationError("folds must be at least 2");
  if (trials < 1) throw ValidationError("trial count must be at least 1");
  if (horizon && !(*horizon > 0.0)) throw ValidationError("horizon must be positive");
  search.validate();
  for (const auto* p : {&train_csv, &test_csv}) {
    if (*p && !std::filesystem::exists(**p)) throw IoError("input file '" + (*p)->string() + "' does not exist");
  }
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("ISURV_OUTPUT_DIR"); env && *env) return env;
  return "isurv-out";
}

ExperimentConfig experiment_from_map(const ConfigMap& values) {
  ExperimentConfig c;
  c.output_dir = default_output_dir();
  bool data_seed_set = false;
  const auto& known = known_config_keys();
  for (const auto& [raw_key, v] : values) {
    const std::string k = normalize_key(raw_key);
    if (std::find(known.begin(), known.end(), k) == known.end()) throw UsageError("unknown config key '" + k + "'");
    auto& m = c.model;
    auto& s = c.synthetic;
    if (k == "train") c.train_csv = v;
    else if (k == "test") c.test_csv = v;
    else if (k == "time_column") c.time_column = v;
    else if (k == "event_column") c.event_column = v;
    else if (k == "kind") {
      try {
        s.kind = parse_kind(v);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    } else if (k == "n_train") s.n_train = to_index(k, v);
    else if (k == "n_test") s.n_test = to_index(k, v);
    else if (k == "d") s.d = to_index(k, v);
    else if (k == "weibull_shape") s.weibull_shape = to_double(k, v);
    else if (k == "censor_prob") s.censor_prob = to_double(k, v);
    else if (k == "sparsity") s.sparsity = to_double(k, v);
    else if (k == "data_seed") {
      s.seed = to_seed(k, v);
      data_seed_set = true;
    } else if (k == "variant" || k == "variants") {
      c.variants.clear();
      for (const auto& name : split_list(v)) {
        try {
          c.variants.push_back(parse_variant(name));
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      }
    } else if (k == "epochs") m.epochs = to_index(k, v);
    else if (k == "learning_rate") m.learning_rate = to_double(k, v);
    else if (k == "gamma") m.gamma = to_double(k, v);
    else if (k == "quantile") m.quantile = to_double(k, v);
    else if (k == "generations") m.generations = to_index(k, v);
    else if (k == "window") m.window = to_index(k, v);
    else if (k == "mask_rate") m.mask_rate = to_double(k, v);
    else if (k == "embed_dims") m.embed_dims = to_index(k, v);
    else if (k == "dropout") m.dropout = to_double(k, v);
    else if (k == "batch_rate") m.batch_rate = to_double(k, v);
    else if (k == "weight_decay") m.weight_decay = to_double(k, v);
    else if (k == "initial_tau") m.initial_tau = to_double(k, v);
    else if (k == "fine_tune_epochs") m.fine_tune_epochs = to_index(k, v);
    else if (k == "fine_tune_learning_rate") m.fine_tune_learning_rate = to_double(k, v);
    else if (k == "beran_tau") c.beran_tau = to_double(k, v);
    else if (k == "beran") c.include_beran = to_bool(k, v);
    else if (k == "horizon") c.horizon = to_double(k, v);
    else if (k == "holdout") c.holdout = to_double(k, v);
    else if (k == "outer_repeats") c.outer_repeats = to_index(k, v);
    else if (k == "outer_folds") c.outer_folds = to_index(k, v);
    else if (k == "inner_folds") c.inner_folds = to_index(k, v);
    else if (k == "trials") c.trials = to_index(k, v);
    else if (k == "search_lr") std::tie(c.search.lr_min, c.search.lr_max) = to_range(k, v);
    else if (k == "search_weight_decay") std::tie(c.search.wd_min, c.search.wd_max) = to_range(k, v);
    else if (k == "search_gamma") std::tie(c.search.gamma_min, c.search.gamma_max) = to_range(k, v);
    else if (k == "search_dropout") std::tie(c.search.dropout_min, c.search.dropout_max) = to_range(k, v);
    else if (k == "search_mask_rate") std::tie(c.search.mask_min, c.search.mask_max) = to_range(k, v);
    else if (k == "search_batch_rate") std::tie(c.search.batch_min, c.search.batch_max) = to_range(k, v);
    else if (k == "search_epochs" || k == "search_window" || k == "search_embed_dims") {
      const auto [lo, hi] = to_range(k, v);
      Index& a = k == "search_epochs" ? c.search.epochs_min : k == "search_window" ? c.search.window_min : c.search.dims_min;
      Index& b = k == "search_epochs" ? c.search.epochs_max : k == "search_window" ? c.search.window_max : c.search.dims_max;
      a = static_cast<Index>(std::llround(lo));
      b = static_cast<Index>(std::llround(hi));
    } else if (k == "output_dir") c.output_dir = v;
    else if (k == "seed") c.seed = to_seed(k, v);
  }
  c.model.seed = c.seed;
  if (!data_seed_set) c.synthetic.seed = c.seed;
  return c;
}

std::string canonical_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  const json model = config_to_json(c.model);
  for (const auto& [k, v] : model.items()) {
    if (k == "variant") continue;
    kv[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  std::string variants;
  for (Variant v : c.variants) variants += (variants.empty() ? "" : ",") + std::string(to_string(v));
  kv["variants"] = variants;
  if (c.train_csv) kv["train"] = c.train_csv->string();
  if (c.test_csv) kv["test"] = c.test_csv->string();
  if (!c.train_csv) {
    kv["kind"] = std::string(to_string(c.synthetic.kind));
    kv["n_train"] = std::to_string(c.synthetic.n_train);
    kv["n_test"] = std::to_string(c.synthetic.n_test);
    kv["d"] = std::to_string(c.synthetic.d);
    kv["weibull_shape"] = format_double(c.synthetic.weibull_shape);
    kv["censor_prob"] = format_double(c.synthetic.censor_prob);
    kv["sparsity"] = format_double(c.synthetic.sparsity);
    kv["data_seed"] = std::to_string(c.synthetic.seed);
  }
  kv["time_column"] = c.time_column;
  kv["event_column"] = c.event_column;
  kv["beran_tau"] = format_double(c.beran_tau);
  kv["beran"] = c.include_beran ? "true" : "false";
  kv["horizon"] = c.horizon ? format_double(*c.horizon) : "max_test_time";
  kv["holdout"] = format_double(c.holdout);
  kv["outer_repeats"] = std::to_string(c.outer_repeats);
  kv["outer_folds"] = std::to_string(c.outer_folds);
  kv["inner_folds"] = std::to_string(c.inner_folds);
  kv["trials"] = std::to_string(c.trials);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------

CsvTable table_from_dataset(const SurvivalDataset& data) {
  CsvTable t;
  for (Index j = 0; j < data.dims(); ++j) t.header.push_back("feature_" + std::to_string(j + 1));
  t.header.emplace_back("time");
  t.header.emplace_back("event");
  for (Index i = 0; i < data.size(); ++i) {
    std::vector<std::string> row;
    for (Index j = 0; j < data.dims(); ++j) row.push_back(format_double(data.features(i, j)));
    row.push_back(format_double(data.times[i]));
    row.push_back(std::to_string(data.events[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
  for (auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  Rng rng(seq);
  return rng();
}

std::vector<Index> stratified_folds(const Eigen::VectorXi& events, Index folds, Rng& rng) {
  const Index n = events.size();
  if (folds < 2) throw ValidationError("folds must be at least 2");
  if (n < folds) throw SizeError("fewer rows (" + std::to_string(n) + ") than folds (" + std::to_string(folds) + ")");
  std::vector<Index> observed, censored;
  for (Index i = 0; i < n; ++i) (events[i] == 1 ? observed : censored).push_back(i);
  if (static_cast<Index>(observed.size()) < folds)
    throw ValidationError("only " + std::to_string(observed.size()) + " events for " + std::to_string(folds) +
                          " folds; some fold would have no events");
  std::shuffle(observed.begin(), observed.end(), rng);
  std::shuffle(censored.begin(), censored.end(), rng);
  std::vector<Index> fold(static_cast<std::size_t>(n), 0);
  Index k = 0;
  for (Index i : observed) fold[static_cast<std::size_t>(i)] = k++ % folds;
  for (Index i : censored) fold[static_cast<std::size_t>(i)] = k++ % folds;
  return fold;
}

namespace {

std::pair<std::vector<Index>, std::vector<Index>> split_by_fold(const std::vector<Index>& fold, Index f) {
  std::vector<Index> train, test;
  for (Index i = 0; i < static_cast<Index>(fold.size()); ++i) (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
  return {train, test};
}

// Holdout rows chosen per event stratum.
std::vector<bool> holdout_rows(const CsvTable& table, const std::string& event_column, double share, Rng& rng) {
  const Index ej = table.column(event_column);
  if (ej < 0) throw SchemaError("missing event column '" + event_column + "'");
  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cell = table.rows[r][static_cast<std::size_t>(ej)];
    (trim(cell) == "1" ? pos : neg).push_back(r);
  }
  std::vector<bool> test(table.rows.size(), false);
  for (auto* group : {&pos, &neg}) {
    std::shuffle(group->begin(), group->end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(share * static_cast<double>(group->size())));
    for (std::size_t i = 0; i < take; ++i) test[(*group)[i]] = true;
  }
  return test;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  CsvTable train_table, test_table;
  if (config.train_csv) {
    const CsvTable full = read_csv(*config.train_csv);
    out.tag = config.train_csv->filename().string();
    if (config.test_csv) {
      train_table = full;
      test_table = read_csv(*config.test_csv);
    } else {
      Rng rng(derive_seed(config.seed, {0x686f6c64}));
      const auto test_rows = holdout_rows(full, config.event_column, config.holdout, rng);
      train_table.header = test_table.header = full.header;
      for (std::size_t r = 0; r < full.rows.size(); ++r) (test_rows[r] ? test_table : train_table).rows.push_back(full.rows[r]);
    }
  } else {
    const auto [train, test] = make_dataset(config.synthetic);
    train_table = table_from_dataset(train);
    test_table = table_from_dataset(test);
    out.tag = std::string(to_string(config.synthetic.kind));
  }
  out.preprocessor = Preprocessor::fit(train_table, config.time_column, config.event_column);
  out.train = out.preprocessor.transform(train_table);
  out.test = out.preprocessor.transform(test_table);
  return out;
}

// ---------------------------------------------------------------------------

Predictions predict_isurv(const TrainedModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd P = predict_distributions(model, X);
  Predictions out;
  out.expected = expected_times(model.grid, P);
  out.curves.reserve(static_cast<std::size_t>(P.rows()));
  for (Index i = 0; i < P.rows(); ++i) out.curves.push_back(survival_from_distribution(model.grid, P.row(i)));
  return out;
}

Predictions predict_beran(const SurvivalDataset& train, const Eigen::MatrixXd& X, double tau) {
  Predictions out;
  out.expected.resize(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    out.curves.push_back(beran(train, X.row(i), tau));
    out.expected[i] = out.curves.back().expected_time();
  }
  return out;
}

EvaluationReport evaluate_predictions(const Predictions& p, const SurvivalDataset& test,
                                      const Eigen::VectorXd& candidates, std::optional<double> horizon) {
  const Eigen::VectorXd eval_times = evaluation_times(candidates, test.times, horizon);
  return evaluate_curves(p.curves, p.expected, test.times, test.events, eval_times);
}

EvaluationReport evaluate_model(const TrainedModel& model, const SurvivalDataset& test,
                                std::optional<double> horizon) {
  if (test.dims() != model.feature_dims())
    throw ShapeError("dimension mismatch: model expects " + std::to_string(model.feature_dims()) +
                     " features, data has " + std::to_string(test.dims()));
  EvaluationReport r = evaluate_predictions(predict_isurv(model, test.features), test, model.grid.boundaries, horizon);
  r.model = std::string(to_string(model.config.variant));
  r.seed = model.config.seed;
  return r;
}

EvaluationReport evaluate_beran(const SurvivalDataset& train, const SurvivalDataset& test, double tau,
                                std::optional<double> horizon) {
  if (test.dims() != train.dims()) throw ShapeError("dimension mismatch between training and test features");
  const TimeGrid grid = build_grid(train.times, train.events);
  EvaluationReport r = evaluate_predictions(predict_beran(train, test.features, tau), test, grid.boundaries, horizon);
  r.model = "beran";
  return r;
}

IntervalSurvival interval_survival(const TrainedModel& model, const Eigen::RowVectorXd& x) {
  const Eigen::MatrixXd W = inference_weights(model.attention, model.keys, Eigen::MatrixXd(x));
  const IntervalPrediction ip = predict_interval_survival(W.row(0), model.labels, model.grid);
  return {ip.curve.lower, survival_from_distribution(model.grid, mix_probabilities(W, model.distributions).row(0)),
          ip.curve.upper};
}

std::string interval_curve_csv(const IntervalSurvival& s) {
  std::string out = "time,S_lower,S,S_upper\n";
  for (Index k = 0; k < s.precise.times.size(); ++k)
    out += format_double(s.precise.times[k]) + "," + format_double(s.lower.values[k]) + "," +
           format_double(s.precise.values[k]) + "," + format_double(s.upper.values[k]) + "\n";
  return out;
}

std::string curve_csv(const SurvivalCurve& c) {
  std::string out = "time,S\n";
  for (Index k = 0; k < c.times.size(); ++k) out += format_double(c.times[k]) + "," + format_double(c.values[k]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

ModelConfig sample_config(const ModelConfig& base, const SearchSpace& s, Rng& rng) {
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto log_uniform = [&](double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); };
  auto integer = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  ModelConfig c = base;
  c.learning_rate = log_uniform(s.lr_min, s.lr_max);
  c.weight_decay = log_uniform(s.wd_min, s.wd_max);
  c.gamma = log_uniform(s.gamma_min, s.gamma_max);
  c.dropout = uniform(s.dropout_min, s.dropout_max);
  c.mask_rate = uniform(s.mask_min, s.mask_max);
  c.batch_rate = uniform(s.batch_min, s.batch_max);
  c.epochs = integer(s.epochs_min, s.epochs_max);
  c.window = integer(s.window_min, s.window_max);
  c.embed_dims = integer(s.dims_min, s.dims_max);
  return c;
}

Index cv_fit_count(const ExperimentConfig& c) {
  return c.outer_repeats * c.outer_folds * (c.trials * c.inner_folds + 1);
}

namespace {

SurvivalDataset standardized(const SurvivalDataset& d, const Standardizer& s) {
  SurvivalDataset out = d;
  out.features = s.apply(d.features);
  return out;
}

double fit_and_score(const SurvivalDataset& train, const SurvivalDataset& test, const ModelConfig& config,
                     std::optional<double> horizon, EvaluationReport* report) {
  const Standardizer s = Standardizer::fit(train.features);
  const SurvivalDataset tr = standardized(train, s), te = standardized(test, s);
  const TrainedModel model = isurv::train(tr, config);
  EvaluationReport r = evaluate_model(model, te, horizon);
  if (report) *report = r;
  return r.c_index;
}

}  // namespace

CvSummary run_cv(const SurvivalDataset& data, Variant variant, const ExperimentConfig& config) {
  CvSummary out;
  out.variant = variant;
  ModelConfig base = config.model;
  base.variant = variant;
  std::vector<double> cs, ibss;
  for (Index rep = 0; rep < config.outer_repeats; ++rep) {
    Rng fold_rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(rep)}));
    const auto outer = stratified_folds(data.events, config.outer_folds, fold_rng);
    for (Index f = 0; f < config.outer_folds; ++f) {
      const auto [train_rows, test_rows] = split_by_fold(outer, f);
      const SurvivalDataset train = data.subset(train_rows), test = data.subset(test_rows);

      Rng inner_rng(derive_seed(config.seed, {2, static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(f)}));
      const auto inner = stratified_folds(train.events, config.inner_folds, inner_rng);
      Rng search_rng(derive_seed(config.seed, {3, static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(f)}));
      FoldReport fr;
      fr.repeat = rep;
      fr.fold = f;
      fr.inner_score = -1.0;
      for (Index t = 0; t < config.trials; ++t) {
        ModelConfig candidate = sample_config(base, config.search, search_rng);
        candidate.seed = derive_seed(config.seed, {4, static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(f),
                                                   static_cast<std::uint64_t>(t)});
        double score = 0.0;
        for (Index g = 0; g < config.inner_folds; ++g) {
          const auto [itr, ite] = split_by_fold(inner, g);
          try {
            score += fit_and_score(train.subset(itr), train.subset(ite), candidate, std::nullopt, nullptr);
          } catch (const TrainingError& e) {
            warn(std::string("trial discarded: ") + e.what());
            score = -1.0 * static_cast<double>(config.inner_folds);
            break;
          }
        }
        score /= static_cast<double>(config.inner_folds);
        if (score > fr.inner_score) {
          fr.inner_score = score;
          fr.chosen = candidate;
        }
      }
      fit_and_score(train, test, fr.chosen, config.horizon, &fr.report);
      fr.report.dataset = "outer_" + std::to_string(rep) + "_" + std::to_string(f);
      cs.push_back(fr.report.c_index);
      ibss.push_back(fr.report.ibs);
      out.folds.push_back(std::move(fr));
    }
  }
  out.c_index_mean = mean_of(cs);
  out.c_index_std = std_of(cs);
  out.ibs_mean = mean_of(ibss);
  out.ibs_std = std_of(ibss);
  return out;
}

json CvSummary::to_json() const {
  json folds_json = json::array();
  for (const auto& f : folds) {
    json entry{{"repeat", f.repeat}, {"fold", f.fold}, {"inner_c_index", f.inner_score},
               {"config", config_to_json(f.chosen)}, {"report", f.report.to_json()}};
    folds_json.push_back(std::move(entry));
  }
  return json{{"model", std::string(to_string(variant))},
              {"c_index_mean", c_index_mean},
              {"c_index_std", c_index_std},
              {"ibs_mean", ibs_mean},
              {"ibs_std", ibs_std},
              {"folds", std::move(folds_json)}};
}

// ---------------------------------------------------------------------------

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "features" || name == "d") return SweepParameter::Features;
  if (name == "censoring" || name == "censor_prob") return SweepParameter::Censoring;
  if (name == "window" || name == "k") return SweepParameter::Window;
  throw UsageError("unknown sweep parameter '" + std::string(name) + "' (features, censoring, window)");
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Features: return "features";
    case SweepParameter::Censoring: return "censoring";
    case SweepParameter::Window: return "window";
  }
  return "?";
}

std::vector<double> SweepSpec::points() const {
  double lo = 0, hi = 0, st = 1;
  switch (parameter) {
    case SweepParameter::Features: lo = 1, hi = 10, st = 1; break;
    case SweepParameter::Censoring: lo = 0, hi = 0.8, st = 0.1; break;
    case SweepParameter::Window: lo = 0, hi = 20, st = 1; break;
  }
  lo = from.value_or(lo);
  hi = to.value_or(hi);
  st = step.value_or(st);
  if (!(st > 0.0) || hi < lo) throw ValidationError("invalid sweep range");
  std::vector<double> out;
  const auto count = static_cast<Index>(std::floor((hi - lo) / st + 1e-9));
  for (Index i = 0; i <= count; ++i) {
    double v = lo + static_cast<double>(i) * st;
    v = std::round(v * 1e9) / 1e9;  // keep 0.1 steps printable
    out.push_back(v);
  }
  return out;
}

std::string SweepResult::to_csv() const {
  std::string out = "model,param,value,rep,c_index,ibs";
  if (has_ks) out += ",ks";
  out += "\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::string(to_string(parameter)) + "," + format_double(r.value) + "," +
           std::to_string(r.rep) + "," + format_double(r.c_index) + "," + format_double(r.ibs);
    if (has_ks) out += "," + (r.ks ? format_double(*r.ks) : std::string());
    out += "\n";
  }
  return out;
}

double mean_ks(std::span<const SurvivalCurve> a, std::span<const SurvivalCurve> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("curve sets differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += ks_distance(a[i], b[i]);
  return total / static_cast<double>(a.size());
}

namespace {

void write_curve_files(const std::filesystem::path& dir, const std::string& stem, const TrainedModel& model,
                       const SurvivalDataset& test, const Predictions& pred, Index instances) {
  std::filesystem::create_directories(dir);
  for (Index i = 0; i < std::min(instances, test.size()); ++i)
    write_text(dir / (stem + "_instance" + std::to_string(i) + ".csv"),
               interval_curve_csv(interval_survival(model, test.features.row(i))));
  write_text(dir / (stem + "_unconditional.csv"), curve_csv(unconditional_sf(pred.curves)));
}

}  // namespace

SweepResult run_sweep(const SweepSpec& sweep, const ExperimentConfig& config) {
  SweepResult out;
  out.parameter = sweep.parameter;
  if (sweep.repetitions < 1) throw ValidationError("sweep repetitions must be at least 1");
  const bool has_jg = std::find(sweep.variants.begin(), sweep.variants.end(), Variant::JG) != sweep.variants.end();
  out.has_ks = sweep.parameter == SweepParameter::Censoring && has_jg && sweep.include_beran;

  const auto points = sweep.points();
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const double value = points[pi];
    for (Index rep = 0; rep < sweep.repetitions; ++rep) {
      SyntheticSpec spec = config.synthetic;
      ModelConfig model_config = config.model;
      if (sweep.parameter == SweepParameter::Features) spec.d = static_cast<Index>(std::llround(value));
      if (sweep.parameter == SweepParameter::Censoring) spec.censor_prob = value;
      if (sweep.parameter == SweepParameter::Window) model_config.window = static_cast<Index>(std::llround(value));
      // Same data seed across sweep points so only the swept factor changes.
      spec.seed = derive_seed(config.seed, {5, static_cast<std::uint64_t>(rep)});
      auto [train, test] = make_dataset(spec);
      const Standardizer s = Standardizer::fit(train.features);
      train.features = s.apply(train.features);
      test.features = s.apply(test.features);

      std::optional<Predictions> jg_pred;
      std::vector<SweepRow> point_rows;
      for (Variant v : sweep.variants) {
        ModelConfig mc = model_config;
        mc.variant = v;
        mc.seed = derive_seed(config.seed, {6, static_cast<std::uint64_t>(rep)});
        const TrainedModel model = isurv::train(train, mc);
        Predictions pred = predict_isurv(model, test.features);
        const EvaluationReport r = evaluate_predictions(pred, test, model.grid.boundaries, config.horizon);
        point_rows.push_back({std::string(to_string(v)), value, rep, r.c_index, r.ibs, std::nullopt});
        if (sweep.curve_dir && rep == 0) {
          write_curve_files(*sweep.curve_dir,
                            std::string(to_string(v)) + "_" + std::string(to_string(sweep.parameter)) + "_" +
                                format_double(value),
                            model, test, pred, sweep.curve_instances);
        }
        if (v == Variant::JG) jg_pred = std::move(pred);
      }
      if (sweep.include_beran) {
        const TimeGrid grid = build_grid(train.times, train.events);
        const Predictions pred = predict_beran(train, test.features, config.beran_tau);
        const EvaluationReport r = evaluate_predictions(pred, test, grid.boundaries, config.horizon);
        SweepRow row{"beran", value, rep, r.c_index, r.ibs, std::nullopt};
        if (out.has_ks && jg_pred) {
          const double ks = mean_ks(jg_pred->curves, pred.curves);
          row.ks = ks;
          for (auto& pr : point_rows)
            if (pr.model == to_string(Variant::JG)) pr.ks = ks;
        }
        if (sweep.curve_dir && rep == 0)
          write_text(*sweep.curve_dir / ("beran_" + std::string(to_string(sweep.parameter)) + "_" +
                                         format_double(value) + "_unconditional.csv"),
                     curve_csv(unconditional_sf(pred.curves)));
        point_rows.push_back(row);
      }
      out.rows.insert(out.rows.end(), point_rows.begin(), point_rows.end());
    }
  }
  return out;
}

std::vector<ModelComparison> compare_models(const PreparedData& data, const ExperimentConfig& config) {
  std::vector<ModelComparison> out;
  for (Variant v : config.variants) {
    ModelConfig mc = config.model;
    mc.variant = v;
    const TrainedModel model = isurv::train(data.train, mc);
    const Predictions pred = predict_isurv(model, data.test.features);
    ModelComparison c{std::string(to_string(v)),
                      evaluate_predictions(pred, data.test, model.grid.boundaries, config.horizon),
                      unconditional_sf(pred.curves)};
    c.report.model = c.model;
    c.report.dataset = data.tag;
    c.report.seed = mc.seed;
    out.push_back(std::move(c));
  }
  if (config.include_beran) {
    const TimeGrid grid = build_grid(data.train.times, data.train.events);
    const Predictions pred = predict_beran(data.train, data.test.features, config.beran_tau);
    ModelComparison c{"beran", evaluate_predictions(pred, data.test, grid.boundaries, config.horizon),
                      unconditional_sf(pred.curves)};
    c.report.model = "beran";
    c.report.dataset = data.tag;
    c.report.seed = config.seed;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace isurv
