#pragma once

#include "isurv/data.hpp"
#include "isurv/metrics.hpp"
#include "isurv/models.hpp"
#include "isurv/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace isurv {

// ---------------------------------------------------------------------------
// Configuration

using ConfigMap = std::map<std::string, std::string>;

/// `key = value` lines; blank lines and `#` comments ignored. Keys may use
/// dashes or underscores interchangeably.
ConfigMap parse_config_text(std::string_view text);

/// Every key the harness understands, in canonical (underscore) spelling.
const std::vector<std::string>& known_config_keys();

std::string normalize_key(std::string_view key);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::uint64_t value);

/// Inclusive sampling ranges for the hyperparameter search.
struct SearchSpace {
  double lr_min = 1e-4, lr_max = 1.0;
  double wd_min = 1e-6, wd_max = 5e-2;
  double gamma_min = 1e-6, gamma_max = 3.0;
  double dropout_min = 0.3, dropout_max = 0.8;
  double mask_min = 0.1, mask_max = 0.5;
  double batch_min = 0.1, batch_max = 1.0;
  Index epochs_min = 20, epochs_max = 2000;
  Index window_min = 3, window_max = 10;
  Index dims_min = 64, dims_max = 128;

  void validate() const;
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> train_csv;
  std::optional<std::filesystem::path> test_csv;
  SyntheticSpec synthetic;
  std::string time_column = "time";
  std::string event_column = "event";
  std::vector<Variant> variants{Variant::J};
  ModelConfig model;
  double beran_tau = 0.1;
  bool include_beran = true;
  std::optional<double> horizon;
  double holdout = 0.25;  // test share when only a training CSV is given
  Index outer_repeats = 2;
  Index outer_folds = 3;
  Index inner_folds = 2;
  Index trials = 10;
  SearchSpace search;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Default output directory: $ISURV_OUTPUT_DIR or "isurv-out".
std::filesystem::path default_output_dir();

/// Applies `values` over the defaults. Unknown keys raise UsageError.
ExperimentConfig experiment_from_map(const ConfigMap& values);

/// Sorted `key=value` lines of the effective settings.
std::string canonical_config(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Data plumbing

/// A dataset as a CSV table with `feature_j`, `time`, `event` columns.
CsvTable table_from_dataset(const SurvivalDataset& data);

struct PreparedData {
  SurvivalDataset train;
  SurvivalDataset test;
  Preprocessor preprocessor;  // fitted on the training table
  std::string tag;
};

/// Train/test pair from CSV files (holdout split when no test file) or from
/// the synthetic generator; features preprocessed with training statistics.
PreparedData prepare_data(const ExperimentConfig& config);

/// Stratified by event indicator: fold id per row.
std::vector<Index> stratified_folds(const Eigen::VectorXi& events, Index folds, Rng& rng);

/// Independent per-job seed derived from a master seed and job coordinates.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// ---------------------------------------------------------------------------
// Prediction and evaluation

struct Predictions {
  std::vector<SurvivalCurve> curves;
  Eigen::VectorXd expected;  // predicted times for ranking
};

Predictions predict_isurv(const TrainedModel& model, const Eigen::MatrixXd& X);
Predictions predict_beran(const SurvivalDataset& train, const Eigen::MatrixXd& X, double tau);

/// Evaluation at `candidates` (typically training grid boundaries) up to the
/// horizon (largest test time unless set).
EvaluationReport evaluate_predictions(const Predictions& p, const SurvivalDataset& test,
                                      const Eigen::VectorXd& candidates, std::optional<double> horizon);

EvaluationReport evaluate_model(const TrainedModel& model, const SurvivalDataset& test,
                                std::optional<double> horizon = std::nullopt);
EvaluationReport evaluate_beran(const SurvivalDataset& train, const SurvivalDataset& test, double tau,
                                std::optional<double> horizon = std::nullopt);

/// Lower, precise and upper survival for one query.
struct IntervalSurvival {
  SurvivalCurve lower, precise, upper;
};
IntervalSurvival interval_survival(const TrainedModel& model, const Eigen::RowVectorXd& x);

/// `time,S_lower,S,S_upper` rows.
std::string interval_curve_csv(const IntervalSurvival& s);
/// `time,S` rows.
std::string curve_csv(const SurvivalCurve& c);

// ---------------------------------------------------------------------------
// Nested cross-validation

/// Draws one configuration from the search space (log-uniform for rates,
/// decay and entropy coefficient; uniform otherwise).
ModelConfig sample_config(const ModelConfig& base, const SearchSpace& space, Rng& rng);

struct FoldReport {
  Index repeat = 0;
  Index fold = 0;
  ModelConfig chosen;
  double inner_score = 0.0;
  EvaluationReport report;
};

struct CvSummary {
  Variant variant = Variant::J;
  std::vector<FoldReport> folds;
  double c_index_mean = 0.0, c_index_std = 0.0;
  double ibs_mean = 0.0, ibs_std = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// Outer repeats × folds; in each outer training part, `trials` sampled
/// configurations are scored by inner-fold mean C-index and the best is
/// refitted and evaluated on the held-out fold.
CvSummary run_cv(const SurvivalDataset& data, Variant variant, const ExperimentConfig& config);

/// Number of model fits `run_cv` performs.
Index cv_fit_count(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Sweeps and comparisons

enum class SweepParameter { Features, Censoring, Window };

SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter p);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::Censoring;
  std::optional<double> from, to, step;  // defaults per parameter
  Index repetitions = 1;
  std::vector<Variant> variants{Variant::J};
  bool include_beran = true;
  std::optional<std::filesystem::path> curve_dir;  // per-instance curve files
  Index curve_instances = 3;

  std::vector<double> points() const;
};

struct SweepRow {
  std::string model;
  double value = 0.0;
  Index rep = 0;
  double c_index = 0.0;
  double ibs = 0.0;
  std::optional<double> ks;
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::Censoring;
  bool has_ks = false;
  std::vector<SweepRow> rows;

  std::string to_csv() const;
};

/// Mean over test instances of the KS distance between two curve sets.
double mean_ks(std::span<const SurvivalCurve> a, std::span<const SurvivalCurve> b);

SweepResult run_sweep(const SweepSpec& sweep, const ExperimentConfig& config);

struct ModelComparison {
  std::string model;
  EvaluationReport report;
  SurvivalCurve unconditional;
};

/// Fits each configured variant (plus Beran) on the same prepared data.
std::vector<ModelComparison> compare_models(const PreparedData& data, const ExperimentConfig& config);

}  // namespace isurv
