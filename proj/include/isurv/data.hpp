#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace isurv {

using Eigen::Index;
using Rng = std::mt19937_64;

/// Feature matrix with one (time, event) pair per row. `events[i] == 1`
/// means the event was observed, 0 means right-censored at `times[i]`.
struct SurvivalDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd times;
  Eigen::VectorXi events;
  std::vector<std::string> feature_names;

  Index size() const { return features.rows(); }
  Index dims() const { return features.cols(); }
  double censored_fraction() const;

  /// Throws ValidationError/SizeError when the dataset invariants fail.
  void validate() const;
  SurvivalDataset subset(std::span<const Index> rows) const;
};

enum class SyntheticKind {
  Friedman1,
  Friedman2,
  Friedman3,
  Interactions,
  Sparse,
  Nonlinear,
  Noisy,
  Linear,
  Quadratic,
  Parabola,
};

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_kind(std::string_view name);
std::vector<SyntheticKind> all_kinds();

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Linear;
  Index n_train = 500;
  Index n_test = 300;
  Index d = 5;
  double weibull_shape = 5.0;
  double censor_prob = 0.2;
  double sparsity = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Noisy caps the shape at 1 (heavy tails); every other kind uses it as is.
  double effective_shape() const;
};

/// Random coefficients shared by every row of one synthetic dataset.
struct ResponseCoefficients {
  Eigen::VectorXd weights;       // Linear, Sparse, Noisy
  Eigen::MatrixXd interactions;  // Interactions: symmetric, zero diagonal
  Eigen::MatrixXd quadratic;     // Quadratic: AᵀA
};

ResponseCoefficients draw_coefficients(SyntheticKind kind, Index d, Rng& rng);

/// Feature rows drawn per kind (uniform on [0,1], the Friedman2/3 rescaling,
/// sparse masking). Parabola uses `parabola_layout` instead.
Eigen::MatrixXd sample_features(const SyntheticSpec& spec, Index n, Rng& rng);

/// Deterministic response for given coefficients.
Eigen::VectorXd response(SyntheticKind kind, const Eigen::MatrixXd& X,
                         const ResponseCoefficients& coef);

Eigen::VectorXd gen_response(SyntheticKind kind, const Eigen::MatrixXd& X,
                             const SyntheticSpec& spec, Rng& rng);

/// Weibull time with scale y/Γ(1+1/k): T = y/Γ(1+1/k)·(−log u)^{1/k}.
double weibull_event_time(double y, double shape, double u);

/// 200 points on [−5,−2], 10 sorted points on [−2,2], 200 points on [2,5].
Eigen::VectorXd parabola_layout(Rng& rng);

std::pair<SurvivalDataset, SurvivalDataset> make_dataset(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(std::string_view name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

/// Column-wise preprocessing fitted on one table and replayable on another:
/// numeric columns are z-scored, categorical columns one-hot encoded with
/// levels in lexicographic order. Column order follows the file.
class Preprocessor {
 public:
  struct Column {
    std::string name;
    bool categorical = false;
    double mean = 0.0;
    double scale = 1.0;
    std::vector<std::string> levels;
  };

  static Preprocessor fit(const CsvTable& table, const std::string& time_column,
                          const std::string& event_column);

  SurvivalDataset transform(const CsvTable& table) const;

  Index output_dims() const;
  const std::vector<Column>& columns() const { return columns_; }
  const std::string& time_column() const { return time_column_; }
  const std::string& event_column() const { return event_column_; }

  Preprocessor() = default;
  Preprocessor(std::vector<Column> columns, std::string time_column, std::string event_column)
      : columns_(std::move(columns)),
        time_column_(std::move(time_column)),
        event_column_(std::move(event_column)) {}

 private:
  std::vector<Column> columns_;
  std::string time_column_;
  std::string event_column_;
};

SurvivalDataset load_csv(const std::filesystem::path& path,
                         const std::string& time_column = "time",
                         const std::string& event_column = "event");

/// Writes `feature_1..feature_d,time,event` with round-trip precision.
void write_csv(const SurvivalDataset& data, const std::filesystem::path& path);

/// Per-column z-score fitted on training features (sample standard deviation).
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

}  // namespace isurv
