#include "isurv/data.hpp"

#include "isurv/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace isurv {

namespace {

constexpr std::pair<SyntheticKind, std::string_view> kKindNames[] = {
    {SyntheticKind::Friedman1, "friedman1"},     {SyntheticKind::Friedman2, "friedman2"},
    {SyntheticKind::Friedman3, "friedman3"},     {SyntheticKind::Interactions, "interactions"},
    {SyntheticKind::Sparse, "sparse"},           {SyntheticKind::Nonlinear, "nonlinear"},
    {SyntheticKind::Noisy, "noisy"},             {SyntheticKind::Linear, "linear"},
    {SyntheticKind::Quadratic, "quadratic"},     {SyntheticKind::Parabola, "parabola"},
};

Index min_dims(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Friedman1:
    case SyntheticKind::Nonlinear:
      return 5;
    case SyntheticKind::Friedman2:
    case SyntheticKind::Friedman3:
      return 4;
    case SyntheticKind::Interactions:
      return 2;
    default:
      return 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

}  // namespace

// ---------------------------------------------------------------------------
// SurvivalDataset

double SurvivalDataset::censored_fraction() const {
  if (events.size() == 0) return 0.0;
  return 1.0 - events.cast<double>().mean();
}

void SurvivalDataset::validate() const {
  const Index n = features.rows();
  if (times.size() != n || events.size() != n)
    throw ShapeError("dataset columns disagree on row count");
  if (n < 2) throw SizeError("dataset needs at least 2 rows, got " + std::to_string(n));
  for (Index i = 0; i < n; ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i]))
      throw ValidationError("time at row " + std::to_string(i) + " is not a non-negative number");
    if (events[i] != 0 && events[i] != 1)
      throw ValidationError("event at row " + std::to_string(i) + " is not 0 or 1");
  }
  if (!features.allFinite()) throw ValidationError("features contain non-finite values");
  if (events.sum() == 0) throw ValidationError("dataset has no observed events");
}

SurvivalDataset SurvivalDataset::subset(std::span<const Index> rows) const {
  SurvivalDataset out;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.times.resize(static_cast<Index>(rows.size()));
  out.events.resize(static_cast<Index>(rows.size()));
  for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) {
    out.features.row(r) = features.row(rows[r]);
    out.times[r] = times[rows[r]];
    out.events[r] = events[rows[r]];
  }
  out.feature_names = feature_names;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators

std::string_view to_string(SyntheticKind kind) {
  for (auto [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

SyntheticKind parse_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto [k, n] : kKindNames)
    if (n == lower) return k;
  if (lower == "strong_interactions" || lower == "strong-interactions") return SyntheticKind::Interactions;
  throw UsageError("unknown synthetic kind '" + std::string(name) + "'");
}

std::vector<SyntheticKind> all_kinds() {
  std::vector<SyntheticKind> out;
  for (auto [k, n] : kKindNames) out.push_back(k);
  return out;
}

void SyntheticSpec::validate() const {
  if (kind != SyntheticKind::Parabola && d < min_dims(kind))
    throw ValidationError(std::string(to_string(kind)) + " needs at least " +
                          std::to_string(min_dims(kind)) + " features, got " + std::to_string(d));
  if (n_train < 2 || n_test < 0) throw ValidationError("synthetic split sizes are invalid");
  if (!(weibull_shape > 0.0)) throw ValidationError("Weibull shape must be positive");
  if (!(censor_prob >= 0.0 && censor_prob < 1.0)) throw ValidationError("censor_prob must lie in [0,1)");
  if (kind == SyntheticKind::Sparse && !(sparsity > 0.0 && sparsity < 1.0))
    throw ValidationError("sparsity must lie in (0,1)");
}

double SyntheticSpec::effective_shape() const {
  return kind == SyntheticKind::Noisy ? std::min(weibull_shape, 1.0) : weibull_shape;
}

ResponseCoefficients draw_coefficients(SyntheticKind kind, Index d, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ResponseCoefficients coef;
  switch (kind) {
    case SyntheticKind::Linear:
    case SyntheticKind::Sparse:
    case SyntheticKind::Noisy:
      coef.weights.resize(d);
      for (Index j = 0; j < d; ++j) coef.weights[j] = unif(rng);
      break;
    case SyntheticKind::Interactions:
      coef.interactions = Eigen::MatrixXd::Zero(d, d);
      for (Index i = 0; i < d; ++i)
        for (Index j = i + 1; j < d; ++j) coef.interactions(i, j) = coef.interactions(j, i) = unif(rng);
      break;
    case SyntheticKind::Quadratic: {
      Eigen::MatrixXd A(d, d);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) A(i, j) = normal(rng);
      coef.quadratic = A.transpose() * A;
      break;
    }
    default:
      break;
  }
  return coef;
}

Eigen::MatrixXd sample_features(const SyntheticSpec& spec, Index n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Index d = spec.kind == SyntheticKind::Parabola ? 1 : spec.d;
  Eigen::MatrixXd X(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) X(i, j) = unif(rng);

  using std::numbers::pi;
  switch (spec.kind) {
    case SyntheticKind::Friedman2:
    case SyntheticKind::Friedman3:
      X.col(0) *= 100.0;
      X.col(1) = X.col(1) * (520.0 * pi) + Eigen::VectorXd::Constant(n, 40.0 * pi);
      X.col(3) = X.col(3) * 10.0 + Eigen::VectorXd::Ones(n);
      break;
    case SyntheticKind::Sparse:
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j)
          if (unif(rng) >= spec.sparsity) X(i, j) = 0.0;
      break;
    case SyntheticKind::Parabola:
      X.col(0) = X.col(0) * 10.0 - Eigen::VectorXd::Constant(n, 5.0);
      break;
    default:
      break;
  }
  return X;
}

namespace {

// Extra Nonlinear terms for j ≥ 6 (1-based), cycled in the listed order.
double nonlinear_extra(const Eigen::Ref<const Eigen::RowVectorXd>& x, Index j) {
  const Index variant = (j - 5) % 3;  // j is 0-based here, first extra is j = 5
  if (variant == 0) return std::sin(x[j]) * std::sqrt(std::abs(x[j - 1]) + 1.0);
  if (variant == 1) return std::log(std::abs(x[j]) + 1.0) * std::tanh(x[j - 2]);
  return x[j] * x[j] * std::cos(x[j - 3]);
}

}  // namespace

Eigen::VectorXd response(SyntheticKind kind, const Eigen::MatrixXd& X,
                         const ResponseCoefficients& coef) {
  const Index n = X.rows();
  const Index d = X.cols();
  if (kind != SyntheticKind::Parabola && d < min_dims(kind))
    throw ValidationError(std::string(to_string(kind)) + " response needs at least " +
                          std::to_string(min_dims(kind)) + " columns");
  if (kind == SyntheticKind::Parabola && d != 1)
    throw ValidationError("parabola response takes exactly one column");

  Eigen::VectorXd y(n);
  using std::numbers::pi;
  switch (kind) {
    case SyntheticKind::Friedman1:
      for (Index i = 0; i < n; ++i) {
        const double a = X(i, 2) - 0.5;
        y[i] = 10.0 * std::sin(pi * X(i, 0) * X(i, 1)) + 20.0 * a * a + 10.0 * X(i, 3) + 5.0 * X(i, 4);
      }
      break;
    case SyntheticKind::Friedman2:
      for (Index i = 0; i < n; ++i) {
        const double b = X(i, 1) * X(i, 2) - 1.0 / (X(i, 1) * X(i, 3));
        y[i] = std::sqrt(X(i, 0) * X(i, 0) + b * b);
      }
      break;
    case SyntheticKind::Friedman3:
      // Negative arctangents would give negative Weibull scales; clamp at 0.
      for (Index i = 0; i < n; ++i) {
        const double b = X(i, 1) * X(i, 2) - 1.0 / (X(i, 1) * X(i, 3));
        y[i] = std::max(0.0, std::atan(b / X(i, 0)));
      }
      break;
    case SyntheticKind::Interactions:
      if (coef.interactions.rows() != d) throw ValidationError("interaction matrix has wrong size");
      for (Index i = 0; i < n; ++i) y[i] = 0.5 * X.row(i).dot(coef.interactions * X.row(i).transpose());
      break;
    case SyntheticKind::Nonlinear:
      for (Index i = 0; i < n; ++i) {
        const auto x = X.row(i);
        double v = 4.0 * std::sin(x[0]) + std::log(std::abs(x[1]) + 1.0) + x[2] * x[2] +
                   std::exp(0.5 * x[3]) + std::tanh(x[4]);
        for (Index j = 5; j < d; ++j) v += nonlinear_extra(x, j);
        y[i] = v;
      }
      break;
    case SyntheticKind::Linear:
    case SyntheticKind::Sparse:
    case SyntheticKind::Noisy:
      if (coef.weights.size() != d) throw ValidationError("weight vector has wrong size");
      y = X * coef.weights;
      break;
    case SyntheticKind::Quadratic:
      if (coef.quadratic.rows() != d) throw ValidationError("quadratic form has wrong size");
      y = ((X * coef.quadratic).array() * X.array()).rowwise().sum();
      break;
    case SyntheticKind::Parabola:
      y = X.col(0).array().square();
      break;
  }
  return y;
}

Eigen::VectorXd gen_response(SyntheticKind kind, const Eigen::MatrixXd& X,
                             const SyntheticSpec& spec, Rng& rng) {
  (void)spec;
  return response(kind, X, draw_coefficients(kind, X.cols(), rng));
}

double weibull_event_time(double y, double shape, double u) {
  if (!(shape > 0.0)) throw DomainError("Weibull shape must be positive");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("u must lie strictly inside (0,1)");
  if (y < 0.0) throw DomainError("Weibull scale must be non-negative");
  if (y == 0.0) return 0.0;
  return y / std::tgamma(1.0 + 1.0 / shape) * std::pow(-std::log(u), 1.0 / shape);
}

Eigen::VectorXd parabola_layout(Rng& rng) {
  std::uniform_real_distribution<double> left(-5.0, -2.0), center(-2.0, 2.0), right(2.0, 5.0);
  Eigen::VectorXd x(410);
  for (Index i = 0; i < 200; ++i) x[i] = left(rng);
  std::vector<double> mid(10);
  for (double& v : mid) v = center(rng);
  std::sort(mid.begin(), mid.end());
  for (Index i = 0; i < 10; ++i) x[200 + i] = mid[static_cast<std::size_t>(i)];
  for (Index i = 0; i < 200; ++i) x[210 + i] = right(rng);
  return x;
}

namespace {

std::vector<std::string> numbered_names(Index d) {
  std::vector<std::string> names;
  for (Index j = 0; j < d; ++j) names.push_back("feature_" + std::to_string(j + 1));
  return names;
}

double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  while (u <= 0.0) u = unif(rng);
  return u;
}

std::pair<SurvivalDataset, SurvivalDataset> make_parabola(const SyntheticSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SurvivalDataset train;
  train.features = parabola_layout(rng);
  train.times = response(SyntheticKind::Parabola, train.features, {});
  train.events.resize(410);
  for (Index i = 0; i < 410; ++i) {
    if (i >= 200 && i < 210)
      train.events[i] = (i - 200) % 2;  // alternate 0,1 across the thinned center
    else
      train.events[i] = unif(rng) < spec.censor_prob ? 0 : 1;
  }
  train.feature_names = numbered_names(1);

  SurvivalDataset test;
  test.features = sample_features(spec, spec.n_test, rng);
  test.times = response(SyntheticKind::Parabola, test.features, {});
  test.events.resize(spec.n_test);
  for (Index i = 0; i < spec.n_test; ++i) test.events[i] = unif(rng) < spec.censor_prob ? 0 : 1;
  test.feature_names = train.feature_names;
  return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<SurvivalDataset, SurvivalDataset> make_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  if (spec.kind == SyntheticKind::Parabola) return make_parabola(spec, rng);

  const Index n = spec.n_train + spec.n_test;
  const ResponseCoefficients coef = draw_coefficients(spec.kind, spec.d, rng);
  const Eigen::MatrixXd X = sample_features(spec, n, rng);
  const Eigen::VectorXd y = response(spec.kind, X, coef);

  const double shape = spec.effective_shape();
  Eigen::VectorXd times(n);
  for (Index i = 0; i < n; ++i) times[i] = weibull_event_time(y[i], shape, open_uniform(rng));

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXi events(n);
  for (Index i = 0; i < n; ++i) events[i] = unif(rng) < spec.censor_prob ? 0 : 1;

  auto slice = [&](Index begin, Index count) {
    SurvivalDataset out;
    out.features = X.middleRows(begin, count);
    out.times = times.segment(begin, count);
    out.events = events.segment(begin, count);
    out.feature_names = numbered_names(spec.d);
    return out;
  };
  return {slice(0, spec.n_train), slice(spec.n_train, spec.n_test)};
}

// ---------------------------------------------------------------------------
// CSV

Index CsvTable::column(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Index>(j);
  return -1;
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::string(trim(field)));
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (any || !field.empty()) {
        record.push_back(std::string(trim(field)));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field in CSV");
  if (any || !trim(field).empty()) {
    record.push_back(std::string(trim(field)));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw SchemaError("CSV has no header row");

  CsvTable table;
  table.header = std::move(records.front());
  if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0)
    table.header[0].erase(0, 3);  // UTF-8 BOM
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw FormatError("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                        " fields, header has " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

namespace {

std::vector<std::size_t> complete_rows(const CsvTable& table) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (std::none_of(row.begin(), row.end(), [](const std::string& v) { return is_missing(v); }))
      keep.push_back(r);
  }
  if (keep.size() != table.rows.size())
    warn("dropped " + std::to_string(table.rows.size() - keep.size()) + " rows with missing values");
  return keep;
}

void require_columns(const CsvTable& table, const std::string& time_column, const std::string& event_column) {
  if (table.column(time_column) < 0) throw SchemaError("missing time column '" + time_column + "'");
  if (table.column(event_column) < 0) throw SchemaError("missing event column '" + event_column + "'");
}

}  // namespace

Preprocessor Preprocessor::fit(const CsvTable& table, const std::string& time_column,
                               const std::string& event_column) {
  require_columns(table, time_column, event_column);
  const auto rows = complete_rows(table);

  std::vector<Column> columns;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const std::string& name = table.header[j];
    if (name == time_column || name == event_column) continue;
    Column col;
    col.name = name;
    std::vector<double> values;
    for (std::size_t r : rows) {
      double v = 0.0;
      if (!parse_number(table.rows[r][j], v)) {
        col.categorical = true;
        break;
      }
      values.push_back(v);
    }
    if (col.categorical) {
      std::set<std::string> levels;
      for (std::size_t r : rows) levels.insert(std::string(trim(table.rows[r][j])));
      col.levels.assign(levels.begin(), levels.end());
    } else if (!values.empty()) {
      const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Index>(values.size()));
      col.mean = v.mean();
      const double ss = (v.array() - col.mean).square().sum();
      const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      col.scale = sd > 0.0 ? sd : 1.0;
    }
    columns.push_back(std::move(col));
  }
  return Preprocessor(std::move(columns), time_column, event_column);
}

Index Preprocessor::output_dims() const {
  Index d = 0;
  for (const auto& c : columns_) d += c.categorical ? static_cast<Index>(c.levels.size()) : 1;
  return d;
}

SurvivalDataset Preprocessor::transform(const CsvTable& table) const {
  require_columns(table, time_column_, event_column_);
  std::vector<Index> source;
  for (const auto& c : columns_) {
    const Index j = table.column(c.name);
    if (j < 0) throw ShapeError("dimension mismatch: column '" + c.name + "' is missing");
    source.push_back(j);
  }
  const std::size_t expected = columns_.size() + 2;
  if (table.header.size() != expected)
    throw ShapeError("dimension mismatch: table has " + std::to_string(table.header.size() - 2) +
                     " feature columns, expected " + std::to_string(columns_.size()));

  const auto rows = complete_rows(table);
  const Index n = static_cast<Index>(rows.size());
  if (n < 2) throw SizeError("need at least 2 complete rows, got " + std::to_string(n));

  SurvivalDataset out;
  out.features = Eigen::MatrixXd::Zero(n, output_dims());
  out.times.resize(n);
  out.events.resize(n);
  const Index tj = table.column(time_column_);
  const Index ej = table.column(event_column_);

  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[rows[static_cast<std::size_t>(i)]];
    double t = 0.0, e = 0.0;
    if (!parse_number(row[static_cast<std::size_t>(tj)], t) || t < 0.0)
      throw ValidationError("time value '" + row[static_cast<std::size_t>(tj)] + "' is not a non-negative number");
    if (!parse_number(row[static_cast<std::size_t>(ej)], e) || (e != 0.0 && e != 1.0))
      throw ValidationError("event value '" + row[static_cast<std::size_t>(ej)] + "' is not 0 or 1");
    out.times[i] = t;
    out.events[i] = static_cast<int>(e);

    Index out_col = 0;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const Column& col = columns_[c];
      const std::string_view raw = trim(row[static_cast<std::size_t>(source[c])]);
      if (col.categorical) {
        auto it = std::find(col.levels.begin(), col.levels.end(), raw);
        if (it != col.levels.end()) out.features(i, out_col + (it - col.levels.begin())) = 1.0;
        else warn("unseen level '" + std::string(raw) + "' in column '" + col.name + "'");
        out_col += static_cast<Index>(col.levels.size());
      } else {
        double v = 0.0;
        if (!parse_number(raw, v))
          throw ValidationError("value '" + std::string(raw) + "' in numeric column '" + col.name + "'");
        out.features(i, out_col++) = (v - col.mean) / col.scale;
      }
    }
  }
  for (const auto& col : columns_) {
    if (col.categorical)
      for (const auto& level : col.levels) out.feature_names.push_back(col.name + "=" + level);
    else
      out.feature_names.push_back(col.name);
  }
  return out;
}

SurvivalDataset load_csv(const std::filesystem::path& path, const std::string& time_column,
                         const std::string& event_column) {
  const CsvTable table = read_csv(path);
  return Preprocessor::fit(table, time_column, event_column).transform(table);
}

void write_csv(const SurvivalDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index j = 0; j < data.dims(); ++j) out << "feature_" << (j + 1) << ',';
  out << "time,event\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dims(); ++j) out << data.features(i, j) << ',';
    out << data.times[i] << ',' << data.events[i] << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer s;
  s.mean = X.colwise().mean();
  s.scale.resize(X.cols());
  const double denom = X.rows() > 1 ? static_cast<double>(X.rows() - 1) : 1.0;
  for (Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.mean[j]).square().sum() / denom);
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) throw ShapeError("standardizer fitted on a different feature count");
  return (X.rowwise() - mean).array().rowwise() / scale.array();
}

}  // namespace isurv
