#include "isurv/serialize.hpp"

#include "isurv/error.hpp"

#include <fstream>
#include <sstream>

namespace isurv {

using json = nlohmann::ordered_json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows) throw FormatError("matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = data.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols) throw FormatError("matrix column count mismatch");
    for (Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json attention_to_json(const AttentionState& a) {
  if (a.kind == AttentionKind::Gaussian) return json{{"kind", "gaussian"}, {"log_tau", a.log_tau}};
  return json{{"kind", "dot_product"},
              {"activation", a.embedding.activation == Activation::Tanh ? "tanh" : "identity"},
              {"dropout", a.embedding.dropout},
              {"embedding_weight", matrix_to_json(a.embedding.weight)},
              {"embedding_bias", vector_to_json(a.embedding.bias.transpose())},
              {"query", matrix_to_json(a.projection.query)},
              {"key", matrix_to_json(a.projection.key)}};
}

AttentionState attention_from_json(const json& j) {
  AttentionState a;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    a.kind = AttentionKind::Gaussian;
    a.log_tau = j.at("log_tau").get<double>();
    return a;
  }
  if (kind != "dot_product") throw FormatError("unknown attention kind '" + kind + "'");
  a.kind = AttentionKind::DotProduct;
  const auto activation = j.at("activation").get<std::string>();
  if (activation == "tanh") a.embedding.activation = Activation::Tanh;
  else if (activation == "identity") a.embedding.activation = Activation::Identity;
  else throw FormatError("unknown activation '" + activation + "'");
  a.embedding.dropout = j.at("dropout").get<double>();
  a.embedding.weight = matrix_from_json(j.at("embedding_weight"));
  a.embedding.bias = vector_from_json(j.at("embedding_bias")).transpose();
  a.projection.query = matrix_from_json(j.at("query"));
  a.projection.key = matrix_from_json(j.at("key"));
  if (a.embedding.bias.size() != a.embedding.out_dims() || a.projection.query.rows() != a.embedding.out_dims() ||
      a.projection.key.rows() != a.embedding.out_dims())
    throw FormatError("inconsistent attention tensor shapes");
  return a;
}

json preprocessor_to_json(const Preprocessor& p) {
  json columns = json::array();
  for (const auto& c : p.columns()) {
    json col{{"name", c.name}, {"categorical", c.categorical}};
    if (c.categorical) col["levels"] = c.levels;
    else {
      col["mean"] = c.mean;
      col["scale"] = c.scale;
    }
    columns.push_back(std::move(col));
  }
  return json{{"time_column", p.time_column()}, {"event_column", p.event_column()}, {"columns", std::move(columns)}};
}

Preprocessor preprocessor_from_json(const json& j) {
  std::vector<Preprocessor::Column> columns;
  for (const auto& col : j.at("columns")) {
    Preprocessor::Column c;
    c.name = col.at("name").get<std::string>();
    c.categorical = col.at("categorical").get<bool>();
    if (c.categorical) c.levels = col.at("levels").get<std::vector<std::string>>();
    else {
      c.mean = col.at("mean").get<double>();
      c.scale = col.at("scale").get<double>();
    }
    columns.push_back(std::move(c));
  }
  return Preprocessor(std::move(columns), j.at("time_column").get<std::string>(),
                      j.at("event_column").get<std::string>());
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  return json{{"variant", std::string(to_string(c.variant))},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"gamma", c.gamma},
              {"quantile", c.quantile},
              {"generations", c.generations},
              {"window", c.window},
              {"mask_rate", c.mask_rate},
              {"embed_dims", c.embed_dims},
              {"dropout", c.dropout},
              {"batch_rate", c.batch_rate},
              {"weight_decay", c.weight_decay},
              {"initial_tau", c.initial_tau},
              {"fine_tune_epochs", c.fine_tune_epochs},
              {"fine_tune_learning_rate", c.fine_tune_learning_rate},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.epochs = j.at("epochs").get<Index>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.quantile = j.at("quantile").get<double>();
  c.generations = j.at("generations").get<Index>();
  c.window = j.at("window").get<Index>();
  c.mask_rate = j.at("mask_rate").get<double>();
  c.embed_dims = j.at("embed_dims").get<Index>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_rate = j.at("batch_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.initial_tau = j.at("initial_tau").get<double>();
  c.fine_tune_epochs = j.at("fine_tune_epochs").get<Index>();
  c.fine_tune_learning_rate = j.at("fine_tune_learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json model_to_json(const SavedModel& saved) {
  const TrainedModel& m = saved.model;
  json labels = json::array();
  for (const auto& l : m.labels) labels.push_back(json::array({l.interval, l.censored ? 1 : 0}));
  // Distributions are stored on each label's support only.
  json dists = json::array();
  for (Index i = 0; i < m.distributions.rows(); ++i) {
    const auto& l = m.labels[static_cast<std::size_t>(i)];
    const Index b = l.support_begin(), e = l.support_end(m.intervals());
    dists.push_back(json{{"offset", b}, {"values", vector_to_json(m.distributions.row(i).segment(b, e - b).transpose())}});
  }
  json out{{"format", "isurv-model"},
           {"version", kModelFormatVersion},
           {"config", config_to_json(m.config)},
           {"grid", vector_to_json(m.grid.boundaries)},
           {"attention", attention_to_json(m.attention)},
           {"keys", matrix_to_json(m.keys)},
           {"labels", std::move(labels)},
           {"distributions", std::move(dists)},
           {"loss_history", m.loss_history},
           {"fine_tune_history", m.fine_tune_history},
           {"dropped", m.dropped}};
  out["preprocessor"] = saved.preprocessor ? preprocessor_to_json(*saved.preprocessor) : json(nullptr);
  return out;
}

SavedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "isurv-model") throw FormatError("not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw FormatError("unsupported model format version " + std::to_string(version));
    SavedModel saved;
    TrainedModel& m = saved.model;
    m.config = config_from_json(j.at("config"));
    m.grid.boundaries = vector_from_json(j.at("grid"));
    m.attention = attention_from_json(j.at("attention"));
    m.keys = matrix_from_json(j.at("keys"));
    const Index T = m.intervals();
    for (const auto& l : j.at("labels")) {
      ImpreciseLabel label{l.at(0).get<Index>(), l.at(1).get<int>() != 0};
      if (label.interval < 0 || label.interval >= T || !label.representable(T))
        throw FormatError("label outside the grid");
      m.labels.push_back(label);
    }
    if (static_cast<Index>(m.labels.size()) != m.keys.rows()) throw FormatError("label count differs from keys");
    const json& dists = j.at("distributions");
    if (dists.size() != m.labels.size()) throw FormatError("distribution count differs from keys");
    m.distributions = Eigen::MatrixXd::Zero(m.keys.rows(), T);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      const Index offset = dists[i].at("offset").get<Index>();
      const Eigen::VectorXd values = vector_from_json(dists[i].at("values"));
      if (offset != m.labels[i].support_begin() || offset + values.size() != m.labels[i].support_end(T))
        throw FormatError("distribution support mismatch");
      m.distributions.row(static_cast<Index>(i)).segment(offset, values.size()) = values.transpose();
    }
    if (m.attention.kind == AttentionKind::DotProduct && m.attention.embedding.in_dims() != m.keys.cols())
      throw FormatError("attention input size differs from key features");
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    m.fine_tune_history = j.at("fine_tune_history").get<std::vector<double>>();
    m.dropped = j.at("dropped").get<Index>();
    if (!j.at("preprocessor").is_null()) saved.preprocessor = preprocessor_from_json(j.at("preprocessor"));
    return saved;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_model(const SavedModel& saved, const std::filesystem::path& path) {
  write_text(path, model_to_json(saved).dump(1) + "\n");
}

SavedModel load_model(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace isurv
