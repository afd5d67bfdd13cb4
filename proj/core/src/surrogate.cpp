#include "imlc/surrogate.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "imlc/errors.hpp"
#include "imlc/random.hpp"
#include "json_util.hpp"

namespace imlc::surrogate {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
  }
  return z;
}

void activate_inplace(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::kRelu: m = m.cwiseMax(0.0); break;
    case Activation::kTanh: m = m.array().tanh().matrix(); break;
  }
}

// Derivative expressed through the pre-activation z and activation out.
Eigen::MatrixXd activation_grad(Activation a, const Eigen::MatrixXd& z, const Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::kRelu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - out.array().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

// Samples are columns.
struct Workspace {
  std::vector<Eigen::MatrixXd> pre;   // z per layer
  std::vector<Eigen::MatrixXd> post;  // activation per layer; post[0] is the input
};

double forward_backward(const std::vector<Layer>& layers, Activation act, const Eigen::MatrixXd& x,
                        const Eigen::RowVectorXd& y, std::vector<Layer>* grad, Workspace& ws) {
  const std::size_t n_layers = layers.size();
  const auto n = static_cast<double>(x.cols());
  ws.pre.resize(n_layers);
  ws.post.resize(n_layers + 1);
  ws.post[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& L = layers[l];
    Eigen::Map<const RowMajor> w(L.w.data(), static_cast<Eigen::Index>(L.out), static_cast<Eigen::Index>(L.in));
    Eigen::Map<const Eigen::VectorXd> b(L.b.data(), static_cast<Eigen::Index>(L.out));
    ws.pre[l].noalias() = w * ws.post[l];
    ws.pre[l].colwise() += b;
    ws.post[l + 1] = ws.pre[l];
    if (l + 1 < n_layers) activate_inplace(act, ws.post[l + 1]);
  }
  const Eigen::RowVectorXd residual = ws.post[n_layers].row(0) - y;
  const double loss = residual.squaredNorm() / n;
  if (grad == nullptr) return loss;

  grad->resize(n_layers);
  Eigen::MatrixXd delta = (2.0 / n) * residual;  // 1 x N
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& L = layers[l];
    auto& G = (*grad)[l];
    G.in = L.in;
    G.out = L.out;
    G.w.resize(L.w.size());
    G.b.resize(L.b.size());
    Eigen::Map<RowMajor> gw(G.w.data(), static_cast<Eigen::Index>(L.out), static_cast<Eigen::Index>(L.in));
    Eigen::Map<Eigen::VectorXd> gb(G.b.data(), static_cast<Eigen::Index>(L.out));
    gw.noalias() = delta * ws.post[l].transpose();
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const RowMajor> w(L.w.data(), static_cast<Eigen::Index>(L.out), static_cast<Eigen::Index>(L.in));
      Eigen::MatrixXd back = w.transpose() * delta;
      delta = back.cwiseProduct(activation_grad(act, ws.pre[l - 1], ws.post[l]));
    }
  }
  return loss;
}

Eigen::MatrixXd to_columns(const std::vector<std::vector<double>>& rows, std::size_t width) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != width) throw SchemaError("ragged feature rows");
    for (std::size_t r = 0; r < width; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
  }
  return m;
}

std::vector<Layer> init_layers(std::size_t inputs, const TrainConfig& cfg, Rng& rng) {
  std::vector<std::size_t> widths{inputs};
  for (int k = 0; k < cfg.hidden_layers; ++k) widths.push_back(static_cast<std::size_t>(cfg.hidden_width));
  widths.push_back(1);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer L{widths[l], widths[l + 1], {}, {}};
    // Same bound as a default torch.nn.Linear.
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    L.w.resize(L.in * L.out);
    L.b.resize(L.out);
    for (auto& v : L.w) v = rng.uniform(-bound, bound);
    for (auto& v : L.b) v = rng.uniform(-bound, bound);
    layers.push_back(std::move(L));
  }
  return layers;
}

struct Moments {
  std::vector<Layer> m;
  std::vector<Layer> v;
};

void adam_update(std::vector<Layer>& layers, const std::vector<Layer>& grad, Moments& mom, int t,
                 const TrainConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      p[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].w, grad[l].w, mom.m[l].w, mom.v[l].w);
    update(layers[l].b, grad[l].b, mom.m[l].b, mom.v[l].b);
  }
}

double mse(const SurrogateModel& model, const std::vector<std::vector<double>>& x, std::span<const double> y) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = model.predict(x[i]) - y[i];
    acc += r * r;
  }
  return acc / static_cast<double>(x.size());
}

void check_finite(const std::vector<double>& v, const std::string& field) {
  for (double d : v) {
    if (!std::isfinite(d)) throw DeserializationError(field, "non-finite value");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

void FeatureSchema::validate() const {
  if (features.empty()) throw SchemaError("schema has no features");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name.empty()) throw SchemaError("empty feature name");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name: " + f.name);
  }
  if (target.name.empty()) throw SchemaError("schema has no target");
}

FeatureSchema FeatureSchema::zone_temperature() {
  return FeatureSchema{{{"setpoint_t", "°C", "setpoint_c"},
                        {"zone_temp_tminus1", "°C", "zone_temp_c"},
                        {"oa_temp_tminus1", "°C", "oa_temp_c"},
                        {"oa_radiation_tminus1", "W/m²", "oa_radiation_wm2"},
                        {"occupancy_tminus1", "persons", "occupancy"}},
                       {"zone_temp_t", "°C", "next_zone_temp_c"}};
}

FeatureSchema FeatureSchema::cooling_rate() {
  return FeatureSchema{{{"setpoint_t", "°C", "setpoint_c"},
                        {"zone_temp_t", "°C", "zone_temp_c"},
                        {"oa_temp_t", "°C", "oa_temp_c"},
                        {"oa_radiation_t", "W/m²", "oa_radiation_wm2"},
                        {"occupancy_t", "persons", "occupancy"}},
                       {"cooling_rate", "W", "next_cooling_rate_w"}};
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw DeserializationError("activation", "unknown activation '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
    throw ConfigError("validation_fraction must be in (0, 0.5)");
  }
  if (background_size < 1) throw ConfigError("background_size must be >= 1");
}

// ---------------------------------------------------------------------------
// Model

SurrogateModel::SurrogateModel(FeatureSchema schema, Activation activation, std::vector<Layer> layers,
                               Normalization norm, TrainingLog log)
    : schema_(std::move(schema)),
      activation_(activation),
      layers_(std::move(layers)),
      norm_(std::move(norm)),
      log_(std::move(log)) {
  schema_.validate();
  const std::size_t n = schema_.size();
  if (layers_.empty()) throw SchemaError("model has no layers");
  if (layers_.front().in != n) {
    throw SchemaError(fmt::format("first layer takes {} inputs, schema has {}", layers_.front().in, n));
  }
  if (layers_.back().out != 1) throw SchemaError("output layer must have width 1");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.w.size() != L.in * L.out || L.b.size() != L.out) {
      throw SchemaError(fmt::format("layer {} weight shape inconsistent", l));
    }
    if (l > 0 && layers_[l - 1].out != L.in) throw SchemaError(fmt::format("layer {} input width mismatch", l));
  }
  if (norm_.means.size() != n || norm_.stds.size() != n) throw SchemaError("normalization length mismatch");
  for (double s : norm_.stds) {
    if (!(s > 0.0)) throw SchemaError("normalization std must be > 0");
  }
  if (!(norm_.target_std > 0.0)) throw SchemaError("target std must be > 0");
}

double SurrogateModel::predict(std::span<const double> features) const {
  const std::size_t n = schema_.size();
  if (features.size() != n) {
    throw SchemaError(fmt::format("expected {} features, got {}", n, features.size()));
  }
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = (features[i] - norm_.means[i]) / norm_.stds[i];
  std::vector<double> z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    z.assign(L.out, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      double acc = L.b[o];
      const double* row = L.w.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) acc += row[i] * a[i];
      z[o] = (l + 1 < layers_.size()) ? activate(activation_, acc) : acc;
    }
    a.swap(z);
  }
  return a[0] * norm_.target_std + norm_.target_mean;
}

std::vector<double> SurrogateModel::predict_batch(const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

nlohmann::json SurrogateModel::to_json() const {
  using nlohmann::json;
  json features = json::array();
  for (const auto& f : schema_.features) {
    features.push_back({{"name", f.name}, {"unit", f.unit}, {"column", f.column}});
  }
  json layers = json::array();
  for (const auto& L : layers_) {
    json w = json::array();
    for (std::size_t o = 0; o < L.out; ++o) {
      w.push_back(std::vector<double>(L.w.begin() + static_cast<long>(o * L.in),
                                      L.w.begin() + static_cast<long>((o + 1) * L.in)));
    }
    layers.push_back({{"w", w}, {"b", L.b}});
  }
  return json{
      {"schema",
       {{"features", features},
        {"target", {{"name", schema_.target.name}, {"unit", schema_.target.unit}, {"column", schema_.target.column}}}}},
      {"activation", to_string(activation_)},
      {"layers", layers},
      {"norm",
       {{"means", norm_.means},
        {"stds", norm_.stds},
        {"target_mean", norm_.target_mean},
        {"target_std", norm_.target_std}}},
      {"meta",
       {{"epochs", log_.epochs},
        {"hidden_width", log_.hidden_width},
        {"hidden_layers", log_.hidden_layers},
        {"learning_rate", log_.learning_rate},
        {"seed", log_.seed},
        {"train_rows", log_.train_rows},
        {"validation_rows", log_.validation_rows},
        {"initial_validation_mse", log_.initial_validation_mse},
        {"final_train_mse", log_.final_train_mse},
        {"final_validation_mse", log_.final_validation_mse},
        {"final_loss", log_.train_loss.empty() ? 0.0 : log_.train_loss.back()},
        {"train_loss", log_.train_loss},
        {"validation_loss", log_.validation_loss},
        {"fitted", log_.fitted},
        {"background", log_.background}}}};
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
  using detail::field;
  using nlohmann::json;
  if (!j.is_object()) throw DeserializationError("<document>", "model file is not a JSON object");

  const auto& js = field<json>(j, "schema");
  FeatureSchema schema;
  const auto feats = field<json>(js, "features");
  if (!feats.is_array()) throw DeserializationError("schema.features", "not an array");
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto& f = feats[i];
    try {
      schema.features.push_back({field<std::string>(f, "name"), field<std::string>(f, "unit"),
                                 field<std::string>(f, "column")});
    } catch (const DeserializationError& e) {
      throw DeserializationError(fmt::format("schema.features[{}].{}", i, e.field()), "missing or wrong type");
    }
  }
  const auto& jt = field<json>(js, "target");
  try {
    schema.target = {field<std::string>(jt, "name"), field<std::string>(jt, "unit"), field<std::string>(jt, "column")};
  } catch (const DeserializationError& e) {
    throw DeserializationError("schema.target." + e.field(), "missing or wrong type");
  }

  const Activation act = activation_from_string(field<std::string>(j, "activation"));

  const auto jl = field<json>(j, "layers");
  if (!jl.is_array() || jl.empty()) throw DeserializationError("layers", "expected a non-empty array");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < jl.size(); ++l) {
    const std::string prefix = fmt::format("layers[{}]", l);
    std::vector<std::vector<double>> w;
    std::vector<double> b;
    try {
      w = field<std::vector<std::vector<double>>>(jl[l], "w");
    } catch (const DeserializationError&) {
      throw DeserializationError(prefix + ".w", "missing or not a matrix of numbers");
    }
    try {
      b = field<std::vector<double>>(jl[l], "b");
    } catch (const DeserializationError&) {
      throw DeserializationError(prefix + ".b", "missing or not an array of numbers");
    }
    if (w.empty()) throw DeserializationError(prefix + ".w", "empty");
    Layer L{w.front().size(), w.size(), {}, std::move(b)};
    for (const auto& row : w) {
      if (row.size() != L.in) throw DeserializationError(prefix + ".w", "ragged rows");
      L.w.insert(L.w.end(), row.begin(), row.end());
    }
    if (L.b.size() != L.out) throw DeserializationError(prefix + ".b", "length differs from w rows");
    check_finite(L.w, prefix + ".w");
    check_finite(L.b, prefix + ".b");
    layers.push_back(std::move(L));
  }

  const auto& jn = field<json>(j, "norm");
  Normalization norm;
  try {
    norm.means = field<std::vector<double>>(jn, "means");
    norm.stds = field<std::vector<double>>(jn, "stds");
    norm.target_mean = field<double>(jn, "target_mean");
    norm.target_std = field<double>(jn, "target_std");
  } catch (const DeserializationError& e) {
    throw DeserializationError("norm." + e.field(), "missing or wrong type");
  }

  TrainingLog log;
  const auto& jm = field<json>(j, "meta");
  try {
    using detail::optional_field;
    optional_field(jm, "epochs", log.epochs);
    optional_field(jm, "hidden_width", log.hidden_width);
    optional_field(jm, "hidden_layers", log.hidden_layers);
    optional_field(jm, "learning_rate", log.learning_rate);
    optional_field(jm, "seed", log.seed);
    optional_field(jm, "train_rows", log.train_rows);
    optional_field(jm, "validation_rows", log.validation_rows);
    optional_field(jm, "initial_validation_mse", log.initial_validation_mse);
    optional_field(jm, "final_train_mse", log.final_train_mse);
    optional_field(jm, "final_validation_mse", log.final_validation_mse);
    optional_field(jm, "train_loss", log.train_loss);
    optional_field(jm, "validation_loss", log.validation_loss);
    optional_field(jm, "fitted", log.fitted);
    optional_field(jm, "background", log.background);
  } catch (const DeserializationError& e) {
    throw DeserializationError("meta." + e.field(), "wrong type");
  }

  try {
    return SurrogateModel(std::move(schema), act, std::move(layers), std::move(norm), std::move(log));
  } catch (const SchemaError& e) {
    throw DeserializationError("layers", e.what());
  }
}

void SurrogateModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DeserializationError("<document>", e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Training

Design extract(const Table& data, const FeatureSchema& schema) {
  schema.validate();
  std::vector<std::size_t> cols;
  for (const auto& f : schema.features) cols.push_back(data.column_index(f.column));
  const std::size_t target = data.column_index(schema.target.column);
  Design d;
  d.x.reserve(data.rows());
  d.y.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    std::vector<double> row;
    row.reserve(cols.size());
    for (auto c : cols) row.push_back(data.at(r, c));
    d.x.push_back(std::move(row));
    d.y.push_back(data.at(r, target));
  }
  return d;
}

double loss_and_gradient(const std::vector<Layer>& layers, Activation activation,
                         const std::vector<std::vector<double>>& x, std::span<const double> y,
                         std::vector<Layer>* grad) {
  if (layers.empty()) throw SchemaError("no layers");
  if (x.size() != y.size() || x.empty()) throw SchemaError("x/y size mismatch");
  const Eigen::MatrixXd xm = to_columns(x, layers.front().in);
  const Eigen::RowVectorXd ym = Eigen::Map<const Eigen::RowVectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Workspace ws;
  return forward_backward(layers, activation, xm, ym, grad, ws);
}

SurrogateModel train(const Table& data, const FeatureSchema& schema, const TrainConfig& cfg) {
  cfg.validate();
  const Design all = extract(data, schema);
  if (all.x.size() < 100) throw SchemaError(fmt::format("need >= 100 rows, got {}", all.x.size()));
  for (std::size_t r = 0; r < all.x.size(); ++r) {
    for (double v : all.x[r]) {
      if (!std::isfinite(v)) throw SchemaError(fmt::format("non-finite feature in row {}", r));
    }
    if (!std::isfinite(all.y[r])) throw SchemaError(fmt::format("non-finite target in row {}", r));
  }

  const std::size_t n = all.x.size();
  const auto n_val = static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_val;
  const std::size_t k = schema.size();

  // Standardization from the training split only.
  Normalization norm;
  norm.means.assign(k, 0.0);
  norm.stds.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) mean += all.x[r][i];
    mean /= static_cast<double>(n_train);
    double var = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) var += (all.x[r][i] - mean) * (all.x[r][i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n_train));
    norm.means[i] = mean;
    norm.stds[i] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  {
    double mean = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) mean += all.y[r];
    mean /= static_cast<double>(n_train);
    double var = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) var += (all.y[r] - mean) * (all.y[r] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n_train));
    norm.target_mean = mean;
    norm.target_std = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }

  auto standardize = [&](std::size_t begin, std::size_t end, Eigen::MatrixXd& xm, Eigen::RowVectorXd& ym) {
    const auto cols = static_cast<Eigen::Index>(end - begin);
    xm.resize(static_cast<Eigen::Index>(k), cols);
    ym.resize(cols);
    for (std::size_t r = begin; r < end; ++r) {
      const auto c = static_cast<Eigen::Index>(r - begin);
      for (std::size_t i = 0; i < k; ++i) {
        xm(static_cast<Eigen::Index>(i), c) = (all.x[r][i] - norm.means[i]) / norm.stds[i];
      }
      ym(c) = (all.y[r] - norm.target_mean) / norm.target_std;
    }
  };
  Eigen::MatrixXd x_train, x_val;
  Eigen::RowVectorXd y_train, y_val;
  standardize(0, n_train, x_train, y_train);
  standardize(n_train, n, x_val, y_val);

  Rng rng(cfg.rng_seed);
  std::vector<Layer> layers = init_layers(k, cfg, rng);

  const std::vector<std::vector<double>> val_x(all.x.begin() + static_cast<long>(n_train), all.x.end());
  const std::span<const double> val_y(all.y.data() + n_train, n_val);

  TrainingLog log;
  log.epochs = cfg.epochs;
  log.hidden_width = cfg.hidden_width;
  log.hidden_layers = cfg.hidden_layers;
  log.learning_rate = cfg.learning_rate;
  log.seed = cfg.rng_seed;
  log.train_rows = n_train;
  log.validation_rows = n_val;
  log.initial_validation_mse = mse(SurrogateModel(schema, cfg.activation, layers, norm), val_x, val_y);
  log.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  log.validation_loss.reserve(static_cast<std::size_t>(cfg.epochs));

  Moments mom;
  for (const auto& L : layers) {
    Layer z{L.in, L.out, std::vector<double>(L.w.size(), 0.0), std::vector<double>(L.b.size(), 0.0)};
    mom.m.push_back(z);
    mom.v.push_back(z);
  }

  Workspace ws;
  Workspace ws_val;
  std::vector<Layer> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = forward_backward(layers, cfg.activation, x_train, y_train, &grad, ws);
    if (!std::isfinite(loss)) throw TrainingDivergedError(epoch, "non-finite training loss");
    const double vloss = forward_backward(layers, cfg.activation, x_val, y_val, nullptr, ws_val);
    log.train_loss.push_back(loss);
    log.validation_loss.push_back(vloss);
    adam_update(layers, grad, mom, epoch + 1, cfg);
  }
  for (const auto& L : layers) {
    for (double v : L.w) {
      if (!std::isfinite(v)) throw TrainingDivergedError(cfg.epochs, "non-finite weights after final update");
    }
  }

  const std::vector<std::vector<double>> train_x(all.x.begin(), all.x.begin() + static_cast<long>(n_train));
  SurrogateModel fitted_model(schema, cfg.activation, layers, norm);
  log.final_train_mse = mse(fitted_model, train_x, std::span<const double>(all.y.data(), n_train));
  log.final_validation_mse = mse(fitted_model, val_x, val_y);
  if (!std::isfinite(log.final_train_mse)) throw TrainingDivergedError(cfg.epochs, "non-finite fitted values");
  log.fitted = fitted_model.predict_batch(all.x);

  // Background rows for attribution: the training split, subsampled when large.
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n_train > cfg.background_size) {
    Rng pick(cfg.rng_seed, 0xBAC6);
    for (std::size_t i = 0; i < cfg.background_size; ++i) {
      const auto j = i + static_cast<std::size_t>(pick.next() % (n_train - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(cfg.background_size);
    std::sort(idx.begin(), idx.end());
  }
  for (auto i : idx) log.background.push_back(all.x[i]);

  return SurrogateModel(schema, cfg.activation, std::move(layers), std::move(norm), std::move(log));
}

}  // namespace imlc::surrogate
