#pragma once

// Dense feed-forward regressors used as the controller's plant surrogates:
// f_x (zone temperature after one hour) and f_y (cooling delivered during
// that hour). Inputs and target are z-score standardized inside the model.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imlc/table.hpp"

namespace imlc::surrogate {

struct Feature {
  std::string name;
  std::string unit;
  std::string column;  // source column in the training table

  bool operator==(const Feature&) const = default;
};

struct FeatureSchema {
  std::vector<Feature> features;
  Feature target;

  std::size_t size() const noexcept { return features.size(); }
  std::vector<std::string> names() const;
  /// Throws SchemaError on empty or duplicate names.
  void validate() const;

  /// f_x: [setpoint_t, zone_temp_tminus1, oa_*_tminus1, occupancy_tminus1] -> zone_temp_t.
  static FeatureSchema zone_temperature();
  /// f_y: [setpoint_t, zone_temp_t, oa_*_t, occupancy_t] -> cooling_rate.
  static FeatureSchema cooling_rate();

  bool operator==(const FeatureSchema&) const = default;
};

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Row-major weights: w[o * in + i].
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;
  std::vector<double> b;

  bool operator==(const Layer&) const = default;
};

struct Normalization {
  std::vector<double> means;
  std::vector<double> stds;
  double target_mean = 0.0;
  double target_std = 1.0;

  bool operator==(const Normalization&) const = default;
};

struct TrainConfig {
  int epochs = 2000;
  int hidden_width = 50;
  int hidden_layers = 1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 1;
  Activation activation = Activation::kRelu;
  std::size_t background_size = 256;

  /// Throws ConfigError.
  void validate() const;
};

/// Everything recorded about a training run.
struct TrainingLog {
  int epochs = 0;
  int hidden_width = 0;
  int hidden_layers = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  double initial_validation_mse = 0.0;  // target units squared
  double final_train_mse = 0.0;
  double final_validation_mse = 0.0;
  std::vector<double> train_loss;       // standardized MSE per epoch
  std::vector<double> validation_loss;  // standardized MSE per epoch
  std::vector<double> fitted;           // predict() on every dataset row, in order
  std::vector<std::vector<double>> background;  // Shapley background rows

  bool operator==(const TrainingLog&) const = default;
};

class SurrogateModel {
 public:
  SurrogateModel(FeatureSchema schema, Activation activation, std::vector<Layer> layers,
                 Normalization norm, TrainingLog log = {});

  /// Throws SchemaError when `features` does not match the schema length.
  double predict(std::span<const double> features) const;
  std::vector<double> predict_batch(const std::vector<std::vector<double>>& rows) const;

  const FeatureSchema& schema() const noexcept { return schema_; }
  Activation activation() const noexcept { return activation_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Normalization& normalization() const noexcept { return norm_; }
  const TrainingLog& log() const noexcept { return log_; }
  std::size_t input_size() const noexcept { return schema_.size(); }

  nlohmann::json to_json() const;
  /// Throws DeserializationError naming the offending field.
  static SurrogateModel from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  static SurrogateModel load(const std::filesystem::path& path);

 private:
  FeatureSchema schema_;
  Activation activation_;
  std::vector<Layer> layers_;
  Normalization norm_;
  TrainingLog log_;
};

/// Full-batch Adam on MSE. The first (1 - validation_fraction) of the rows
/// train, the rest validate (chronological split).
SurrogateModel train(const Table& data, const FeatureSchema& schema, const TrainConfig& cfg);

/// Features and target of `schema` pulled out of `data`, row by row.
struct Design {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
};
Design extract(const Table& data, const FeatureSchema& schema);

/// Standardized-space MSE of `layers` on (x, y), and its gradient with
/// respect to every weight and bias when `grad` is non-null. This is the
/// exact routine the optimizer calls.
double loss_and_gradient(const std::vector<Layer>& layers, Activation activation,
                         const std::vector<std::vector<double>>& x, std::span<const double> y,
                         std::vector<Layer>* grad);

}  // namespace imlc::surrogate
