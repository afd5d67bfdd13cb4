#pragma once

// Shared fixtures: hand-checkable stub models and a once-per-process trained
// surrogate pair on the default testbed.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "imlc/cosim.hpp"
#include "imlc/shapley.hpp"
#include "imlc/surrogate.hpp"
#include "imlc/testbed.hpp"

namespace imlc::test {

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = surrogate::FeatureSchema::cooling_rate().names();
  return names;
}

/// f_x(u, ...) = u: the zone lands exactly on the setpoint.
inline shapley::Predictor stub_fx() {
  return shapley::Predictor(surrogate::FeatureSchema::zone_temperature().names(),
                            [](std::span<const double> x) { return x[0]; });
}

/// f_y(u, ...) = 100 (26 - u): cooling grows 100 W per degree below 26 °C.
inline shapley::Predictor stub_fy() {
  return shapley::Predictor(feature_names(), [](std::span<const double> x) { return 100.0 * (26.0 - x[0]); });
}

inline shapley::Predictor linear(std::vector<double> coef, double bias = 0.0) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < coef.size(); ++i) names.push_back("x" + std::to_string(i + 1));
  return shapley::Predictor(std::move(names), [coef, bias](std::span<const double> x) {
    double s = bias;
    for (std::size_t i = 0; i < coef.size(); ++i) s += coef[i] * x[i];
    return s;
  });
}

inline shapley::BackgroundSet random_background(std::size_t rows, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::vector<double>> out(rows, std::vector<double>(width));
  for (auto& r : out)
    for (auto& v : r) v = u(gen);
  return shapley::BackgroundSet(std::move(out));
}

inline cosim::ControllerModels stub_models() {
  const shapley::BackgroundSet bg({{24.0, 25.0, 30.0, 200.0, 2.0}, {26.0, 26.0, 35.0, 500.0, 5.0}});
  return cosim::ControllerModels{stub_fx(), stub_fy(), bg, bg, "stub-fx", "stub-fy"};
}

struct TrainedPair {
  Table data;
  surrogate::SurrogateModel fx;
  surrogate::SurrogateModel fy;
};

/// 31 excitation days on the default testbed, both surrogates at desk-scale epochs.
inline const TrainedPair& trained_pair() {
  static const TrainedPair pair = [] {
    testbed::TestbedConfig cfg;
    Table data = testbed::run_excitation(31, cfg, 3);
    surrogate::TrainConfig tc;
    auto fx = surrogate::train(data, surrogate::FeatureSchema::zone_temperature(), tc);
    auto fy = surrogate::train(data, surrogate::FeatureSchema::cooling_rate(), tc);
    return TrainedPair{std::move(data), std::move(fx), std::move(fy)};
  }();
  return pair;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("imlc_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace imlc::test
