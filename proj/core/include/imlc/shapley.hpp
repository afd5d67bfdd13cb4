#pragma once

// Exact Shapley attribution with an interventional value function:
//   v(S) = mean_b f(x_S, b_{N\S})
// over an explicit background set. Coalitions are bitmasks, bit i = feature i.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace imlc::surrogate {
class SurrogateModel;
}

namespace imlc::shapley {

inline constexpr std::size_t kMaxExactFeatures = 20;

using PredictFn = std::function<double(std::span<const double>)>;

/// A named-input scalar model. Wraps trained surrogates and test stubs alike.
class Predictor {
 public:
  Predictor(std::vector<std::string> names, PredictFn fn);

  /// Non-owning view; `model` must outlive the predictor.
  static Predictor of(const surrogate::SurrogateModel& model);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Throws SchemaError on a length mismatch.
  double operator()(std::span<const double> x) const;

 private:
  std::vector<std::string> names_;
  PredictFn fn_;
};

using Coalition = std::uint64_t;

struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// |S|! (n - |S| - 1)! / n!, reduced. Throws DomainError unless s_size < n.
Rational coalition_weight(std::size_t s_size, std::size_t n);

class BackgroundSet {
 public:
  BackgroundSet() = default;
  explicit BackgroundSet(std::vector<std::vector<double>> rows);

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Throws ConfigError on an empty background, SchemaError on width mismatch.
double value_of(const Predictor& model, std::span<const double> instance, const BackgroundSet& background,
                Coalition subset);

enum class Method { kExact, kSampled };

struct FeatureAttribution {
  std::string name;
  double value = 0.0;  // instance value
  double phi = 0.0;

  bool operator==(const FeatureAttribution&) const = default;
};

struct Attribution {
  std::vector<FeatureAttribution> features;
  double base_value = 0.0;  // v(empty set), the expected value
  double prediction = 0.0;  // v(N)
  std::size_t background_size = 0;
  Method method = Method::kExact;

  double sum_phi() const noexcept;
  bool operator==(const Attribution&) const = default;
};

/// Exact enumeration of all 2^n coalitions. Refuses n > kMaxExactFeatures.
Attribution shapley(const Predictor& model, std::span<const double> instance, const BackgroundSet& background);

/// Permutation-sampling estimate. When n_permutations >= n! every ordering is
/// visited once instead of sampling, so the result equals shapley().
Attribution shapley_sampled(const Predictor& model, std::span<const double> instance,
                            const BackgroundSet& background, std::size_t n_permutations, std::uint64_t seed);

struct AdditivityCheck {
  bool ok = false;
  double residual = 0.0;
};

/// residual = |base + sum(phi) - prediction|; ok iff residual <= 1e-6 max(1, |prediction|).
AdditivityCheck verify_additivity(const Attribution& attribution);

/// Feature indices by descending |phi|; ties keep schema order.
std::vector<std::size_t> rank_by_magnitude(const Attribution& attribution);

void to_json(nlohmann::json& j, const Attribution& a);
void from_json(const nlohmann::json& j, Attribution& a);

}  // namespace imlc::shapley
