#include "imlc/shapley.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "imlc/errors.hpp"
#include "imlc/random.hpp"
#include "imlc/surrogate.hpp"
#include "json_util.hpp"

namespace imlc::shapley {

namespace {

void check_inputs(const Predictor& model, std::span<const double> instance, const BackgroundSet& background) {
  if (background.empty()) throw ConfigError("Shapley background set is empty");
  if (instance.size() != model.size()) {
    throw SchemaError(fmt::format("instance has {} values, model has {} features", instance.size(), model.size()));
  }
  if (background.rows().front().size() != model.size()) {
    throw SchemaError(fmt::format("background rows have {} values, model has {} features",
                                  background.rows().front().size(), model.size()));
  }
}

// Mean over the background with the coalition's features taken from the
// instance. When every row yields the same output the mean is that output
// exactly, so an ignored feature contributes exactly zero.
double coalition_value(const Predictor& model, std::span<const double> instance, const BackgroundSet& background,
                       Coalition subset, std::vector<double>& scratch) {
  const std::size_t n = model.size();
  scratch.resize(n);
  double sum = 0.0;
  double first = 0.0;
  bool all_equal = true;
  const auto& rows = background.rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& b = rows[r];
    for (std::size_t i = 0; i < n; ++i) scratch[i] = (subset >> i) & 1U ? instance[i] : b[i];
    const double y = model(scratch);
    if (r == 0) {
      first = y;
    } else if (y != first) {
      all_equal = false;
    }
    sum += y;
  }
  return all_equal ? first : sum / static_cast<double>(rows.size());
}

std::vector<FeatureAttribution> skeleton(const Predictor& model, std::span<const double> instance) {
  std::vector<FeatureAttribution> out;
  out.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) out.push_back({model.names()[i], instance[i], 0.0});
  return out;
}

std::uint64_t factorial_or_max(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) {
    if (f > std::numeric_limits<std::uint64_t>::max() / k) return std::numeric_limits<std::uint64_t>::max();
    f *= k;
  }
  return f;
}

}  // namespace

Predictor::Predictor(std::vector<std::string> names, PredictFn fn) : names_(std::move(names)), fn_(std::move(fn)) {
  if (names_.empty()) throw SchemaError("predictor needs at least one input");
  if (!fn_) throw SchemaError("predictor function is empty");
}

Predictor Predictor::of(const surrogate::SurrogateModel& model) {
  return Predictor(model.schema().names(), [&model](std::span<const double> x) { return model.predict(x); });
}

double Predictor::operator()(std::span<const double> x) const {
  if (x.size() != names_.size()) {
    throw SchemaError(fmt::format("expected {} inputs, got {}", names_.size(), x.size()));
  }
  return fn_(x);
}

Rational coalition_weight(std::size_t s_size, std::size_t n) {
  if (n == 0 || s_size >= n) {
    throw DomainError(fmt::format("coalition size {} invalid for {} players", s_size, n));
  }
  if (n > kMaxExactFeatures) throw DomainError("coalition weights limited to 20 players");
  // w = 1 / (n * C(n-1, s)).
  std::uint64_t binom = 1;
  const std::size_t m = n - 1;
  const std::size_t k = std::min(s_size, m - s_size);
  for (std::size_t j = 1; j <= k; ++j) binom = binom * (m - k + j) / j;
  return Rational{1, static_cast<std::uint64_t>(n) * binom};
}

BackgroundSet::BackgroundSet(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    if (r.size() != rows_.front().size()) throw SchemaError("background rows have differing widths");
  }
}

double value_of(const Predictor& model, std::span<const double> instance, const BackgroundSet& background,
                Coalition subset) {
  check_inputs(model, instance, background);
  if (model.size() < 64 && (subset >> model.size()) != 0) {
    throw DomainError("coalition references features beyond the model");
  }
  std::vector<double> scratch;
  return coalition_value(model, instance, background, subset, scratch);
}

double Attribution::sum_phi() const noexcept {
  double s = 0.0;
  for (const auto& f : features) s += f.phi;
  return s;
}

Attribution shapley(const Predictor& model, std::span<const double> instance, const BackgroundSet& background) {
  const std::size_t n = model.size();
  if (n > kMaxExactFeatures) {
    throw DomainError(fmt::format(
        "exact Shapley enumeration is limited to {} features (model has {}); use shapley_sampled instead",
        kMaxExactFeatures, n));
  }
  check_inputs(model, instance, background);

  const Coalition full = (Coalition{1} << n) - 1;
  std::vector<double> v(static_cast<std::size_t>(full) + 1);
  std::vector<double> scratch;
  for (Coalition s = 0; s <= full; ++s) v[s] = coalition_value(model, instance, background, s, scratch);

  std::vector<double> weight(n);
  for (std::size_t k = 0; k < n; ++k) weight[k] = coalition_weight(k, n).value();

  Attribution a;
  a.features = skeleton(model, instance);
  for (std::size_t i = 0; i < n; ++i) {
    const Coalition bit = Coalition{1} << i;
    double phi = 0.0;
    for (Coalition s = 0; s <= full; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    a.features[i].phi = phi;
  }
  a.base_value = v[0];
  a.prediction = v[full];
  a.background_size = background.size();
  a.method = Method::kExact;
  return a;
}

Attribution shapley_sampled(const Predictor& model, std::span<const double> instance,
                            const BackgroundSet& background, std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) throw DomainError("n_permutations must be >= 1");
  const std::size_t n = model.size();
  if (n >= 64) throw DomainError("sampling estimator supports at most 63 features");
  check_inputs(model, instance, background);

  std::unordered_map<Coalition, double> cache;
  std::vector<double> scratch;
  auto value = [&](Coalition s) {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    const double v = coalition_value(model, instance, background, s, scratch);
    cache.emplace(s, v);
    return v;
  };

  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto walk = [&]() {
    Coalition s = 0;
    double prev = value(s);
    for (std::size_t i : order) {
      s |= Coalition{1} << i;
      const double cur = value(s);
      phi[i] += cur - prev;
      prev = cur;
    }
  };

  std::size_t visited = 0;
  if (factorial_or_max(n) <= n_permutations) {
    do {
      walk();
      ++visited;
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    Rng rng(seed, 0x5A3B1E);
    for (; visited < n_permutations; ++visited) {
      for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next() % i);
        std::swap(order[i - 1], order[j]);
      }
      walk();
    }
  }

  Attribution a;
  a.features = skeleton(model, instance);
  for (std::size_t i = 0; i < n; ++i) a.features[i].phi = phi[i] / static_cast<double>(visited);
  a.base_value = value(0);
  a.prediction = value(n == 63 ? ~Coalition{0} >> 1 : (Coalition{1} << n) - 1);
  a.background_size = background.size();
  a.method = Method::kSampled;
  return a;
}

AdditivityCheck verify_additivity(const Attribution& attribution) {
  const double residual = std::abs(attribution.base_value + attribution.sum_phi() - attribution.prediction);
  return {residual <= 1e-6 * std::max(1.0, std::abs(attribution.prediction)), residual};
}

std::vector<std::size_t> rank_by_magnitude(const Attribution& attribution) {
  std::vector<std::size_t> idx(attribution.features.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double pa = std::abs(attribution.features[a].phi);
    const double pb = std::abs(attribution.features[b].phi);
    return pa > pb;
  });
  return idx;
}

void to_json(nlohmann::json& j, const Attribution& a) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : a.features) features.push_back({{"name", f.name}, {"value", f.value}, {"phi", f.phi}});
  j = nlohmann::json{{"features", features},
                     {"base_value", a.base_value},
                     {"prediction", a.prediction},
                     {"background_size", a.background_size},
                     {"method", a.method == Method::kExact ? "exact" : "sampled"}};
}

void from_json(const nlohmann::json& j, Attribution& a) {
  using detail::field;
  a = Attribution{};
  const auto features = field<nlohmann::json>(j, "features");
  if (!features.is_array()) throw DeserializationError("features", "not an array");
  for (const auto& f : features) {
    a.features.push_back({field<std::string>(f, "name"), field<double>(f, "value"), field<double>(f, "phi")});
  }
  a.base_value = field<double>(j, "base_value");
  a.prediction = field<double>(j, "prediction");
  a.background_size = field<std::size_t>(j, "background_size");
  const auto method = field<std::string>(j, "method");
  if (method == "exact") {
    a.method = Method::kExact;
  } else if (method == "sampled") {
    a.method = Method::kSampled;
  } else {
    throw DeserializationError("method", "expected 'exact' or 'sampled'");
  }
}

}  // namespace imlc::shapley
