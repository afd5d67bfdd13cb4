#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "imlc/errors.hpp"
#include "imlc/shapley.hpp"
#include "support.hpp"

using imlc::ConfigError;
using imlc::DomainError;
using imlc::SchemaError;
namespace test = imlc::test;
namespace surrogate = imlc::surrogate;
using namespace imlc::shapley;

namespace {

// Independent oracle: v(S) written out directly, phi averaged over all n!
// orderings of marginal contributions.
double oracle_value(const Predictor& f, const std::vector<double>& x, const BackgroundSet& bg,
                    const std::vector<bool>& in) {
  double s = 0.0;
  for (const auto& b : bg.rows()) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = in[i] ? x[i] : b[i];
    s += f(z);
  }
  return s / static_cast<double>(bg.size());
}

std::vector<double> permutation_oracle(const Predictor& f, const std::vector<double>& x, const BackgroundSet& bg) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(n, false);
    double prev = oracle_value(f, x, bg, in);
    for (std::size_t i : order) {
      in[i] = true;
      const double cur = oracle_value(f, x, bg, in);
      phi[i] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

Predictor nonlinear(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));
  return Predictor(names, [](std::span<const double> x) {
    double s = std::sin(x[0]) * (x.size() > 1 ? x[1] : 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.3 * x[i] * x[i - 1] + std::exp(0.2 * x[i]);
    return s;
  });
}

}  // namespace

TEST(CoalitionWeight, SmallCases) {
  EXPECT_EQ(coalition_weight(0, 2), (Rational{1, 2}));
  EXPECT_EQ(coalition_weight(1, 3), (Rational{1, 6}));
  EXPECT_EQ(coalition_weight(0, 1), (Rational{1, 1}));
  EXPECT_THROW(coalition_weight(3, 3), DomainError);
}

TEST(CoalitionWeight, SumsToOneOverSubsetsExcludingPlayer) {
  for (std::size_t n = 1; n <= 10; ++n) {
    // Subsets of N \ {i} of size s: C(n-1, s).
    double total = 0.0;
    double binom = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
      total += binom * coalition_weight(s, n).value();
      binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << "n=" << n;
  }
  // n = 4: enumerate the 8 subsets of the other three players directly.
  double total = 0.0;
  for (unsigned mask = 0; mask < 8; ++mask) total += coalition_weight(std::popcount(mask), 4).value();
  EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(ValueOf, EdgeCoalitions) {
  const auto f = test::linear({2.0, 3.0});
  const std::vector<double> x = {1.0, 1.0};
  const BackgroundSet bg({{0.0, 0.0}});
  EXPECT_EQ(value_of(f, x, bg, 0b11), 5.0);
  EXPECT_EQ(value_of(f, x, bg, 0b01), 2.0);
  EXPECT_EQ(value_of(f, x, bg, 0b10), 3.0);
  EXPECT_EQ(value_of(f, x, bg, 0b00), 0.0);
  const BackgroundSet single({{4.0, -1.0}});
  EXPECT_EQ(value_of(f, x, single, 0), f(std::vector<double>{4.0, -1.0}));
  EXPECT_THROW(value_of(f, x, BackgroundSet{}, 0), ConfigError);
  EXPECT_THROW(value_of(f, x, BackgroundSet(std::vector<std::vector<double>>{{1.0}}), 0), SchemaError);
}

TEST(Shapley, LinearTwoFeatureExample) {
  const auto a = shapley(test::linear({2.0, 3.0}), std::vector<double>{1.0, 1.0}, BackgroundSet({{0.0, 0.0}}));
  ASSERT_EQ(a.features.size(), 2u);
  EXPECT_DOUBLE_EQ(a.features[0].phi, 2.0);
  EXPECT_DOUBLE_EQ(a.features[1].phi, 3.0);
  EXPECT_EQ(a.base_value, 0.0);
  EXPECT_EQ(a.prediction, 5.0);
  EXPECT_EQ(a.features[0].name, "x1");
  EXPECT_EQ(a.method, Method::kExact);
}

TEST(Shapley, MatchesPermutationOracle) {
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto f = nonlinear(n);
    const auto bg = test::random_background(7, n, 100 + n);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = test::random_background(1, n, 1000 + 10 * n + trial).rows()[0];
      const auto a = shapley(f, x, bg);
      const auto oracle = permutation_oracle(f, x, bg);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a.features[i].phi, oracle[i], 1e-9) << "n=" << n;
    }
  }
}

TEST(Shapley, Additivity) {
  const auto f = nonlinear(5);
  const auto bg = test::random_background(30, 5, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = test::random_background(1, 5, 500 + trial).rows()[0];
    const auto a = shapley(f, x, bg);
    const auto check = verify_additivity(a);
    EXPECT_TRUE(check.ok) << check.residual;
    EXPECT_EQ(a.prediction, f(x));
    EXPECT_EQ(a.background_size, 30u);
  }
}

TEST(Shapley, SymmetryAxiom) {
  // f symmetric in x1, x2; instance and background symmetric in them too.
  Predictor f({"a", "b", "c"}, [](std::span<const double> x) { return x[0] * x[1] + std::sin(x[0] + x[1]) + x[2]; });
  const BackgroundSet bg({{0.5, 0.5, 1.0}, {-1.0, -1.0, 0.0}});
  const auto a = shapley(f, std::vector<double>{2.0, 2.0, 3.0}, bg);
  EXPECT_EQ(a.features[0].phi, a.features[1].phi);

  // Swapping two interchangeable features swaps their attributions.
  Predictor g({"a", "b"}, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; });
  const BackgroundSet bg2({{0.3, -0.7}, {1.1, 0.4}});
  const BackgroundSet bg2_swapped({{-0.7, 0.3}, {0.4, 1.1}});
  const auto p = shapley(g, std::vector<double>{1.5, -2.0}, bg2);
  const auto q = shapley(g, std::vector<double>{-2.0, 1.5}, bg2_swapped);
  EXPECT_NEAR(p.features[0].phi, q.features[1].phi, 1e-9);
  EXPECT_NEAR(p.features[1].phi, q.features[0].phi, 1e-9);
}

TEST(Shapley, DummyAxiomExactZero) {
  Predictor f({"used", "ignored", "also_used"},
              [](std::span<const double> x) { return std::sin(x[0]) * 3.7 + x[2] * x[0] + 0.1; });
  const auto bg = test::random_background(25, 3, 8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = test::random_background(1, 3, 900 + trial).rows()[0];
    EXPECT_EQ(shapley(f, x, bg).features[1].phi, 0.0);
    EXPECT_EQ(shapley_sampled(f, x, bg, 50, trial).features[1].phi, 0.0);
  }
}

TEST(Shapley, LinearityAxiom) {
  const auto f = nonlinear(4);
  Predictor g({"f0", "f1", "f2", "f3"}, [](std::span<const double> x) { return x[0] * x[3] - 2.0 * x[1] + x[2] * x[2]; });
  const double a = 1.7, b = -0.4;
  Predictor h({"f0", "f1", "f2", "f3"}, [&](std::span<const double> x) { return a * f(x) + b * g(x); });
  const auto bg = test::random_background(10, 4, 21);
  const auto x = test::random_background(1, 4, 22).rows()[0];
  const auto pf = shapley(f, x, bg), pg = shapley(g, x, bg), ph = shapley(h, x, bg);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ph.features[i].phi, a * pf.features[i].phi + b * pg.features[i].phi, 1e-9);
}

TEST(Shapley, RefusesTooManyFeatures) {
  std::vector<double> coef(kMaxExactFeatures + 1, 1.0);
  const auto f = test::linear(coef);
  const std::vector<double> x(coef.size(), 1.0);
  const BackgroundSet bg({std::vector<double>(coef.size(), 0.0)});
  try {
    shapley(f, x, bg);
    FAIL() << "expected refusal";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("shapley_sampled"), std::string::npos);
  }
  // The sampler still works, and for a linear model every ordering agrees.
  const auto s = shapley_sampled(f, x, bg, 3, 1);
  for (const auto& fa : s.features) EXPECT_DOUBLE_EQ(fa.phi, 1.0);
}

TEST(Sampled, FullEnumerationEqualsExact) {
  const auto f = nonlinear(2);
  const auto bg = test::random_background(5, 2, 4);
  const std::vector<double> x = {0.3, -1.2};
  const auto exact = shapley(f, x, bg);
  const auto sampled = shapley_sampled(f, x, bg, 2, 99);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(sampled.features[i].phi, exact.features[i].phi, 1e-9);

  const auto f4 = nonlinear(4);
  const auto bg4 = test::random_background(5, 4, 4);
  const std::vector<double> x4 = {0.3, -1.2, 0.8, 1.9};
  const auto e4 = shapley(f4, x4, bg4);
  const auto s4 = shapley_sampled(f4, x4, bg4, 24, 5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s4.features[i].phi, e4.features[i].phi, 1e-9);
  EXPECT_EQ(s4.method, Method::kSampled);
}

TEST(Sampled, ReproducibleAndConverging) {
  const auto f = nonlinear(5);
  const auto bg = test::random_background(5, 5, 14);
  const auto x = test::random_background(1, 5, 15).rows()[0];
  EXPECT_EQ(shapley_sampled(f, x, bg, 40, 7), shapley_sampled(f, x, bg, 40, 7));
  const auto exact = shapley(f, x, bg);
  const auto est = shapley_sampled(f, x, bg, 100, 3);  // < 5! = 120, so truly sampled
  EXPECT_TRUE(verify_additivity(est).ok);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(est.features[i].phi, exact.features[i].phi, 0.5);
  EXPECT_THROW(shapley_sampled(f, x, bg, 0, 1), DomainError);
}

TEST(Additivity, PublishedExamples) {
  Attribution fig1;
  for (double p : {0.4, -0.3, 0.1, 0.1}) fig1.features.push_back({"f", 0.0, p});
  fig1.base_value = 0.1;
  fig1.prediction = 0.4;
  EXPECT_TRUE(verify_additivity(fig1).ok);
  EXPECT_NEAR(verify_additivity(fig1).residual, 0.0, 1e-15);

  Attribution cooling;
  cooling.features = {{"oa_temp", 37.2, 680.369781},
                      {"oa_radiation", 332.0, 33.052102},
                      {"zone_temp", 0.0, 18.838554},
                      {"zone_clg_tstat", 26.0, -113.826475},
                      {"zone_occ", 0.0, -98.523013}};
  cooling.base_value = 1544.673602;
  cooling.prediction = 2064.584564;
  const auto check = verify_additivity(cooling);
  EXPECT_TRUE(check.ok);
  EXPECT_LT(check.residual, 2e-5);  // the published figures are rounded to 1e-6

  cooling.prediction += 1.0;
  EXPECT_FALSE(verify_additivity(cooling).ok);
}

TEST(Ranking, MagnitudeThenSchemaOrder) {
  Attribution a;
  a.features = {{"a", 0, 1.0}, {"b", 0, -3.0}, {"c", 0, 1.0}, {"d", 0, 2.0}};
  EXPECT_EQ(rank_by_magnitude(a), (std::vector<std::size_t>{1, 3, 0, 2}));
}

TEST(Json, AttributionRoundTrip) {
  const auto a = shapley(nonlinear(3), std::vector<double>{0.1, 0.2, 0.3}, test::random_background(4, 3, 1));
  nlohmann::json j = a;
  EXPECT_EQ(j.at("method"), "exact");
  EXPECT_EQ(j.get<Attribution>(), a);
}

TEST(Surrogate, TrainedModelsSatisfyAdditivity) {
  const auto& pair = test::trained_pair();
  for (const auto* m : {&pair.fx, &pair.fy}) {
    const auto f = Predictor::of(*m);
    const BackgroundSet bg(m->log().background);
    const auto design = surrogate::extract(pair.data, m->schema());
    for (std::size_t i = 0; i < design.x.size(); i += 50) EXPECT_TRUE(verify_additivity(shapley(f, design.x[i], bg)).ok);
  }
}
