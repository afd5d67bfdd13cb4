#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "imlc/cosim.hpp"
#include "imlc/errors.hpp"
#include "support.hpp"

using namespace imlc;
using namespace imlc::cosim;

namespace {

Episode stub_episode(int days, double dr_prob = 0.0) {
  EpisodeConfig cfg;
  cfg.n_days = days;
  cfg.dr_probability = dr_prob;
  return run_episode(cfg, testbed::TestbedConfig{}, test::stub_models(), testbed::generate_dr_calendar(days, dr_prob, 3));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

TEST(Episode, OneDayStubNoEventsHoldsTwentySix) {
  const auto ep = stub_episode(1);
  ASSERT_EQ(ep.records.size(), 24u);
  for (const auto& r : ep.records) {
    EXPECT_EQ(r.applied_setpoint_c, 26.0);
    EXPECT_EQ(r.decision.u1, 26.0);
  }
}

TEST(Episode, RecordInvariants) {
  const auto ep = stub_episode(3, 1.0);
  ASSERT_EQ(ep.records.size(), 72u);
  const testbed::TestbedConfig cfg;
  for (std::size_t i = 0; i < ep.records.size(); ++i) {
    const auto& r = ep.records[i];
    EXPECT_EQ(r.timestamp, static_cast<long>(i));
    EXPECT_EQ(r.applied_setpoint_c, r.decision.u1);
    EXPECT_EQ(r.limit_t1_w, ep.header.calendar.limit_at(r.timestamp + 1));
    EXPECT_EQ(r.limit_t2_w, ep.header.calendar.limit_at(r.timestamp + 2));
    for (const auto& a : r.attributions) {
      EXPECT_EQ(a.features.size(), 5u);
      EXPECT_TRUE(shapley::verify_additivity(a).ok);
    }
    EXPECT_EQ(r.attributions[kFxFirstHour].features[1].name, "zone_temp_tminus1");
    EXPECT_EQ(r.attributions[kFyFirstHour].features[1].name, "zone_temp_t");
    // The simulator, not the surrogate, advances truth.
    auto [next, out] = testbed::step({r.zone_temp_c, r.timestamp}, r.disturbance, r.applied_setpoint_c, cfg);
    EXPECT_EQ(r.next_zone_temp_c, next.zone_temp_c);
    EXPECT_EQ(r.cooling_rate_w, out.cooling_rate_w);
    if (i + 1 < ep.records.size()) EXPECT_EQ(ep.records[i + 1].zone_temp_c, next.zone_temp_c);
  }
}

TEST(Episode, ThirtyOneDaysIs744Records) {
  EXPECT_EQ(stub_episode(31).records.size(), 744u);
}

TEST(Episode, DeterministicCanonicalForm) {
  EXPECT_EQ(episode_to_jsonl(stub_episode(2, 0.5), false), episode_to_jsonl(stub_episode(2, 0.5), false));
}

TEST(Episode, AtListsValidRange) {
  const auto ep = stub_episode(1);
  EXPECT_EQ(ep.at(5).timestamp, 5);
  try {
    ep.at(99);
    FAIL() << "expected out_of_range";
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("[0, 23]"), std::string::npos);
  }
}

TEST(Episode, FailureNamesTimestamp) {
  auto models = test::stub_models();
  models.f_y = shapley::Predictor(test::feature_names(),
                                  [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); });
  EpisodeConfig cfg;
  cfg.n_days = 1;
  try {
    run_episode(cfg, testbed::TestbedConfig{}, models, testbed::generate_dr_calendar(1, 0.0, 1));
    FAIL() << "expected failure";
  } catch (const OptimizationFailedError& e) {
    EXPECT_NE(std::string(e.what()).find("timestep 0"), std::string::npos);
  }
}

TEST(Persist, RoundTrip) {
  test::TempDir dir("episode");
  auto ep = stub_episode(1, 1.0);
  ep.records[3].scenario = ScenarioLabel{Scenario::kPrecool, 1000.0, 5000.0, 25.0, 26.0};
  save_episode(ep, dir.path() / "ep.jsonl");
  const auto loaded = load_episode(dir.path() / "ep.jsonl");
  EXPECT_EQ(loaded, ep);
  for (const auto& r : loaded.records)
    for (const auto& a : r.attributions) EXPECT_TRUE(shapley::verify_additivity(a).ok);
}

TEST(Persist, CanonicalFormDropsTiming) {
  const auto ep = stub_episode(1);
  const auto loaded = episode_from_jsonl(episode_to_jsonl(ep, false));
  for (const auto& r : loaded.records) EXPECT_EQ(r.optimize_seconds, 0.0);
  EXPECT_EQ(lines_of(episode_to_jsonl(ep, true)).size(), 25u);
}

TEST(Persist, CountMismatchIsIntegrityError) {
  auto lines = lines_of(episode_to_jsonl(stub_episode(1), false));
  lines.pop_back();
  EXPECT_THROW(episode_from_jsonl(join_lines(lines)), IntegrityError);
}

TEST(Persist, CorruptLineReportsLineNumber) {
  auto lines = lines_of(episode_to_jsonl(stub_episode(1), false));
  lines[5] = lines[5].substr(0, lines[5].size() / 2);
  try {
    episode_from_jsonl(join_lines(lines));
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
  }
}

TEST(Timing, ReportShape) {
  const auto ep = stub_episode(1);
  const auto t = timing_report(ep);
  EXPECT_EQ(t.seconds.size(), ep.records.size());
  EXPECT_GE(t.max, t.mean);
  EXPECT_LT(t.mean, 1.0);
}

TEST(Episode, TrainedSurrogatesDriveLoop) {
  const auto& pair = test::trained_pair();
  const auto models = ControllerModels::from(pair.fx, pair.fy);
  EXPECT_EQ(models.fx_background.size(), 256u);
  EpisodeConfig cfg;
  cfg.n_days = 2;
  const auto ep = run_episode(cfg, testbed::TestbedConfig{}, models, testbed::generate_dr_calendar(2, 1.0, 1));
  EXPECT_EQ(ep.records.size(), 48u);
  EXPECT_EQ(ep.header.fx_digest.size(), 64u);
  for (const auto& r : ep.records)
    for (const auto& a : r.attributions) EXPECT_TRUE(shapley::verify_additivity(a).ok);
}
