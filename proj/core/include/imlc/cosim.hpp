#pragma once

// Closed-loop orchestration: the testbed advances truth, the controller plans
// on surrogates, and every step is captured as a TimestepRecord. Episodes
// persist as JSON lines: one header line, then one record per line.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "imlc/mpc.hpp"
#include "imlc/scenario.hpp"
#include "imlc/shapley.hpp"
#include "imlc/surrogate.hpp"
#include "imlc/testbed.hpp"

namespace imlc::cosim {

inline constexpr int kEpisodeFormatVersion = 1;

/// Order of TimestepRecord::attributions.
enum AttributionSlot : std::size_t { kFxFirstHour = 0, kFyFirstHour = 1, kFxSecondHour = 2, kFySecondHour = 3 };

struct TimestepRecord {
  long timestamp = 0;                   // hour index from episode start
  double zone_temp_c = 0.0;             // measured at t
  testbed::Disturbance disturbance;     // over [t, t+1)
  testbed::Disturbance forecast;        // over [t+1, t+2)
  double applied_setpoint_c = 0.0;      // decision.u1
  double cooling_rate_w = 0.0;          // delivered over [t, t+1)
  double next_zone_temp_c = 0.0;        // simulated zone temperature at t+1
  double limit_t1_w = testbed::kNormalPowerLimitW;
  double limit_t2_w = testbed::kNormalPowerLimitW;
  mpc::MpcDecision decision;
  std::array<shapley::Attribution, 4> attributions;
  std::optional<ScenarioLabel> scenario;
  double optimize_seconds = 0.0;

  bool operator==(const TimestepRecord&) const = default;
};

struct EpisodeHeader {
  int version = kEpisodeFormatVersion;
  std::uint64_t seed = 0;
  std::uint64_t calendar_seed = 0;
  double dr_probability = 0.0;
  int n_days = 0;
  int first_day = 0;
  double initial_zone_temp_c = 26.0;
  testbed::TestbedConfig testbed;
  testbed::DrCalendar calendar;
  std::string fx_digest;
  std::string fy_digest;

  bool operator==(const EpisodeHeader&) const = default;
};

struct Episode {
  EpisodeHeader header;
  std::vector<TimestepRecord> records;

  /// Throws std::out_of_range listing the valid range.
  const TimestepRecord& at(long timestamp) const;
  bool operator==(const Episode&) const = default;
};

/// Predictors plus their Shapley backgrounds and provenance digests.
struct ControllerModels {
  shapley::Predictor f_x;
  shapley::Predictor f_y;
  shapley::BackgroundSet fx_background;
  shapley::BackgroundSet fy_background;
  std::string fx_digest;
  std::string fy_digest;

  /// Views into the models (which must outlive the result); backgrounds come
  /// from each model's training log.
  static ControllerModels from(const surrogate::SurrogateModel& f_x, const surrogate::SurrogateModel& f_y);
};

struct EpisodeConfig {
  int n_days = 31;
  int first_day = 31;                 // day index into the synthetic weather
  double initial_zone_temp_c = 26.0;
  std::uint64_t seed = 1;
  std::uint64_t calendar_seed = 1;
  double dr_probability = 0.0;
};

/// Hour-by-hour receding-horizon loop. Throws the underlying error prefixed
/// with the failing timestamp.
Episode run_episode(const EpisodeConfig& cfg, const testbed::TestbedConfig& testbed_cfg,
                    const ControllerModels& models, const testbed::DrCalendar& calendar);

/// `include_timing = false` writes the canonical form used for determinism checks.
void save_episode(const Episode& episode, const std::filesystem::path& path, bool include_timing = true);
std::string episode_to_jsonl(const Episode& episode, bool include_timing = true);
Episode load_episode(const std::filesystem::path& path);
Episode episode_from_jsonl(const std::string& text);

struct TimingReport {
  std::vector<double> seconds;  // one entry per record
  double mean = 0.0;
  double max = 0.0;
};

TimingReport timing_report(const Episode& episode);

void to_json(nlohmann::json& j, const TimestepRecord& r);
void from_json(const nlohmann::json& j, TimestepRecord& r);
void to_json(nlohmann::json& j, const EpisodeHeader& h);
void from_json(const nlohmann::json& j, EpisodeHeader& h);

}  // namespace imlc::cosim
