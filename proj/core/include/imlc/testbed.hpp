#pragma once

// Single-zone 1R1C thermal testbed with synthetic summer weather and a
// demand-response (DR) calendar. Hour index t labels the instant at the start
// of hour [t, t+1); disturbances and setpoints at t act over that hour.

#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "imlc/table.hpp"

namespace imlc::testbed {

inline constexpr double kStepSeconds = 3600.0;
inline constexpr double kNormalPowerLimitW = 5000.0;
inline constexpr double kEventLimitMinW = 750.0;
inline constexpr double kEventLimitMaxW = 1750.0;
inline constexpr int kEventFirstHour = 11;
inline constexpr int kEventLastHour = 18;
inline constexpr double kSetpointMinC = 20.0;
inline constexpr double kSetpointMaxC = 30.0;
inline constexpr double kSanityMinC = 0.0;
inline constexpr double kSanityMaxC = 60.0;

struct ZoneState {
  double zone_temp_c = 26.0;
  long hour = 0;
};

struct Disturbance {
  double oa_temp_c = 0.0;
  double oa_radiation_wm2 = 0.0;
  double occupancy = 0.0;

  bool operator==(const Disturbance&) const = default;
};

struct HvacOutput {
  double cooling_rate_w = 0.0;
  double setpoint_applied_c = 0.0;
};

struct TestbedConfig {
  // Zone physics.
  double thermal_resistance = 0.01;      // K/W, envelope
  double thermal_capacitance = 1.8e6;    // J/K, air + furnishings + light mass
  double solar_gain_area = 1.5;          // m^2 effective aperture
  double internal_gain_per_person = 120.0;  // W
  double cooling_capacity = 5000.0;      // W
  double heating_setpoint = 20.0;        // °C, inert in summer
  std::uint64_t rng_seed = 7;

  // Synthetic weather and schedule.
  double oa_temp_max = 38.0;      // °C at 14:00
  double oa_temp_min = 25.0;      // °C at 02:00
  double oa_daily_jitter = 1.5;   // ±°C shift of the whole day
  double radiation_peak = 750.0;  // W/m^2 on a clear day
  int sunrise_hour = 6;
  int sunset_hour = 19;
  double occupancy_peak = 5.0;
  int occupancy_start_hour = 8;   // first occupied hour
  int occupancy_end_hour = 17;    // first unoccupied hour after the workday

  /// Throws ConfigError if any physical parameter is not positive.
  void validate() const;

  bool operator==(const TestbedConfig&) const = default;
};

/// One DR event. `hour_of_day` labels the metered hour the limit applies to,
/// using the same convention as predicted cooling P(t+k): the hour that ends
/// at `hour_of_day`.
struct DrEvent {
  int day = 0;
  int hour_of_day = kEventFirstHour;
  int duration_hours = 1;
  double power_limit_w = kEventLimitMaxW;

  bool operator==(const DrEvent&) const = default;
};

class DrCalendar {
 public:
  DrCalendar() = default;
  DrCalendar(int n_days, std::vector<DrEvent> events);

  int days() const noexcept { return n_days_; }
  const std::vector<DrEvent>& events() const noexcept { return events_; }
  const std::vector<double>& limits() const noexcept { return limits_; }

  /// Power limit for hour label `hour`; hours outside the calendar are normal.
  double limit_at(long hour) const noexcept;

  bool operator==(const DrCalendar&) const = default;

 private:
  int n_days_ = 0;
  std::vector<DrEvent> events_;
  std::vector<double> limits_;
};

/// Advance the zone one hour. Ideal capacity-limited cooling holds the zone at
/// `cooling_setpoint` whenever the free-floating temperature would exceed it.
std::pair<ZoneState, HvacOutput> step(const ZoneState& state, const Disturbance& d,
                                      double cooling_setpoint, const TestbedConfig& cfg);

/// Steady-state cooling load when the zone is held at `setpoint`.
double steady_state_load(const Disturbance& d, double setpoint, const TestbedConfig& cfg);

double daily_max_temp(int day_index, const TestbedConfig& cfg);
std::vector<Disturbance> synth_disturbances(int day_index, const TestbedConfig& cfg);

/// Disturbances for consecutive days, flattened to 24 * n_days hours.
std::vector<Disturbance> synth_range(int first_day, int n_days, const TestbedConfig& cfg);

DrCalendar generate_dr_calendar(int n_days, double event_probability, std::uint64_t seed);

/// Random-setpoint excitation run. Columns are `excitation_columns()`.
Table run_excitation(int n_days, const TestbedConfig& cfg, std::uint64_t seed,
                     int first_day = 0, double initial_zone_temp = 26.0);

const std::vector<std::string>& excitation_columns();

void to_json(nlohmann::json& j, const TestbedConfig& cfg);
void from_json(const nlohmann::json& j, TestbedConfig& cfg);
void to_json(nlohmann::json& j, const Disturbance& d);
void from_json(const nlohmann::json& j, Disturbance& d);
void to_json(nlohmann::json& j, const DrEvent& e);
void from_json(const nlohmann::json& j, DrEvent& e);
void to_json(nlohmann::json& j, const DrCalendar& c);
void from_json(const nlohmann::json& j, DrCalendar& c);

}  // namespace imlc::testbed
