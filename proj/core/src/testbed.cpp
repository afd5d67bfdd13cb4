#include "imlc/testbed.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

#include "imlc/errors.hpp"
#include "imlc/random.hpp"
#include "json_util.hpp"

namespace imlc::testbed {

namespace {

constexpr std::uint64_t kWeatherStream = 0x57E47E4ULL;
constexpr std::uint64_t kCalendarStream = 0xCA1E7DA4ULL;
constexpr std::uint64_t kExcitationStream = 0xE8C17EULL;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidInputError(fmt::format("{} is not finite", what));
}

struct DayWeather {
  double temp_shift;
  double radiation_scale;
  double occupancy;
};

DayWeather day_weather(int day_index, const TestbedConfig& cfg) {
  Rng rng(cfg.rng_seed ^ kWeatherStream, static_cast<std::uint64_t>(day_index));
  DayWeather w{};
  w.temp_shift = cfg.oa_daily_jitter * (2.0 * rng.uniform() - 1.0);
  w.radiation_scale = 0.75 + 0.25 * rng.uniform();
  const bool weekend = (day_index % 7) >= 5;
  w.occupancy = weekend ? 0.0 : std::round(cfg.occupancy_peak * (0.4 + 0.6 * rng.uniform()));
  return w;
}

}  // namespace

void TestbedConfig::validate() const {
  const std::pair<const char*, double> positive[] = {
      {"thermal_resistance", thermal_resistance},
      {"thermal_capacitance", thermal_capacitance},
      {"solar_gain_area", solar_gain_area},
      {"internal_gain_per_person", internal_gain_per_person},
      {"cooling_capacity", cooling_capacity},
      {"heating_setpoint", heating_setpoint},
  };
  for (const auto& [name, v] : positive) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError(fmt::format("testbed config: {} must be > 0 (got {})", name, v));
    }
  }
  if (oa_temp_max < oa_temp_min) throw ConfigError("testbed config: oa_temp_max < oa_temp_min");
  if (!(sunrise_hour >= 0 && sunrise_hour < sunset_hour && sunset_hour <= 24)) {
    throw ConfigError("testbed config: need 0 <= sunrise_hour < sunset_hour <= 24");
  }
  if (radiation_peak < 0.0 || occupancy_peak < 0.0 || oa_daily_jitter < 0.0) {
    throw ConfigError("testbed config: weather amplitudes must be >= 0");
  }
}

DrCalendar::DrCalendar(int n_days, std::vector<DrEvent> events)
    : n_days_(n_days), events_(std::move(events)) {
  if (n_days < 0) throw InvalidInputError("calendar length must be >= 0");
  limits_.assign(static_cast<std::size_t>(n_days) * 24, kNormalPowerLimitW);
  for (const auto& e : events_) {
    if (e.hour_of_day < kEventFirstHour || e.hour_of_day > kEventLastHour) {
      throw InvalidInputError(fmt::format("event hour {} outside [{}, {}]", e.hour_of_day,
                                          kEventFirstHour, kEventLastHour));
    }
    if (e.power_limit_w < kEventLimitMinW || e.power_limit_w > kEventLimitMaxW) {
      throw InvalidInputError(fmt::format("event limit {} W outside [750, 1750]", e.power_limit_w));
    }
    if (e.duration_hours < 1) throw InvalidInputError("event duration must be >= 1 h");
    if (e.day < 0 || e.day >= n_days) throw InvalidInputError("event day outside calendar");
    for (int k = 0; k < e.duration_hours; ++k) {
      const long h = static_cast<long>(e.day) * 24 + e.hour_of_day + k;
      if (h < static_cast<long>(limits_.size())) limits_[static_cast<std::size_t>(h)] = e.power_limit_w;
    }
  }
}

double DrCalendar::limit_at(long hour) const noexcept {
  if (hour < 0 || hour >= static_cast<long>(limits_.size())) return kNormalPowerLimitW;
  return limits_[static_cast<std::size_t>(hour)];
}

std::pair<ZoneState, HvacOutput> step(const ZoneState& state, const Disturbance& d,
                                      double cooling_setpoint, const TestbedConfig& cfg) {
  require_finite(state.zone_temp_c, "zone temperature");
  require_finite(d.oa_temp_c, "outdoor temperature");
  require_finite(d.oa_radiation_wm2, "solar radiation");
  require_finite(d.occupancy, "occupancy");
  require_finite(cooling_setpoint, "cooling setpoint");
  if (d.oa_radiation_wm2 < 0.0 || d.occupancy < 0.0) {
    throw InvalidInputError("radiation and occupancy must be >= 0");
  }
  if (cooling_setpoint < kSetpointMinC || cooling_setpoint > kSetpointMaxC) {
    throw InvalidInputError(fmt::format("setpoint {} outside [20, 30] °C", cooling_setpoint));
  }

  const double t = state.zone_temp_c;
  const double gains = d.oa_radiation_wm2 * cfg.solar_gain_area + d.occupancy * cfg.internal_gain_per_person;
  const double conduction = (d.oa_temp_c - t) / cfg.thermal_resistance;
  const double dt_over_c = kStepSeconds / cfg.thermal_capacitance;
  const double free_float = t + dt_over_c * (conduction + gains);

  double cooling = 0.0;
  double next = free_float;
  if (free_float > cooling_setpoint) {
    cooling = std::min(cfg.cooling_capacity, (free_float - cooling_setpoint) / dt_over_c);
    next = free_float - dt_over_c * cooling;
  }
  if (!std::isfinite(next) || next < kSanityMinC || next > kSanityMaxC) {
    throw SimulationDivergedError(
        fmt::format("zone temperature {:.3f} °C at hour {} left [0, 60]", next, state.hour + 1));
  }
  return {ZoneState{next, state.hour + 1}, HvacOutput{cooling, cooling_setpoint}};
}

double steady_state_load(const Disturbance& d, double setpoint, const TestbedConfig& cfg) {
  return (d.oa_temp_c - setpoint) / cfg.thermal_resistance + d.oa_radiation_wm2 * cfg.solar_gain_area +
         d.occupancy * cfg.internal_gain_per_person;
}

double daily_max_temp(int day_index, const TestbedConfig& cfg) {
  return cfg.oa_temp_max + day_weather(day_index, cfg).temp_shift;
}

std::vector<Disturbance> synth_disturbances(int day_index, const TestbedConfig& cfg) {
  if (day_index < 0) throw InvalidInputError("day_index must be >= 0");
  const DayWeather w = day_weather(day_index, cfg);
  const double mean = 0.5 * (cfg.oa_temp_max + cfg.oa_temp_min) + w.temp_shift;
  const double amplitude = 0.5 * (cfg.oa_temp_max - cfg.oa_temp_min);
  const double daylight = cfg.sunset_hour - cfg.sunrise_hour;

  std::vector<Disturbance> day(24);
  for (int h = 0; h < 24; ++h) {
    auto& d = day[static_cast<std::size_t>(h)];
    d.oa_temp_c = mean + amplitude * std::cos(2.0 * std::numbers::pi * (h - 14) / 24.0);
    if (h > cfg.sunrise_hour && h < cfg.sunset_hour) {
      d.oa_radiation_wm2 =
          cfg.radiation_peak * w.radiation_scale * std::sin(std::numbers::pi * (h - cfg.sunrise_hour) / daylight);
    }
    if (h >= cfg.occupancy_start_hour && h < cfg.occupancy_end_hour) d.occupancy = w.occupancy;
  }
  return day;
}

std::vector<Disturbance> synth_range(int first_day, int n_days, const TestbedConfig& cfg) {
  std::vector<Disturbance> out;
  out.reserve(static_cast<std::size_t>(n_days) * 24);
  for (int k = 0; k < n_days; ++k) {
    auto day = synth_disturbances(first_day + k, cfg);
    out.insert(out.end(), day.begin(), day.end());
  }
  return out;
}

DrCalendar generate_dr_calendar(int n_days, double event_probability, std::uint64_t seed) {
  if (!(event_probability >= 0.0 && event_probability <= 1.0)) {
    throw InvalidInputError("event_probability must be in [0, 1]");
  }
  if (n_days < 0) throw InvalidInputError("n_days must be >= 0");
  std::vector<DrEvent> events;
  for (int day = 0; day < n_days; ++day) {
    Rng rng(seed ^ kCalendarStream, static_cast<std::uint64_t>(day));
    const double draw = rng.uniform();
    const int hour = rng.uniform_int(kEventFirstHour, kEventLastHour);
    const double limit = rng.uniform(kEventLimitMinW, kEventLimitMaxW);
    if (draw < event_probability) events.push_back(DrEvent{day, hour, 1, limit});
  }
  return DrCalendar(n_days, std::move(events));
}

const std::vector<std::string>& excitation_columns() {
  static const std::vector<std::string> cols = {
      "time_hour",        "setpoint_c", "zone_temp_c",      "oa_temp_c",
      "oa_radiation_wm2", "occupancy",  "next_zone_temp_c", "next_cooling_rate_w"};
  return cols;
}

Table run_excitation(int n_days, const TestbedConfig& cfg, std::uint64_t seed, int first_day,
                     double initial_zone_temp) {
  if (n_days < 1) throw InvalidInputError("n_days must be >= 1");
  cfg.validate();
  const auto weather = synth_range(first_day, n_days, cfg);
  Rng rng(seed ^ kExcitationStream);
  Table table(excitation_columns());
  ZoneState state{initial_zone_temp, 0};
  for (std::size_t h = 0; h < weather.size(); ++h) {
    const double setpoint = rng.uniform_int(22, 26);
    const auto& d = weather[h];
    auto [next, out] = step(state, d, setpoint, cfg);
    table.add_row({static_cast<double>(h), setpoint, state.zone_temp_c, d.oa_temp_c, d.oa_radiation_wm2,
                   d.occupancy, next.zone_temp_c, out.cooling_rate_w});
    state = next;
  }
  return table;
}

void to_json(nlohmann::json& j, const TestbedConfig& c) {
  j = nlohmann::json{{"thermal_resistance", c.thermal_resistance},
                     {"thermal_capacitance", c.thermal_capacitance},
                     {"solar_gain_area", c.solar_gain_area},
                     {"internal_gain_per_person", c.internal_gain_per_person},
                     {"cooling_capacity", c.cooling_capacity},
                     {"heating_setpoint", c.heating_setpoint},
                     {"rng_seed", c.rng_seed},
                     {"oa_temp_max", c.oa_temp_max},
                     {"oa_temp_min", c.oa_temp_min},
                     {"oa_daily_jitter", c.oa_daily_jitter},
                     {"radiation_peak", c.radiation_peak},
                     {"sunrise_hour", c.sunrise_hour},
                     {"sunset_hour", c.sunset_hour},
                     {"occupancy_peak", c.occupancy_peak},
                     {"occupancy_start_hour", c.occupancy_start_hour},
                     {"occupancy_end_hour", c.occupancy_end_hour}};
}

void from_json(const nlohmann::json& j, TestbedConfig& c) {
  using detail::optional_field;
  c = TestbedConfig{};
  optional_field(j, "thermal_resistance", c.thermal_resistance);
  optional_field(j, "thermal_capacitance", c.thermal_capacitance);
  optional_field(j, "solar_gain_area", c.solar_gain_area);
  optional_field(j, "internal_gain_per_person", c.internal_gain_per_person);
  optional_field(j, "cooling_capacity", c.cooling_capacity);
  optional_field(j, "heating_setpoint", c.heating_setpoint);
  optional_field(j, "rng_seed", c.rng_seed);
  optional_field(j, "oa_temp_max", c.oa_temp_max);
  optional_field(j, "oa_temp_min", c.oa_temp_min);
  optional_field(j, "oa_daily_jitter", c.oa_daily_jitter);
  optional_field(j, "radiation_peak", c.radiation_peak);
  optional_field(j, "sunrise_hour", c.sunrise_hour);
  optional_field(j, "sunset_hour", c.sunset_hour);
  optional_field(j, "occupancy_peak", c.occupancy_peak);
  optional_field(j, "occupancy_start_hour", c.occupancy_start_hour);
  optional_field(j, "occupancy_end_hour", c.occupancy_end_hour);
  c.validate();
}

void to_json(nlohmann::json& j, const Disturbance& d) {
  j = nlohmann::json{{"oa_temp_c", d.oa_temp_c},
                     {"oa_radiation_wm2", d.oa_radiation_wm2},
                     {"occupancy", d.occupancy}};
}

void from_json(const nlohmann::json& j, Disturbance& d) {
  d.oa_temp_c = detail::field<double>(j, "oa_temp_c");
  d.oa_radiation_wm2 = detail::field<double>(j, "oa_radiation_wm2");
  d.occupancy = detail::field<double>(j, "occupancy");
}

void to_json(nlohmann::json& j, const DrEvent& e) {
  j = nlohmann::json{{"day", e.day},
                     {"hour_of_day", e.hour_of_day},
                     {"duration_hours", e.duration_hours},
                     {"power_limit_w", e.power_limit_w}};
}

void from_json(const nlohmann::json& j, DrEvent& e) {
  e.day = detail::field<int>(j, "day");
  e.hour_of_day = detail::field<int>(j, "hour_of_day");
  e.duration_hours = detail::field<int>(j, "duration_hours");
  e.power_limit_w = detail::field<double>(j, "power_limit_w");
}

void to_json(nlohmann::json& j, const DrCalendar& c) {
  j = nlohmann::json{{"days", c.days()}, {"normal_limit_w", kNormalPowerLimitW}, {"events", c.events()}};
}

void from_json(const nlohmann::json& j, DrCalendar& c) {
  c = DrCalendar(detail::field<int>(j, "days"), detail::field<std::vector<DrEvent>>(j, "events"));
}

}  // namespace imlc::testbed
