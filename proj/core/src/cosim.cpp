#include "imlc/cosim.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "imlc/digest.hpp"
#include "imlc/errors.hpp"
#include "json_util.hpp"

namespace imlc::cosim {

namespace {

template <class E>
[[noreturn]] void rethrow_at(long t, const E& e) {
  throw E(fmt::format("timestep {}: {}", t, e.what()));
}

}  // namespace

const TimestepRecord& Episode::at(long timestamp) const {
  if (records.empty()) throw std::out_of_range("episode has no records");
  const long first = records.front().timestamp;
  const long last = records.back().timestamp;
  if (timestamp < first || timestamp > last) {
    throw std::out_of_range(fmt::format("timestep {} outside valid range [{}, {}]", timestamp, first, last));
  }
  return records[static_cast<std::size_t>(timestamp - first)];
}

ControllerModels ControllerModels::from(const surrogate::SurrogateModel& f_x, const surrogate::SurrogateModel& f_y) {
  return ControllerModels{shapley::Predictor::of(f_x),
                          shapley::Predictor::of(f_y),
                          shapley::BackgroundSet(f_x.log().background),
                          shapley::BackgroundSet(f_y.log().background),
                          sha256_hex(f_x.to_json().dump()),
                          sha256_hex(f_y.to_json().dump())};
}

Episode run_episode(const EpisodeConfig& cfg, const testbed::TestbedConfig& testbed_cfg,
                    const ControllerModels& models, const testbed::DrCalendar& calendar) {
  if (cfg.n_days < 1) throw InvalidInputError("n_days must be >= 1");
  testbed_cfg.validate();

  Episode ep;
  ep.header.seed = cfg.seed;
  ep.header.calendar_seed = cfg.calendar_seed;
  ep.header.dr_probability = cfg.dr_probability;
  ep.header.n_days = cfg.n_days;
  ep.header.first_day = cfg.first_day;
  ep.header.initial_zone_temp_c = cfg.initial_zone_temp_c;
  ep.header.testbed = testbed_cfg;
  ep.header.calendar = calendar;
  ep.header.fx_digest = models.fx_digest;
  ep.header.fy_digest = models.fy_digest;

  // One extra day so the last steps still have a forecast.
  const auto weather = testbed::synth_range(cfg.first_day, cfg.n_days + 1, testbed_cfg);
  const long hours = static_cast<long>(cfg.n_days) * 24;
  ep.records.reserve(static_cast<std::size_t>(hours));

  testbed::ZoneState state{cfg.initial_zone_temp_c, 0};
  for (long t = 0; t < hours; ++t) {
    TimestepRecord rec;
    try {
      rec.timestamp = t;
      rec.zone_temp_c = state.zone_temp_c;
      rec.disturbance = weather[static_cast<std::size_t>(t)];
      rec.forecast = weather[static_cast<std::size_t>(t + 1)];
      rec.limit_t1_w = calendar.limit_at(t + 1);
      rec.limit_t2_w = calendar.limit_at(t + 2);

      mpc::MpcProblem problem{.zone_temp_c = state.zone_temp_c,
                              .d0 = rec.disturbance,
                              .d1 = rec.forecast,
                              .limit_t1_w = rec.limit_t1_w,
                              .limit_t2_w = rec.limit_t2_w,
                              .f_x = models.f_x,
                              .f_y = models.f_y};
      const auto start = std::chrono::steady_clock::now();
      rec.decision = mpc::optimize(problem);
      rec.optimize_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      const auto& d = rec.decision;
      const auto first = mpc::features(d.u1, state.zone_temp_c, rec.disturbance);
      const auto second = mpc::features(d.u2, d.x1, rec.forecast);
      rec.attributions[kFxFirstHour] = shapley::shapley(models.f_x, first, models.fx_background);
      rec.attributions[kFyFirstHour] = shapley::shapley(models.f_y, first, models.fy_background);
      rec.attributions[kFxSecondHour] = shapley::shapley(models.f_x, second, models.fx_background);
      rec.attributions[kFySecondHour] = shapley::shapley(models.f_y, second, models.fy_background);

      rec.applied_setpoint_c = d.u1;
      auto [next, out] = testbed::step(state, rec.disturbance, d.u1, testbed_cfg);
      rec.cooling_rate_w = out.cooling_rate_w;
      rec.next_zone_temp_c = next.zone_temp_c;
      state = next;
    } catch (const SimulationDivergedError& e) {
      rethrow_at(t, e);
    } catch (const OptimizationFailedError& e) {
      rethrow_at(t, e);
    } catch (const InvalidInputError& e) {
      rethrow_at(t, e);
    }
    ep.records.push_back(std::move(rec));
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Persistence

void to_json(nlohmann::json& j, const TimestepRecord& r) {
  j = nlohmann::json{{"t", r.timestamp},
                     {"zone_temp_c", r.zone_temp_c},
                     {"disturbance", r.disturbance},
                     {"forecast", r.forecast},
                     {"applied_setpoint_c", r.applied_setpoint_c},
                     {"cooling_rate_w", r.cooling_rate_w},
                     {"next_zone_temp_c", r.next_zone_temp_c},
                     {"p_limit_t1_w", r.limit_t1_w},
                     {"p_limit_t2_w", r.limit_t2_w},
                     {"decision", r.decision},
                     {"attributions", r.attributions},
                     {"scenario", r.scenario ? nlohmann::json(*r.scenario) : nlohmann::json(nullptr)},
                     {"optimize_s", r.optimize_seconds}};
}

void from_json(const nlohmann::json& j, TimestepRecord& r) {
  using detail::field;
  r.timestamp = field<long>(j, "t");
  r.zone_temp_c = field<double>(j, "zone_temp_c");
  r.disturbance = field<testbed::Disturbance>(j, "disturbance");
  r.forecast = field<testbed::Disturbance>(j, "forecast");
  r.applied_setpoint_c = field<double>(j, "applied_setpoint_c");
  r.cooling_rate_w = field<double>(j, "cooling_rate_w");
  r.next_zone_temp_c = field<double>(j, "next_zone_temp_c");
  r.limit_t1_w = field<double>(j, "p_limit_t1_w");
  r.limit_t2_w = field<double>(j, "p_limit_t2_w");
  r.decision = field<mpc::MpcDecision>(j, "decision");
  const auto attrs = field<std::vector<shapley::Attribution>>(j, "attributions");
  if (attrs.size() != 4) throw DeserializationError("attributions", "expected exactly 4 attributions");
  std::copy(attrs.begin(), attrs.end(), r.attributions.begin());
  const auto scen = j.find("scenario");
  if (scen == j.end() || scen->is_null()) {
    r.scenario.reset();
  } else {
    r.scenario = scen->get<ScenarioLabel>();
  }
  r.optimize_seconds = 0.0;
  detail::optional_field(j, "optimize_s", r.optimize_seconds);
}

void to_json(nlohmann::json& j, const EpisodeHeader& h) {
  j = nlohmann::json{{"version", h.version},
                     {"seeds", {{"run", h.seed}, {"calendar", h.calendar_seed}, {"testbed", h.testbed.rng_seed}}},
                     {"model_digests", {{"f_x", h.fx_digest}, {"f_y", h.fy_digest}}},
                     {"config",
                      {{"n_days", h.n_days},
                       {"first_day", h.first_day},
                       {"initial_zone_temp_c", h.initial_zone_temp_c},
                       {"dr_probability", h.dr_probability},
                       {"testbed", h.testbed},
                       {"calendar", h.calendar}}}};
}

void from_json(const nlohmann::json& j, EpisodeHeader& h) {
  using detail::field;
  h.version = field<int>(j, "version");
  if (h.version != kEpisodeFormatVersion) {
    throw DeserializationError("version", fmt::format("unsupported episode version {}", h.version));
  }
  const auto& seeds = field<nlohmann::json>(j, "seeds");
  h.seed = field<std::uint64_t>(seeds, "run");
  h.calendar_seed = field<std::uint64_t>(seeds, "calendar");
  const auto& digests = field<nlohmann::json>(j, "model_digests");
  h.fx_digest = field<std::string>(digests, "f_x");
  h.fy_digest = field<std::string>(digests, "f_y");
  const auto& cfg = field<nlohmann::json>(j, "config");
  h.n_days = field<int>(cfg, "n_days");
  h.first_day = field<int>(cfg, "first_day");
  h.initial_zone_temp_c = field<double>(cfg, "initial_zone_temp_c");
  h.dr_probability = field<double>(cfg, "dr_probability");
  h.testbed = field<testbed::TestbedConfig>(cfg, "testbed");
  h.calendar = field<testbed::DrCalendar>(cfg, "calendar");
}

std::string episode_to_jsonl(const Episode& episode, bool include_timing) {
  nlohmann::json header = episode.header;
  header["records"] = episode.records.size();
  std::string out = header.dump();
  out += '\n';
  for (const auto& r : episode.records) {
    nlohmann::json jr = r;
    if (!include_timing) jr.erase("optimize_s");
    out += jr.dump();
    out += '\n';
  }
  return out;
}

void save_episode(const Episode& episode, const std::filesystem::path& path, bool include_timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << episode_to_jsonl(episode, include_timing);
}

Episode episode_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Episode ep;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IntegrityError(fmt::format("episode line {}: corrupt JSON: {}", line_no, e.what()));
    }
    try {
      if (!have_header) {
        ep.header = j.get<EpisodeHeader>();
        expected = detail::field<std::size_t>(j, "records");
        have_header = true;
      } else {
        ep.records.push_back(j.get<TimestepRecord>());
      }
    } catch (const DeserializationError& e) {
      throw IntegrityError(fmt::format("episode line {}: {}", line_no, e.what()));
    }
  }
  if (!have_header) throw IntegrityError("episode file has no header line");
  if (ep.records.size() != expected) {
    throw IntegrityError(
        fmt::format("episode header declares {} records, file holds {}", expected, ep.records.size()));
  }
  for (std::size_t i = 1; i < ep.records.size(); ++i) {
    if (ep.records[i].timestamp != ep.records[i - 1].timestamp + 1) {
      throw IntegrityError(fmt::format("episode records not contiguous at record {}", i));
    }
  }
  return ep;
}

Episode load_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read episode file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return episode_from_jsonl(ss.str());
}

TimingReport timing_report(const Episode& episode) {
  TimingReport rep;
  rep.seconds.reserve(episode.records.size());
  for (const auto& r : episode.records) rep.seconds.push_back(r.optimize_seconds);
  if (!rep.seconds.empty()) {
    double sum = 0.0;
    for (double s : rep.seconds) sum += s;
    rep.mean = sum / static_cast<double>(rep.seconds.size());
    rep.max = *std::max_element(rep.seconds.begin(), rep.seconds.end());
  }
  return rep;
}

}  // namespace imlc::cosim
