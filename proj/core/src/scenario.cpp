#include "imlc/scenario.hpp"

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace imlc {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kPrecool: return "precool";
    case Scenario::kNormal: return "normal";
    case Scenario::kEventNoPrecool: return "event-no-precool";
  }
  return "normal";
}

void to_json(nlohmann::json& j, const ScenarioLabel& s) {
  j = nlohmann::json{{"id", s.id()},
                     {"name", to_string(s.scenario)},
                     {"limit_t2_w", s.limit_t2_w},
                     {"threshold_w", s.threshold_w},
                     {"u1_c", s.u1_c},
                     {"ceiling_c", s.ceiling_c}};
}

void from_json(const nlohmann::json& j, ScenarioLabel& s) {
  const int id = detail::field<int>(j, "id");
  if (id < 1 || id > 3) throw DeserializationError("id", "scenario id must be 1, 2 or 3");
  s.scenario = static_cast<Scenario>(id);
  s.limit_t2_w = detail::field<double>(j, "limit_t2_w");
  s.threshold_w = detail::field<double>(j, "threshold_w");
  s.u1_c = detail::field<double>(j, "u1_c");
  s.ceiling_c = detail::field<double>(j, "ceiling_c");
}

}  // namespace imlc
