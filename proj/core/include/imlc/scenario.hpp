#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace imlc {

enum class Scenario { kPrecool = 1, kNormal = 2, kEventNoPrecool = 3 };

std::string to_string(Scenario s);

/// A scenario label plus the values the rubric compared.
struct ScenarioLabel {
  Scenario scenario = Scenario::kNormal;
  double limit_t2_w = 0.0;
  double threshold_w = 0.0;
  double u1_c = 0.0;
  double ceiling_c = 0.0;

  int id() const noexcept { return static_cast<int>(scenario); }
  bool operator==(const ScenarioLabel&) const = default;
};

void to_json(nlohmann::json& j, const ScenarioLabel& s);
void from_json(const nlohmann::json& j, ScenarioLabel& s);

}  // namespace imlc
