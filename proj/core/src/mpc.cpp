#include "imlc/mpc.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>

#include "imlc/errors.hpp"
#include "json_util.hpp"

namespace imlc::mpc {

std::vector<double> features(double setpoint, double zone_temp, const testbed::Disturbance& d) {
  return {setpoint, zone_temp, d.oa_temp_c, d.oa_radiation_wm2, d.occupancy};
}

void MpcProblem::validate() const {
  if (!(setpoint_low_c <= setpoint_high_c)) throw InvalidInputError("setpoint bounds out of order");
  if (!(grid_step_k > 0.0)) throw InvalidInputError("grid step must be > 0");
  if (!(limit_t1_w > 0.0) || !(limit_t2_w > 0.0)) throw InvalidInputError("power limits must be > 0");
  if (!std::isfinite(zone_temp_c)) throw InvalidInputError("zone temperature is not finite");
  if (f_x.size() != 5) throw SchemaError(fmt::format("f_x takes {} inputs, expected 5", f_x.size()));
  if (f_y.size() != 5) throw SchemaError(fmt::format("f_y takes {} inputs, expected 5", f_y.size()));
}

std::vector<double> MpcProblem::grid() const {
  std::vector<double> g;
  const auto steps = static_cast<int>(std::floor((setpoint_high_c - setpoint_low_c) / grid_step_k + 1e-9));
  for (int k = 0; k <= steps; ++k) g.push_back(setpoint_low_c + k * grid_step_k);
  return g;
}

double penalty(double power_w, double limit_w) noexcept {
  if (power_w > limit_w) {
    const double excess = power_w - limit_w;
    return excess * excess;
  }
  return 0.0;
}

namespace {

// Predicted power is floored at zero; NaN passes through so the caller sees it.
double floor_power(double y) { return y < 0.0 ? 0.0 : y; }

}  // namespace

Rollout rollout(const MpcProblem& problem, double u1, double u2) {
  problem.validate();
  for (double u : {u1, u2}) {
    if (!(u >= problem.setpoint_low_c && u <= problem.setpoint_high_c)) {
      throw InvalidInputError(fmt::format("setpoint {} outside [{}, {}]", u, problem.setpoint_low_c,
                                          problem.setpoint_high_c));
    }
  }
  Rollout r;
  const auto first = features(u1, problem.zone_temp_c, problem.d0);
  r.x1 = problem.f_x(first);
  r.y1 = floor_power(problem.f_y(first));
  r.v1 = penalty(r.y1, problem.limit_t1_w);
  const auto second = features(u2, r.x1, problem.d1);
  r.x2 = problem.f_x(second);
  r.y2 = floor_power(problem.f_y(second));
  r.v2 = penalty(r.y2, problem.limit_t2_w);
  r.cost = r.y1 + r.v1 + r.y2 + r.v2;
  return r;
}

MpcDecision optimize(const MpcProblem& problem) {
  problem.validate();
  const auto grid = problem.grid();
  MpcDecision best;
  bool found = false;
  Rollout best_roll;
  best.candidates.reserve(grid.size() * grid.size());
  for (double u1 : grid) {
    for (double u2 : grid) {
      const Rollout r = rollout(problem, u1, u2);
      best.candidates.push_back({u1, u2, r.cost});
      if (!std::isfinite(r.cost)) continue;
      const bool better = !found || r.cost < best.cost ||
                          (r.cost == best.cost && (u1 > best.u1 || (u1 == best.u1 && u2 > best.u2)));
      if (better) {
        found = true;
        best.u1 = u1;
        best.u2 = u2;
        best.cost = r.cost;
        best_roll = r;
      }
    }
  }
  if (!found) throw OptimizationFailedError("every candidate setpoint pair has a non-finite cost");
  best.x1 = best_roll.x1;
  best.x2 = best_roll.x2;
  best.y1 = best_roll.y1;
  best.y2 = best_roll.y2;
  best.v1 = best_roll.v1;
  best.v2 = best_roll.v2;
  return best;
}

void to_json(nlohmann::json& j, const MpcDecision& d) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : d.candidates) candidates.push_back({{"u1", c.u1}, {"u2", c.u2}, {"cost", c.cost}});
  j = nlohmann::json{{"u1_c", d.u1}, {"u2_c", d.u2}, {"x1_c", d.x1}, {"x2_c", d.x2},
                     {"y1_w", d.y1}, {"y2_w", d.y2}, {"v1", d.v1},   {"v2", d.v2},
                     {"cost", d.cost}, {"candidates", candidates}};
}

void from_json(const nlohmann::json& j, MpcDecision& d) {
  using detail::field;
  d.u1 = field<double>(j, "u1_c");
  d.u2 = field<double>(j, "u2_c");
  d.x1 = field<double>(j, "x1_c");
  d.x2 = field<double>(j, "x2_c");
  d.y1 = field<double>(j, "y1_w");
  d.y2 = field<double>(j, "y2_w");
  d.v1 = field<double>(j, "v1");
  d.v2 = field<double>(j, "v2");
  d.cost = field<double>(j, "cost");
  d.candidates.clear();
  const auto cands = field<nlohmann::json>(j, "candidates");
  if (!cands.is_array()) throw DeserializationError("candidates", "not an array");
  for (const auto& c : cands) {
    // Non-finite costs serialize as null.
    const auto cost = c.find("cost");
    const double value = (cost != c.end() && cost->is_null()) ? std::nan("") : field<double>(c, "cost");
    d.candidates.push_back({field<double>(c, "u1"), field<double>(c, "u2"), value});
  }
}

}  // namespace imlc::mpc
