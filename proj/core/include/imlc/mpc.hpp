#pragma once

// Two-hour receding-horizon controller. Cost per candidate setpoint pair:
//   sum_k y_k + V_k,  V_k = (y_k - P_limit,k)^2 if y_k > P_limit,k else 0
// with y_k predicted by surrogates and every pair on a 1 K grid enumerated.

#include <array>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "imlc/shapley.hpp"
#include "imlc/testbed.hpp"

namespace imlc::mpc {

inline constexpr double kSetpointLowC = 22.0;
inline constexpr double kSetpointHighC = 26.0;
inline constexpr double kGridStepK = 1.0;
inline constexpr int kHorizon = 2;

/// Surrogate input vector: [setpoint, zone_temp, oa_temp, oa_radiation, occupancy].
std::vector<double> features(double setpoint, double zone_temp, const testbed::Disturbance& d);

struct MpcProblem {
  double zone_temp_c = 0.0;      // x0, measured at the decision instant t
  testbed::Disturbance d0;       // acts over the first horizon hour
  testbed::Disturbance d1;       // acts over the second horizon hour
  double limit_t1_w = testbed::kNormalPowerLimitW;
  double limit_t2_w = testbed::kNormalPowerLimitW;
  shapley::Predictor f_x;        // next zone temperature
  shapley::Predictor f_y;        // cooling over the hour
  double setpoint_low_c = kSetpointLowC;
  double setpoint_high_c = kSetpointHighC;
  double grid_step_k = kGridStepK;

  /// Throws InvalidInputError / SchemaError.
  void validate() const;
  std::vector<double> grid() const;
};

struct Rollout {
  double x1 = 0.0, y1 = 0.0, v1 = 0.0;
  double x2 = 0.0, y2 = 0.0, v2 = 0.0;
  double cost = 0.0;
};

struct Candidate {
  double u1 = 0.0;
  double u2 = 0.0;
  double cost = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct MpcDecision {
  double u1 = kSetpointHighC, u2 = kSetpointHighC;
  double x1 = 0.0, x2 = 0.0;
  double y1 = 0.0, y2 = 0.0;
  double v1 = 0.0, v2 = 0.0;
  double cost = 0.0;
  std::vector<Candidate> candidates;

  bool operator==(const MpcDecision&) const = default;
};

/// Quadratic demand-response penalty; zero at or under the limit.
double penalty(double power_w, double limit_w) noexcept;

/// x1 = f_x(u1, x0, d0), y1 = f_y(u1, x0, d0); x2 = f_x(u2, x1, d1),
/// y2 = f_y(u2, x1, d1). Predicted cooling is clamped at 0 before costing.
Rollout rollout(const MpcProblem& problem, double u1, double u2);

/// Exhaustive search. Ties prefer the larger u1, then the larger u2.
MpcDecision optimize(const MpcProblem& problem);

void to_json(nlohmann::json& j, const MpcDecision& d);
void from_json(const nlohmann::json& j, MpcDecision& d);

}  // namespace imlc::mpc
