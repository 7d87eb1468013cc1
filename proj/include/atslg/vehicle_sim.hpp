#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "atslg/scenario_space.hpp"

namespace atslg {

/// Velocity and acceleration bounds applied to the following vehicle.
struct VehicleLimits {
  double v_min = 2.0;   // m/s
  double v_max = 40.0;  // m/s
  double a_max = 2.0;   // m/s^2
  double a_min = -4.0;  // m/s^2
};

/// Full velocity difference model, calibrated values of the cut-in case.
struct FvdmParams {
  double c0 = 0.85;
  double v1 = 6.75;
  double v2 = 7.91;
  double c1 = 0.13;
  double length = 5.0;  // L, m
  double c2 = 1.57;
  VehicleLimits limits{};
};

/// Adaptive cruise control with an emergency-braking override.
struct AccAebParams {
  double time_headway = 1.2;    // s
  double standstill_gap = 2.0;  // m
  double k_gap = 0.23;          // 1/s^2
  double k_rate = 0.74;         // 1/s
  double ttc_brake = 2.0;       // s
  VehicleLimits limits{};
};

struct EpisodeConfig {
  double dt = 0.1;        // s
  double horizon = 5.0;   // s
  double v_cav0 = 30.0;   // m/s, follower speed at the cut-in moment
  double d_min = 1.0;     // m, accident threshold on the gap
};

/// Common interface of the surrogate and the vehicle under test. The sign
/// convention is range_rate = v_lead - v_self (negative closes the gap).
class CarFollowingPolicy {
 public:
  virtual ~CarFollowingPolicy() = default;
  /// Commanded acceleration, already clamped to [a_min, a_max].
  [[nodiscard]] virtual double accel(double range, double range_rate, double v_self) const = 0;
  [[nodiscard]] virtual const VehicleLimits& limits() const = 0;
  [[nodiscard]] virtual std::string_view name() const = 0;
};

/// Unclamped FVDM acceleration C0 [V1 + V2 tanh(C1 (R - L) - C2) - Rdot].
double fvdm_raw_accel(const FvdmParams& p, double range, double range_rate) noexcept;
double fvdm_accel(const FvdmParams& p, double range, double range_rate, double v_self) noexcept;
double acc_aeb_accel(const AccAebParams& p, double range, double range_rate, double v_self) noexcept;

class FvdmPolicy final : public CarFollowingPolicy {
 public:
  explicit FvdmPolicy(FvdmParams params = {}) : params_(params) {}
  [[nodiscard]] double accel(double range, double range_rate, double v_self) const override {
    return fvdm_accel(params_, range, range_rate, v_self);
  }
  [[nodiscard]] const VehicleLimits& limits() const override { return params_.limits; }
  [[nodiscard]] std::string_view name() const override { return "fvdm"; }
  [[nodiscard]] const FvdmParams& params() const noexcept { return params_; }

 private:
  FvdmParams params_;
};

class AccAebPolicy final : public CarFollowingPolicy {
 public:
  explicit AccAebPolicy(AccAebParams params = {}) : params_(params) {}
  [[nodiscard]] double accel(double range, double range_rate, double v_self) const override {
    return acc_aeb_accel(params_, range, range_rate, v_self);
  }
  [[nodiscard]] const VehicleLimits& limits() const override { return params_.limits; }
  [[nodiscard]] std::string_view name() const override { return "accaeb"; }
  [[nodiscard]] const AccAebParams& params() const noexcept { return params_; }

 private:
  AccAebParams params_;
};

struct TraceSample {
  double t = 0.0;
  double range = 0.0;
  double range_rate = 0.0;
  double v_cav = 0.0;
  double u = 0.0;

  bool operator==(const TraceSample&) const = default;
};

struct EpisodeResult {
  bool accident = false;
  double min_distance = 0.0;
  std::optional<std::vector<TraceSample>> trajectory;

  bool operator==(const EpisodeResult&) const = default;
};

/// Validates an episode config; throws ConfigError.
void validate(const EpisodeConfig& cfg);

/// Forward-Euler cut-in episode. The background vehicle holds v_cav0 + Rdot0.
/// Throws InputError for a non-positive initial range.
EpisodeResult simulate_cutin(const CarFollowingPolicy& policy, const Scenario& x0,
                             const EpisodeConfig& cfg, bool record_trajectory = false);

/// Accident indicator at every cell center (OpenMP over cells).
ScenarioField outcome_field(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                            const EpisodeConfig& cfg);
/// Single-threaded reference for `outcome_field`.
ScenarioField outcome_field_serial(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                                   const EpisodeConfig& cfg);

}  // namespace atslg
