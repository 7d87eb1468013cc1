#include "atslg/vehicle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atslg/error.hpp"

namespace atslg {
namespace {

// Floor on the closing speed when forming time-to-collision.
constexpr double kTtcEps = 1e-9;

double clamp_accel(const VehicleLimits& lim, double u) noexcept {
  return std::clamp(u, lim.a_min, lim.a_max);
}

}  // namespace

double fvdm_raw_accel(const FvdmParams& p, double range, double range_rate) noexcept {
  return p.c0 * (p.v1 + p.v2 * std::tanh(p.c1 * (range - p.length) - p.c2) - range_rate);
}

double fvdm_accel(const FvdmParams& p, double range, double range_rate, double /*v_self*/) noexcept {
  return clamp_accel(p.limits, fvdm_raw_accel(p, range, range_rate));
}

double acc_aeb_accel(const AccAebParams& p, double range, double range_rate, double v_self) noexcept {
  if (v_self > 0.0 && range_rate < 0.0 &&
      range / std::max(-range_rate, kTtcEps) < p.ttc_brake) {
    return p.limits.a_min;
  }
  const double gap_error = range - p.standstill_gap - p.time_headway * v_self;
  return clamp_accel(p.limits, p.k_gap * gap_error + p.k_rate * range_rate);
}

void validate(const EpisodeConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("vehicle.episode.dt: must be positive");
  if (!(cfg.horizon >= cfg.dt)) throw ConfigError("vehicle.episode.horizon: must be >= dt");
  if (!(cfg.d_min > 0.0)) throw ConfigError("vehicle.episode.d_min: must be positive");
  if (!std::isfinite(cfg.v_cav0)) throw ConfigError("vehicle.episode.v_cav0: must be finite");
}

EpisodeResult simulate_cutin(const CarFollowingPolicy& policy, const Scenario& x0,
                             const EpisodeConfig& cfg, bool record_trajectory) {
  if (!(x0.range > 0.0)) {
    throw InputError("simulate_cutin: initial range must be positive, got " +
                     std::to_string(x0.range));
  }
  const VehicleLimits& lim = policy.limits();
  const auto steps = static_cast<long>(std::lround(cfg.horizon / cfg.dt));
  const double v_bv = cfg.v_cav0 + x0.range_rate;

  double range = x0.range;
  double v = std::clamp(cfg.v_cav0, lim.v_min, lim.v_max);
  double min_distance = range;

  EpisodeResult result;
  if (record_trajectory) {
    result.trajectory.emplace();
    result.trajectory->reserve(static_cast<std::size_t>(steps) + 1);
  }
  for (long k = 0; k < steps; ++k) {
    const double range_rate = v_bv - v;
    const double u = policy.accel(range, range_rate, v);
    if (record_trajectory) {
      result.trajectory->push_back({static_cast<double>(k) * cfg.dt, range, range_rate, v, u});
    }
    range += range_rate * cfg.dt;
    v = std::clamp(v + u * cfg.dt, lim.v_min, lim.v_max);
    min_distance = std::min(min_distance, range);
  }
  if (record_trajectory) {
    const double range_rate = v_bv - v;
    result.trajectory->push_back({static_cast<double>(steps) * cfg.dt, range, range_rate, v,
                                  policy.accel(range, range_rate, v)});
  }
  result.min_distance = min_distance;
  result.accident = min_distance < cfg.d_min;
  return result;
}

ScenarioField outcome_field(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                            const EpisodeConfig& cfg) {
  validate(cfg);
  std::vector<double> values(space.n_total(), 0.0);
  const auto n = static_cast<long>(values.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    const auto flat = static_cast<std::size_t>(k);
    values[flat] = simulate_cutin(policy, space.scenario(flat), cfg).accident ? 1.0 : 0.0;
  }
  return ScenarioField(space, std::move(values));
}

ScenarioField outcome_field_serial(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                                   const EpisodeConfig& cfg) {
  validate(cfg);
  ScenarioField field(space);
  for (std::size_t k = 0; k < field.size(); ++k) {
    field[k] = simulate_cutin(policy, space.scenario(k), cfg).accident ? 1.0 : 0.0;
  }
  return field;
}

}  // namespace atslg
