#pragma once

#include <cstddef>
#include <vector>

#include "atslg/rng.hpp"
#include "atslg/scenario_space.hpp"

namespace atslg {

/// Critical-scenario set with its epsilon-greedy importance function.
struct Library {
  ScenarioField v;                // criticality V(x)
  ScenarioField q;                // importance function, sums to one
  std::vector<std::size_t> phi;   // flat indices with V > threshold, ascending
  std::vector<char> in_phi;       // membership mask, flat order
  std::vector<double> cdf;        // running sum of q in flat order
  double w_norm = 0.0;            // W = sum of V over phi
  double epsilon = 0.1;
  double threshold = 0.0;         // 1 / n_total

  [[nodiscard]] const ScenarioSpace& space() const noexcept { return q.space(); }
  [[nodiscard]] bool contains(std::size_t flat) const { return in_phi[flat] != 0; }
};

/// V(x) = P(S|x) P(x). Throws ShapeError on grid mismatch.
ScenarioField criticality(const ScenarioField& p_s_given_x, const ScenarioField& p_x);

/// Thresholds V strictly at 1/n_total and spreads epsilon uniformly outside
/// the library. Throws ConfigError for epsilon outside (0,1) and
/// DegenerateLibraryError for an empty library.
Library build_library(const ScenarioField& v, double epsilon);

/// Inverse-CDF draw over flat order.
std::size_t sample_scenario(const Library& lib, Rng& rng);

/// Inverse-CDF draw from any running-sum table.
std::size_t sample_from_cdf(const std::vector<double>& cdf, double u);

/// Running sum of a field, with the last entry pinned to exactly 1 when the
/// field is a distribution.
std::vector<double> cumulative(const ScenarioField& p);

/// Total-variation distance 0.5 * sum |a - b|.
double total_variation(const ScenarioField& a, const ScenarioField& b);

}  // namespace atslg
