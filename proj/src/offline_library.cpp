#include "atslg/offline_library.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atslg/error.hpp"

namespace atslg {

ScenarioField criticality(const ScenarioField& p_s_given_x, const ScenarioField& p_x) {
  require_same_space(p_s_given_x, p_x, "criticality");
  ScenarioField v(p_x.space());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = p_s_given_x[k] * p_x[k];
  return v;
}

std::vector<double> cumulative(const ScenarioField& p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    cdf[k] = acc;
  }
  if (!cdf.empty()) {
    // Guard against a last entry slightly below 1 so u close to 1 still lands.
    const double last = cdf.back();
    for (auto& c : cdf) c /= last;
    cdf.back() = 1.0;
  }
  return cdf;
}

Library build_library(const ScenarioField& v, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("offline.epsilon: must lie in (0, 1), got " + std::to_string(epsilon));
  }
  const ScenarioSpace& space = v.space();
  const std::size_t n = space.n_total();

  Library lib;
  lib.v = v;
  lib.epsilon = epsilon;
  lib.threshold = space.criticality_threshold();
  lib.in_phi.assign(n, 0);
  std::vector<double> in_values;
  for (std::size_t k = 0; k < n; ++k) {
    if (v[k] < 0.0 || !std::isfinite(v[k])) {
      throw RangeError("build_library: criticality must be finite and non-negative");
    }
    if (v[k] > lib.threshold) {
      lib.in_phi[k] = 1;
      lib.phi.push_back(k);
      in_values.push_back(v[k]);
    }
  }
  if (lib.phi.empty()) {
    throw DegenerateLibraryError("build_library: no scenario exceeds the criticality threshold " +
                                 std::to_string(lib.threshold));
  }
  lib.w_norm = compensated_sum(in_values);

  const std::size_t n_out = n - lib.phi.size();
  // With every cell in the library there is nothing to spread epsilon over.
  const double in_mass = n_out == 0 ? 1.0 : 1.0 - epsilon;
  const double out_q = n_out == 0 ? 0.0 : epsilon / static_cast<double>(n_out);
  lib.q = ScenarioField(space);
  for (std::size_t k = 0; k < n; ++k) {
    lib.q[k] = lib.in_phi[k] ? in_mass * v[k] / lib.w_norm : out_q;
  }
  lib.q.normalize();
  lib.cdf = cumulative(lib.q);
  return lib;
}

std::size_t sample_from_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto k = static_cast<std::size_t>(it - cdf.begin());
  return std::min(k, cdf.size() - 1);
}

std::size_t sample_scenario(const Library& lib, Rng& rng) {
  return sample_from_cdf(lib.cdf, rng.uniform());
}

double total_variation(const ScenarioField& a, const ScenarioField& b) {
  require_same_space(a, b, "total_variation");
  std::vector<double> d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = std::abs(a[k] - b[k]);
  return 0.5 * compensated_sum(d);
}

}  // namespace atslg
