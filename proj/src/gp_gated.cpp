#include "atslg/error.hpp"
#include "atslg/gp_engine.hpp"

namespace atslg {

GatedPosterior gated_fit(const ScenarioSpace& space, const std::vector<Observation>& obs,
                         const GpOptions& opt) {
  if (obs.empty()) throw InputError("gated_fit: at least one observation is required");
  Points all, sub, optimal;
  std::vector<double> labels, f_sub, f_opt;
  for (const Observation& o : obs) {
    const Scenario s = space.scenario(o.flat);
    all.push_back(s);
    if (o.f != 0.0) {
      labels.push_back(1.0);
      sub.push_back(s);
      f_sub.push_back(o.f);
    } else {
      labels.push_back(-1.0);
      optimal.push_back(s);
      f_opt.push_back(0.0);
    }
  }

  GatedPosterior g;
  g.gpc = gpc_fit(space, all, labels, opt);
  g.gp_sub = sub.empty() ? gpr_prior(space, opt.init) : gpr_fit(space, sub, f_sub, opt);
  g.gp_opt = optimal.empty() ? gpr_prior(space, opt.init) : gpr_fit(space, optimal, f_opt, opt);
  g.mean = ScenarioField(space);
  for (std::size_t k = 0; k < g.mean.size(); ++k) {
    const double p1 = g.gpc.p_class1[k];
    g.mean[k] = p1 * g.gp_sub.mean[k] + (1.0 - p1) * g.gp_opt.mean[k];
  }
  return g;
}

}  // namespace atslg
