#include "atslg/adaptive.hpp"

#include <algorithm>
#include <string>

#include "atslg/error.hpp"

namespace atslg {
namespace {

void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string("adaptive.") + name + ": must lie in [0, 1]");
  }
}

// Weighted draw without replacement from `weights` (zeroed once taken).
std::size_t draw_weighted(std::vector<double>& weights, Rng& rng) {
  const double total = compensated_sum(weights);
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last = k;
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return last;
}

}  // namespace

void validate(const AdaptiveConfig& cfg) {
  if (cfg.n_initial < 1) throw ConfigError("adaptive.n_initial: must be >= 1");
  require_probability(cfg.gamma, "gamma");
  require_probability(cfg.p_th, "p_th");
  require_probability(cfg.beta_explore, "beta_explore");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
    throw ConfigError("adaptive.epsilon: must lie in (0, 1)");
  }
  if (!(cfg.w_acq >= 0.0)) throw ConfigError("adaptive.w_acq: must be non-negative");
  if (!(cfg.gp.jitter > 0.0)) throw ConfigError("adaptive.jitter: must be positive");
  if (cfg.gp.restarts < 1) throw ConfigError("adaptive.restarts: must be >= 1");
}

std::vector<std::size_t> sample_initial(const Library& lib, const AdaptiveConfig& cfg, Rng& rng) {
  const std::size_t n = lib.space().n_total();
  if (cfg.n_initial > n) {
    throw ConfigError("adaptive.n_initial: exceeds the number of scenarios (" +
                      std::to_string(n) + ")");
  }
  std::vector<double> in_w(n, 0.0);
  std::vector<std::size_t> outside;
  for (std::size_t k = 0; k < n; ++k) {
    if (lib.contains(k)) {
      in_w[k] = lib.v[k];
    } else {
      outside.push_back(k);
    }
  }
  std::size_t in_left = lib.phi.size();

  std::vector<std::size_t> picks;
  picks.reserve(cfg.n_initial);
  while (picks.size() < cfg.n_initial) {
    bool take_outside = rng.uniform() < cfg.gamma;
    if (take_outside && outside.empty()) take_outside = false;
    if (!take_outside && in_left == 0) take_outside = true;
    if (take_outside) {
      const auto j = static_cast<std::size_t>(rng.below(outside.size()));
      picks.push_back(outside[j]);
      outside.erase(outside.begin() + static_cast<std::ptrdiff_t>(j));
    } else {
      const std::size_t k = draw_weighted(in_w, rng);
      picks.push_back(k);
      in_w[k] = 0.0;
      --in_left;
    }
  }
  return picks;
}

double observe_dissimilarity(bool cav_accident, bool sm_accident) noexcept {
  return (cav_accident ? 1.0 : 0.0) - (sm_accident ? 1.0 : 0.0);
}

SurrogateUpdate update_surrogate(const GatedPosterior& gated, const ScenarioField& p_s,
                                 const AdaptiveConfig& cfg) {
  require_same_space(gated.mean, p_s, "update_surrogate");
  SurrogateUpdate out;
  out.sm_updated = ScenarioField(p_s.space());
  out.in_u.assign(p_s.size(), 0);
  for (std::size_t k = 0; k < p_s.size(); ++k) {
    if (p_s[k] == 0.0 && gated.gpc.p_class1[k] <= cfg.p_th) {
      out.in_u[k] = 1;
      out.u_set.push_back(k);
      out.sm_updated[k] = 0.0;
    } else {
      out.sm_updated[k] = std::clamp(p_s[k] + gated.mean[k], 0.0, 1.0);
    }
  }
  return out;
}

double class_variance(const GpcPosterior& gpc, std::size_t flat, ClassVariance kind) noexcept {
  if (kind == ClassVariance::kLatent) return gpc.latent_var[flat];
  const double p1 = gpc.p_class1[flat];
  return p1 * (1.0 - p1);
}

Acquisition acquisition(const GatedPosterior& gated, const Library& lib, const ScenarioField& p_x,
                        const std::vector<char>& in_u, const std::vector<char>& observed,
                        const AdaptiveConfig& cfg) {
  require_same_space(lib.q, p_x, "acquisition");
  const std::size_t n = p_x.size();
  Acquisition acq;
  acq.value = ScenarioField(p_x.space());
  acq.ei = ScenarioField(p_x.space());
  acq.candidate.assign(n, 0);
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (in_u[k] || observed[k]) continue;
    acq.candidate[k] = 1;
    any = true;
    const double p1 = gated.gpc.p_class1[k];
    const double e1 = gated.gp_sub.mean[k] * gated.gp_sub.mean[k] + gated.gp_sub.var[k];
    const double e2 = gated.gp_opt.mean[k] * gated.gp_opt.mean[k] + gated.gp_opt.var[k];
    acq.ei[k] = p_x[k] * p_x[k] / lib.q[k] * (p1 * e1 + (1.0 - p1) * e2);
    acq.u_e = std::max(acq.u_e, acq.ei[k]);
    acq.u_c = std::max(acq.u_c, class_variance(gated.gpc, k, cfg.class_variance));
  }
  if (!any) throw ExhaustionError("acquisition: every scenario is observed or in the rareness set");
  for (std::size_t k = 0; k < n; ++k) {
    if (!acq.candidate[k]) continue;
    const double exploit = acq.u_e > 0.0 ? cfg.w_acq * acq.ei[k] / acq.u_e : 0.0;
    const double explore =
        acq.u_c > 0.0 ? class_variance(gated.gpc, k, cfg.class_variance) / acq.u_c : 0.0;
    acq.value[k] = exploit + explore;
  }
  return acq;
}

std::size_t select_next(const Acquisition& acq, const std::vector<char>& in_u,
                        const std::vector<char>& observed, const AdaptiveConfig& cfg, Rng& rng) {
  const double u = rng.uniform();
  if (u < cfg.beta_explore) {
    std::vector<std::size_t> pool;
    for (std::size_t k = 0; k < in_u.size(); ++k) {
      if (in_u[k] && !observed[k]) pool.push_back(k);
    }
    if (!pool.empty()) return pool[static_cast<std::size_t>(rng.below(pool.size()))];
  }
  std::size_t best = acq.candidate.size();
  for (std::size_t k = 0; k < acq.candidate.size(); ++k) {
    if (!acq.candidate[k]) continue;
    if (best == acq.candidate.size() || acq.value[k] > acq.value[best]) best = k;
  }
  if (best == acq.candidate.size()) throw ExhaustionError("select_next: no candidate scenario");
  return best;
}

namespace {

struct FitOutcome {
  GatedPosterior gated;
  SurrogateUpdate surrogate;
  Library library;
  bool fallback = false;
};

FitOutcome fit_round(const AdaptiveInputs& in, const AdaptiveConfig& cfg,
                     const std::vector<Observation>& obs, const Library& previous,
                     std::size_t iteration) {
  GpOptions gp = cfg.gp;
  gp.seed = cfg.seed ^ fnv1a64("gp.iter" + std::to_string(iteration));
  FitOutcome out;
  out.gated = gated_fit(in.p_x.space(), obs, gp);
  out.surrogate = update_surrogate(out.gated, in.sm_outcome, cfg);
  try {
    out.library = build_library(criticality(out.surrogate.sm_updated, in.p_x), cfg.epsilon);
  } catch (const DegenerateLibraryError&) {
    out.library = previous;
    out.fallback = true;
  }
  return out;
}

}  // namespace

AdaptiveResult run_adaptive(const AdaptiveInputs& in, const AdaptiveConfig& cfg) {
  validate(cfg);
  validate(in.episode);
  const ScenarioSpace& space = in.p_x.space();
  require_same_space(in.sm_outcome, in.p_x, "run_adaptive");
  require_same_space(in.offline.q, in.p_x, "run_adaptive");

  AdaptiveResult res;
  AdaptiveState& st = res.state;
  st.observed.assign(space.n_total(), 0);
  st.library = in.offline;

  const auto test = [&](std::size_t flat) {
    const bool cav = simulate_cutin(in.cav, space.scenario(flat), in.episode).accident;
    ++res.cav_tests;
    st.observations.push_back({flat, observe_dissimilarity(cav, in.sm_outcome[flat] > 0.5)});
    st.observed[flat] = 1;
  };

  Rng init_rng = Rng::stream(cfg.seed, "initial");
  for (std::size_t flat : sample_initial(in.offline, cfg, init_rng)) test(flat);

  Rng rng = Rng::stream(cfg.seed, "adaptive");
  std::size_t calm = 0;
  for (std::size_t it = 0;; ++it) {
    FitOutcome fit = fit_round(in, cfg, st.observations, st.library, it);
    const double tv = total_variation(fit.library.q, st.library.q);
    st.gated = std::move(fit.gated);
    st.surrogate = std::move(fit.surrogate);
    st.library = std::move(fit.library);

    IterationSnapshot snap;
    snap.iteration = it;
    snap.observations = st.observations;
    snap.sm_updated = st.surrogate.sm_updated;
    snap.q = st.library.q;
    snap.u_count = st.surrogate.u_set.size();
    snap.phi_count = st.library.phi.size();
    snap.library_fallback = fit.fallback;
    snap.gpc_kernel = st.gated.gpc.kernel;
    snap.sub_kernel = st.gated.gp_sub.kernel;
    snap.opt_kernel = st.gated.gp_opt.kernel;
    snap.gpc_degenerate = st.gated.gpc.degenerate;

    calm = (it > 0 && tv < cfg.early_stop_tv) ? calm + 1 : 0;
    const bool early = cfg.early_stop && calm >= cfg.early_stop_window;
    if (it == cfg.n_adaptive || early) {
      res.stopped_early = early && it < cfg.n_adaptive;
      res.snapshots.push_back(std::move(snap));
      break;
    }

    const Acquisition acq =
        acquisition(st.gated, st.library, in.p_x, st.surrogate.in_u, st.observed, cfg);
    st.u_e = acq.u_e;
    st.u_c = acq.u_c;
    const std::size_t next = select_next(acq, st.surrogate.in_u, st.observed, cfg, rng);
    snap.acquisition = acq.value;
    snap.selected = next;
    snap.has_selection = true;
    res.snapshots.push_back(std::move(snap));
    test(next);
  }
  res.customized = st.library;
  return res;
}

}  // namespace atslg
