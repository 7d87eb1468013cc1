#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "atslg/gp_engine.hpp"
#include "atslg/offline_library.hpp"
#include "atslg/rng.hpp"
#include "atslg/scenario_space.hpp"
#include "atslg/vehicle_sim.hpp"

namespace atslg {

/// Classification-uncertainty term of the acquisition.
enum class ClassVariance {
  kBernoulli,  // p1 (1 - p1)
  kLatent,     // Laplace latent predictive variance
};

struct AdaptiveConfig {
  std::size_t n_initial = 50;
  std::size_t n_adaptive = 50;
  double gamma = 0.5;          // share of initial draws taken outside the library
  double p_th = 0.7;           // class-probability bar of the rareness set
  double w_acq = 0.5;          // weight of the variance-reduction term
  double beta_explore = 0.05;  // probability of probing the rareness set
  double epsilon = 0.1;
  ClassVariance class_variance = ClassVariance::kBernoulli;
  std::uint64_t seed = 0;
  // Optional early stop once successive importance functions stay within
  // `early_stop_tv` total variation for `early_stop_window` iterations.
  bool early_stop = false;
  double early_stop_tv = 1e-4;
  std::size_t early_stop_window = 5;
  GpOptions gp{};
};

/// Throws ConfigError naming the field.
void validate(const AdaptiveConfig& cfg);

/// Draws n_initial distinct cells: with probability gamma uniformly outside
/// the library, otherwise from the library proportionally to V. When one
/// side runs out the other is used. Throws ConfigError if n_initial > n_total.
std::vector<std::size_t> sample_initial(const Library& lib, const AdaptiveConfig& cfg, Rng& rng);

/// CAV outcome minus surrogate outcome, in {-1, 0, +1}.
double observe_dissimilarity(bool cav_accident, bool sm_accident) noexcept;

struct SurrogateUpdate {
  ScenarioField sm_updated;     // compensated surrogate, in [0, 1]
  std::vector<char> in_u;       // rareness-set mask
  std::vector<std::size_t> u_set;
};

/// Rareness set {P(S)=0 and p1 <= p_th} is pinned to 0; elsewhere
/// clamp(P(S) + mean, 0, 1).
SurrogateUpdate update_surrogate(const GatedPosterior& gated, const ScenarioField& p_s,
                                 const AdaptiveConfig& cfg);

struct Acquisition {
  ScenarioField value;           // combined score, 0 off the candidate set
  ScenarioField ei;              // expected-improvement surrogate
  std::vector<char> candidate;   // outside the rareness set and not yet observed
  double u_e = 0.0;              // max EI over candidates
  double u_c = 0.0;              // max classification variance over candidates
};

/// Per-cell classification variance selected by `kind`.
double class_variance(const GpcPosterior& gpc, std::size_t flat, ClassVariance kind) noexcept;

/// I = w EI / U_E + var_C / U_C over candidates; a term whose normalizer is
/// zero contributes zero. Throws ExhaustionError when no candidate is left.
Acquisition acquisition(const GatedPosterior& gated, const Library& lib, const ScenarioField& p_x,
                        const std::vector<char>& in_u, const std::vector<char>& observed,
                        const AdaptiveConfig& cfg);

/// One uniform draw decides the branch: below beta_explore a random
/// unobserved rareness-set cell, otherwise the argmax (lowest index on ties).
std::size_t select_next(const Acquisition& acq, const std::vector<char>& in_u,
                        const std::vector<char>& observed, const AdaptiveConfig& cfg, Rng& rng);

/// Everything recorded about one fit of the loop.
struct IterationSnapshot {
  std::size_t iteration = 0;
  std::vector<Observation> observations;  // as used for this fit
  ScenarioField sm_updated;
  ScenarioField q;
  ScenarioField acquisition;              // empty after the last fit
  std::size_t selected = 0;
  bool has_selection = false;
  std::size_t u_count = 0;
  std::size_t phi_count = 0;
  bool library_fallback = false;
  ArdSeKernel gpc_kernel, sub_kernel, opt_kernel;
  bool gpc_degenerate = false;
};

struct AdaptiveState {
  std::vector<Observation> observations;
  std::vector<char> observed;
  GatedPosterior gated;
  SurrogateUpdate surrogate;
  Library library;
  double u_e = 0.0;
  double u_c = 0.0;
};

struct AdaptiveResult {
  AdaptiveState state;
  Library customized;
  std::vector<IterationSnapshot> snapshots;
  std::size_t cav_tests = 0;
  bool stopped_early = false;
};

struct AdaptiveInputs {
  const Library& offline;
  const ScenarioField& sm_outcome;  // P(S|x), indicator of the surrogate
  const ScenarioField& p_x;
  const CarFollowingPolicy& cav;
  const EpisodeConfig& episode;
};

/// Initial sampling, then n_adaptive rounds of fit, surrogate update, library
/// regeneration, acquisition, selection and one CAV test. Streams: "initial"
/// and "adaptive" of cfg.seed.
AdaptiveResult run_adaptive(const AdaptiveInputs& in, const AdaptiveConfig& cfg);

}  // namespace atslg
