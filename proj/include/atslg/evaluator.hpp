#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "atslg/offline_library.hpp"
#include "atslg/rng.hpp"
#include "atslg/scenario_space.hpp"
#include "atslg/vehicle_sim.hpp"

namespace atslg {

/// Standard normal quantile, accurate to ~1e-15 in (1e-300, 1 - 1e-16).
double normal_quantile(double p);

struct EvalConfig {
  double alpha = 0.05;
  double target_half_width = 0.2;  // relative
  std::size_t max_tests = 200000;
  std::size_t warmup = 10;         // no stopping before this many tests
  std::uint64_t seed = 0;
};

void validate(const EvalConfig& cfg);

/// Single-pass mean and variance (Welford).
class RunningStats {
 public:
  void add(double x) noexcept;
  [[nodiscard]] std::size_t count() const noexcept { return n_; }
  [[nodiscard]] double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 below two samples.
  [[nodiscard]] double variance() const noexcept;
  /// z * s / sqrt(n) / mean; +inf when the mean is not positive.
  [[nodiscard]] double rel_half_width(double z) const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct EvalRecord {
  std::size_t n = 0;
  std::size_t flat = 0;
  bool outcome = false;
  double weight = 0.0;
  double mean = 0.0;
  double rel_half_width = 0.0;
};

struct EvalTrace {
  std::vector<EvalRecord> records;
  double mu_hat = 0.0;
  double sample_variance = 0.0;
  std::size_t n_used = 0;
  bool converged = false;
  std::string diagnostic;

  /// First n >= warmup whose running half-width is within `target`, or 0.
  [[nodiscard]] std::size_t tests_to_reach(double target, std::size_t warmup) const noexcept;
};

/// Accident indicator of the vehicle under test at a flat index.
using OutcomeFn = std::function<bool(std::size_t)>;

/// Simulates the policy on demand.
OutcomeFn simulated_outcome(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                            const EpisodeConfig& episode);
/// Looks the outcome up in a precomputed indicator field.
OutcomeFn field_outcome(const ScenarioField& p_a);

/// Sampling from `p_x`, weight 1 per test. Stops at the target half-width or
/// max_tests; a zero estimate ends unconverged with a diagnostic.
EvalTrace evaluate_crude(const ScenarioField& p_x, const OutcomeFn& outcome, const EvalConfig& cfg,
                         Rng& rng);
EvalTrace evaluate_crude(const ScenarioField& p_x, const CarFollowingPolicy& cav,
                         const EpisodeConfig& episode, const EvalConfig& cfg, Rng& rng);

/// Importance sampling from `q` with weights outcome * P(x) / q(x). Throws
/// SupportError before sampling if q vanishes where p_x does not.
EvalTrace evaluate_is(const ScenarioField& q, const ScenarioField& p_x, const OutcomeFn& outcome,
                      const EvalConfig& cfg, Rng& rng);
EvalTrace evaluate_is(const Library& lib, const ScenarioField& p_x, const CarFollowingPolicy& cav,
                      const EpisodeConfig& episode, const EvalConfig& cfg, Rng& rng);

/// Throws SupportError when q(x) = 0 somewhere p_x(x) > 0.
void check_support(const ScenarioField& q, const ScenarioField& p_x);

/// sum (P(A|x) P(x))^2 / q(x) - mu^2.
double theoretical_variance(const ScenarioField& q, const ScenarioField& p_a,
                            const ScenarioField& p_x);
/// sum P(A|x) P(x).
double true_rate(const ScenarioField& p_a, const ScenarioField& p_x);

/// ceil((z / (mu beta))^2 sigma2) with z = Phi^-1(1 - alpha/2).
std::size_t min_tests(double sigma2, double mu, double alpha, double beta);

struct CompareConfig {
  EvalConfig eval{};
  std::size_t n_reps = 20;
  std::vector<double> targets{0.3, 0.2, 0.1};
  std::size_t adaptive_charge = 100;  // tests spent building the customized library
  bool empirical_crude = false;       // otherwise crude MC is reported analytically
};

struct MethodStats {
  std::string method;
  bool analytic = false;
  std::vector<double> required;  // per replication
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct TargetResult {
  double target = 0.0;
  MethodStats crude, offline, adaptive;
  double accel_offline_vs_crude = 0.0;
  double accel_adaptive_vs_offline = 0.0;
  std::size_t unconverged = 0;
};

struct CompareReport {
  double mu_true = 0.0;
  double sigma2_crude = 0.0;
  double sigma2_offline = 0.0;
  double sigma2_adaptive = 0.0;
  std::size_t n_reps = 0;
  std::size_t adaptive_charge = 0;
  double alpha = 0.05;
  std::vector<TargetResult> targets;
  std::vector<double> mu_offline;   // final estimate per replication
  std::vector<double> mu_adaptive;
  EvalTrace offline_trace;          // replication 0, for plotting
  EvalTrace adaptive_trace;
  EvalTrace crude_trace;            // only with empirical_crude
};

struct CompareInputs {
  const ScenarioField& p_x;
  const ScenarioField& p_a;  // ground-truth accident field of the vehicle under test
  const Library& offline;
  const Library& customized;
};

/// Replications run concurrently; replication k draws from stream
/// "eval.rep<k>" of cfg.eval.seed. Each replication runs one trace per method
/// to the tightest target and reads the other targets off the same trace.
CompareReport compare_methods(const CompareInputs& in, const CompareConfig& cfg);
CompareReport compare_methods_serial(const CompareInputs& in, const CompareConfig& cfg);

// CSV: `n,flat,outcome,weight,mean,rel_half_width`.
void write_trace_csv(std::ostream& out, const EvalTrace& trace);
// CSV: `method,n,mean,rel_half_width` for the replication-0 traces.
void write_convergence_csv(std::ostream& out, const CompareReport& report);
// CSV: `target,crude,offline_mean,offline_std,adaptive_mean,adaptive_std`.
void write_required_tests_csv(std::ostream& out, const CompareReport& report);

}  // namespace atslg
