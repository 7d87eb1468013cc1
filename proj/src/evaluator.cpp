#include "atslg/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "atslg/error.hpp"

namespace atslg {

void validate(const EvalConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("eval.alpha: must lie in (0, 1)");
  if (!(cfg.target_half_width > 0.0)) {
    throw ConfigError("eval.target_half_width: must be positive");
  }
  if (cfg.max_tests < 1) throw ConfigError("eval.max_tests: must be >= 1");
}

void RunningStats::add(double x) noexcept {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::variance() const noexcept {
  return n_ < 2 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(n_ - 1));
}

double RunningStats::rel_half_width(double z) const noexcept {
  if (!(mean_ > 0.0) || n_ == 0) return std::numeric_limits<double>::infinity();
  return z * std::sqrt(variance() / static_cast<double>(n_)) / mean_;
}

std::size_t EvalTrace::tests_to_reach(double target, std::size_t warmup) const noexcept {
  for (const EvalRecord& r : records) {
    if (r.n >= warmup && r.mean > 0.0 && r.rel_half_width <= target) return r.n;
  }
  return 0;
}

OutcomeFn simulated_outcome(const CarFollowingPolicy& policy, const ScenarioSpace& space,
                            const EpisodeConfig& episode) {
  return [&policy, space, episode](std::size_t flat) {
    return simulate_cutin(policy, space.scenario(flat), episode).accident;
  };
}

OutcomeFn field_outcome(const ScenarioField& p_a) {
  return [&p_a](std::size_t flat) { return p_a[flat] > 0.5; };
}

void check_support(const ScenarioField& q, const ScenarioField& p_x) {
  require_same_space(q, p_x, "support check");
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (p_x[k] > 0.0 && !(q[k] > 0.0)) {
      throw SupportError("importance function vanishes at flat index " + std::to_string(k) +
                         " where the exposure is positive");
    }
  }
}

namespace {

template <typename Weight>
EvalTrace run_sampler(const std::vector<double>& cdf, const OutcomeFn& outcome, Weight weight,
                      const EvalConfig& cfg, Rng& rng) {
  validate(cfg);
  const double z = normal_quantile(1.0 - cfg.alpha / 2.0);
  RunningStats stats;
  EvalTrace trace;
  trace.records.reserve(std::min<std::size_t>(cfg.max_tests, 1u << 16));
  for (std::size_t n = 1; n <= cfg.max_tests; ++n) {
    const std::size_t flat = sample_from_cdf(cdf, rng.uniform());
    const bool hit = outcome(flat);
    const double w = hit ? weight(flat) : 0.0;
    stats.add(w);
    const double rhw = stats.rel_half_width(z);
    trace.records.push_back({n, flat, hit, w, stats.mean(), rhw});
    if (n >= cfg.warmup && rhw <= cfg.target_half_width) {
      trace.converged = true;
      break;
    }
  }
  trace.mu_hat = stats.mean();
  trace.sample_variance = stats.variance();
  trace.n_used = stats.count();
  if (!trace.converged) {
    trace.diagnostic = stats.mean() > 0.0
                           ? "max_tests reached before the target half-width"
                           : "no accident observed; relative half-width undefined";
  }
  return trace;
}

}  // namespace

EvalTrace evaluate_crude(const ScenarioField& p_x, const OutcomeFn& outcome, const EvalConfig& cfg,
                         Rng& rng) {
  return run_sampler(cumulative(p_x), outcome, [](std::size_t) { return 1.0; }, cfg, rng);
}

EvalTrace evaluate_crude(const ScenarioField& p_x, const CarFollowingPolicy& cav,
                         const EpisodeConfig& episode, const EvalConfig& cfg, Rng& rng) {
  return evaluate_crude(p_x, simulated_outcome(cav, p_x.space(), episode), cfg, rng);
}

EvalTrace evaluate_is(const ScenarioField& q, const ScenarioField& p_x, const OutcomeFn& outcome,
                      const EvalConfig& cfg, Rng& rng) {
  check_support(q, p_x);
  return run_sampler(
      cumulative(q), outcome, [&](std::size_t flat) { return p_x[flat] / q[flat]; }, cfg, rng);
}

EvalTrace evaluate_is(const Library& lib, const ScenarioField& p_x, const CarFollowingPolicy& cav,
                      const EpisodeConfig& episode, const EvalConfig& cfg, Rng& rng) {
  return evaluate_is(lib.q, p_x, simulated_outcome(cav, p_x.space(), episode), cfg, rng);
}

double true_rate(const ScenarioField& p_a, const ScenarioField& p_x) {
  require_same_space(p_a, p_x, "true_rate");
  std::vector<double> terms(p_a.size());
  for (std::size_t k = 0; k < terms.size(); ++k) terms[k] = p_a[k] * p_x[k];
  return compensated_sum(terms);
}

double theoretical_variance(const ScenarioField& q, const ScenarioField& p_a,
                            const ScenarioField& p_x) {
  require_same_space(q, p_x, "theoretical_variance");
  require_same_space(p_a, p_x, "theoretical_variance");
  std::vector<double> terms(q.size(), 0.0);
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double num = p_a[k] * p_x[k];
    if (num == 0.0) continue;
    if (!(q[k] > 0.0)) {
      throw SupportError("theoretical_variance: q vanishes at flat index " + std::to_string(k));
    }
    terms[k] = num * num / q[k];
  }
  const double mu = true_rate(p_a, p_x);
  return compensated_sum(terms) - mu * mu;
}

std::size_t min_tests(double sigma2, double mu, double alpha, double beta) {
  if (!(mu > 0.0)) throw NumericalError("min_tests: bound undefined for a zero rate");
  if (!(sigma2 >= 0.0)) throw RangeError("min_tests: variance must be non-negative");
  if (!(beta > 0.0)) throw ConfigError("min_tests: half-width must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double r = z / (mu * beta);
  return static_cast<std::size_t>(std::ceil(r * r * sigma2));
}

namespace {

struct RepResult {
  std::vector<double> offline, adaptive, crude;
  std::vector<std::size_t> unconverged;  // per target
  double mu_offline = 0.0;
  double mu_adaptive = 0.0;
  EvalTrace offline_trace, adaptive_trace, crude_trace;
};

double required_or_cap(const EvalTrace& t, double target, const EvalConfig& cfg,
                       std::size_t& unconverged) {
  const std::size_t n = t.tests_to_reach(target, cfg.warmup);
  if (n == 0) {
    ++unconverged;
    return static_cast<double>(cfg.max_tests);
  }
  return static_cast<double>(n);
}

RepResult run_replication(const CompareInputs& in, const CompareConfig& cfg, std::size_t k) {
  Rng rng = Rng::stream(cfg.eval.seed, "eval.rep" + std::to_string(k));
  EvalConfig tight = cfg.eval;
  tight.target_half_width = *std::min_element(cfg.targets.begin(), cfg.targets.end());
  const OutcomeFn outcome = field_outcome(in.p_a);

  RepResult r;
  EvalTrace off = evaluate_is(in.offline.q, in.p_x, outcome, tight, rng);
  EvalTrace ad = evaluate_is(in.customized.q, in.p_x, outcome, tight, rng);
  EvalTrace crude;
  if (cfg.empirical_crude) crude = evaluate_crude(in.p_x, outcome, tight, rng);
  for (double t : cfg.targets) {
    std::size_t miss = 0;
    r.offline.push_back(required_or_cap(off, t, cfg.eval, miss));
    r.adaptive.push_back(static_cast<double>(cfg.adaptive_charge) +
                         required_or_cap(ad, t, cfg.eval, miss));
    if (cfg.empirical_crude) r.crude.push_back(required_or_cap(crude, t, cfg.eval, miss));
    r.unconverged.push_back(miss);
  }
  r.mu_offline = off.mu_hat;
  r.mu_adaptive = ad.mu_hat;
  if (k == 0) {
    r.offline_trace = std::move(off);
    r.adaptive_trace = std::move(ad);
    r.crude_trace = std::move(crude);
  }
  return r;
}

void summarize(MethodStats& s) {
  const auto& v = s.required;
  if (v.empty()) return;
  const double n = static_cast<double>(v.size());
  s.mean = compensated_sum(v) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
}

void check_inputs(const CompareInputs& in, const CompareConfig& cfg) {
  validate(cfg.eval);
  if (cfg.n_reps < 1) throw ConfigError("compare.reps: must be >= 1");
  if (cfg.targets.empty()) throw ConfigError("compare.targets: at least one target is required");
  for (double t : cfg.targets) {
    if (!(t > 0.0)) throw ConfigError("compare.targets: targets must be positive");
  }
  require_same_space(in.p_a, in.p_x, "compare_methods");
  check_support(in.offline.q, in.p_x);
  check_support(in.customized.q, in.p_x);
}

CompareReport assemble(const CompareInputs& in, const CompareConfig& cfg,
                       std::vector<RepResult>& reps) {
  CompareReport rep;
  rep.mu_true = true_rate(in.p_a, in.p_x);
  rep.sigma2_crude = rep.mu_true * (1.0 - rep.mu_true);
  rep.sigma2_offline = theoretical_variance(in.offline.q, in.p_a, in.p_x);
  rep.sigma2_adaptive = theoretical_variance(in.customized.q, in.p_a, in.p_x);
  rep.n_reps = cfg.n_reps;
  rep.adaptive_charge = cfg.adaptive_charge;
  rep.alpha = cfg.eval.alpha;
  for (std::size_t t = 0; t < cfg.targets.size(); ++t) {
    TargetResult tr;
    tr.target = cfg.targets[t];
    tr.crude.method = "crude";
    tr.offline.method = "offline";
    tr.adaptive.method = "adaptive";
    tr.crude.analytic = !cfg.empirical_crude;
    for (const RepResult& r : reps) {
      tr.offline.required.push_back(r.offline[t]);
      tr.adaptive.required.push_back(r.adaptive[t]);
      if (cfg.empirical_crude) tr.crude.required.push_back(r.crude[t]);
      tr.unconverged += r.unconverged[t];
    }
    if (!cfg.empirical_crude) {
      const auto n = rep.mu_true > 0.0
                         ? static_cast<double>(min_tests(rep.sigma2_crude, rep.mu_true,
                                                         cfg.eval.alpha, tr.target))
                         : std::numeric_limits<double>::infinity();
      tr.crude.required.assign(reps.size(), n);
    }
    summarize(tr.crude);
    summarize(tr.offline);
    summarize(tr.adaptive);
    tr.accel_offline_vs_crude = tr.crude.mean / tr.offline.mean;
    tr.accel_adaptive_vs_offline = tr.offline.mean / tr.adaptive.mean;
    rep.targets.push_back(std::move(tr));
  }
  for (const RepResult& r : reps) {
    rep.mu_offline.push_back(r.mu_offline);
    rep.mu_adaptive.push_back(r.mu_adaptive);
  }
  rep.offline_trace = std::move(reps.front().offline_trace);
  rep.adaptive_trace = std::move(reps.front().adaptive_trace);
  rep.crude_trace = std::move(reps.front().crude_trace);
  return rep;
}

}  // namespace

CompareReport compare_methods(const CompareInputs& in, const CompareConfig& cfg) {
  check_inputs(in, cfg);
  std::vector<RepResult> reps(cfg.n_reps);
  const auto n = static_cast<long>(cfg.n_reps);
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < n; ++k) {
    reps[static_cast<std::size_t>(k)] = run_replication(in, cfg, static_cast<std::size_t>(k));
  }
  return assemble(in, cfg, reps);
}

CompareReport compare_methods_serial(const CompareInputs& in, const CompareConfig& cfg) {
  check_inputs(in, cfg);
  std::vector<RepResult> reps;
  reps.reserve(cfg.n_reps);
  for (std::size_t k = 0; k < cfg.n_reps; ++k) reps.push_back(run_replication(in, cfg, k));
  return assemble(in, cfg, reps);
}

void write_trace_csv(std::ostream& out, const EvalTrace& trace) {
  out << "n,flat,outcome,weight,mean,rel_half_width\n";
  out.precision(17);
  for (const EvalRecord& r : trace.records) {
    out << r.n << ',' << r.flat << ',' << (r.outcome ? 1 : 0) << ',' << r.weight << ',' << r.mean
        << ',' << r.rel_half_width << '\n';
  }
}

void write_convergence_csv(std::ostream& out, const CompareReport& report) {
  out << "method,n,mean,rel_half_width\n";
  out.precision(17);
  const auto dump = [&](const char* name, const EvalTrace& t) {
    for (const EvalRecord& r : t.records) {
      out << name << ',' << r.n << ',' << r.mean << ',' << r.rel_half_width << '\n';
    }
  };
  dump("crude", report.crude_trace);
  dump("offline", report.offline_trace);
  dump("adaptive", report.adaptive_trace);
}

void write_required_tests_csv(std::ostream& out, const CompareReport& report) {
  out << "target,crude,offline_mean,offline_std,adaptive_mean,adaptive_std\n";
  out.precision(17);
  for (const TargetResult& t : report.targets) {
    out << t.target << ',' << t.crude.mean << ',' << t.offline.mean << ',' << t.offline.std << ','
        << t.adaptive.mean << ',' << t.adaptive.std << '\n';
  }
}

}  // namespace atslg
