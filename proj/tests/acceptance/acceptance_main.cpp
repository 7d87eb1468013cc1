// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Criteria 6, 7, 8 and 10 share one adaptive run and one 100-replication
// comparison on the default configuration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "atslg/adaptive.hpp"
#include "atslg/config.hpp"
#include "atslg/error.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/gp_engine.hpp"
#include "atslg/offline_library.hpp"
#include "atslg/pipeline.hpp"
#include "atslg/vehicle_sim.hpp"

using namespace atslg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ------------------------------------------------------------ criterion 1

Outcome grid_fidelity() {
  const ScenarioSpace s;
  const bool ok = s.n_total() == 3420 && s.n_r() == 45 && s.n_rdot() == 76 &&
                  s.criticality_threshold() == 1.0 / 3420.0;
  return {ok, "n=" + std::to_string(s.n_total()) + " threshold=" +
                  fmt("%.4e", s.criticality_threshold())};
}

// ------------------------------------------------------------ criterion 2

Outcome fvdm_correctness() {
  const FvdmParams p;
  Rng rng(2);
  double worst = 0.0;
  bool clamped = true;
  for (int i = 0; i < 10000; ++i) {
    const double r = 0.5 + 120 * rng.uniform();
    const double rd = -30 + 45 * rng.uniform();
    const double v = 40 * rng.uniform();
    const double direct = 0.85 * (6.75 + 7.91 * std::tanh(0.13 * (r - 5.0) - 1.57) - rd);
    worst = std::max(worst, std::abs(fvdm_raw_accel(p, r, rd) - direct));
    const double u = fvdm_accel(p, r, rd, v);
    clamped = clamped && u >= -4.0 && u <= 2.0;
  }
  return {worst <= 1e-12 && clamped, "max|diff|=" + fmt("%.2e", worst) +
                                         (clamped ? " clamp ok" : " clamp violated")};
}

// -------------------------------------------------------- toy grid (3, 4)

struct Toy {
  ScenarioSpace space{GridConfig{0, 20, 2, 0, 3.6, 0.4}};
  ScenarioField p_x{space};
  ScenarioField p_a{space};
  ScenarioField p_s{space};
  Library lib;
  Toy() {
    for (std::size_t k = 0; k < space.n_total(); ++k) {
      const ScenarioIndex i = space.index(k);
      p_x[k] = std::exp(-0.1 * std::abs(double(i.i_r) - 6) - 0.2 * double(i.i_rdot));
      p_a[k] = (i.i_r + i.i_rdot < 5) ? 1.0 : 0.0;
      p_s[k] = (i.i_r + i.i_rdot < 4) ? 1.0 : 0.0;  // imperfect surrogate
    }
    p_x.normalize();
    lib = build_library(criticality(p_s, p_x), 0.1);
  }
};

Outcome is_unbiased() {
  const Toy t;
  const double mu = true_rate(t.p_a, t.p_x);
  EvalConfig cfg;
  cfg.max_tests = 200;
  cfg.target_half_width = 1e-12;
  cfg.warmup = 200;  // fixed sample size; zero-variance prefixes would otherwise stop early
  const OutcomeFn out = field_outcome(t.p_a);
  RunningStats reps;
  std::size_t short_runs = 0;
  for (int r = 0; r < 1000; ++r) {
    Rng rng = Rng::stream(3, "rep" + std::to_string(r));
    const EvalTrace tr = evaluate_is(t.lib.q, t.p_x, out, cfg, rng);
    if (tr.n_used != 200) ++short_runs;
    reps.add(tr.mu_hat);
  }
  if (short_runs > 0) return {false, std::to_string(short_runs) + " replications stopped before 200 tests"};
  const double se = std::sqrt(reps.variance() / 1000.0);
  const double z = (reps.mean() - mu) / se;
  return {std::abs(z) < 4.0, "mu=" + fmt("%.6g", mu) + " mean=" + fmt("%.6g", reps.mean()) +
                                 " z=" + fmt("%.2f", z)};
}

Outcome variance_formula() {
  const Toy t;
  const double s2 = theoretical_variance(t.lib.q, t.p_a, t.p_x);
  EvalConfig cfg;
  cfg.max_tests = 500;
  cfg.target_half_width = 1e-12;
  cfg.warmup = 500;
  Rng rng = Rng::stream(4, "weights");
  const EvalTrace tr = evaluate_is(t.lib.q, t.p_x, field_outcome(t.p_a), cfg, rng);
  const double ratio = tr.sample_variance / s2;

  ScenarioField opt(t.space);
  for (std::size_t k = 0; k < opt.size(); ++k) opt[k] = t.p_a[k] * t.p_x[k];
  opt.normalize();
  const double s2_opt = theoretical_variance(opt, t.p_a, t.p_x);
  const bool ok = ratio > 1 / 1.5 && ratio < 1.5 && std::abs(s2_opt) <= 1e-12;
  return {ok, "empirical/theory=" + fmt("%.3f", ratio) + " optimal=" + fmt("%.1e", s2_opt)};
}

// ------------------------------------------------------ default-config runs

struct Setup {
  RunConfig cfg;
  ScenarioField p_x, p_s, p_a;
  Library offline;
  Setup() {
    sync_derived(cfg);
    validate(cfg);
    p_x = build_exposure(cfg).p_x;
    const ScenarioSpace& space = p_x.space();
    p_s = outcome_field(FvdmPolicy(cfg.fvdm), space, cfg.episode);
    p_a = outcome_field(AccAebPolicy(cfg.accaeb), space, cfg.episode);
    offline = build_library(criticality(p_s, p_x), cfg.epsilon);
  }
};

Outcome fixed_point(const Setup& s) {
  const FvdmPolicy same(s.cfg.fvdm);
  const AdaptiveResult r = run_adaptive({s.offline, s.p_s, s.p_x, same, s.cfg.episode},
                                        s.cfg.adaptive);
  const bool all_zero = std::all_of(r.state.observations.begin(), r.state.observations.end(),
                                    [](const Observation& o) { return o.f == 0.0; });
  const double tv = total_variation(r.customized.q, s.offline.q);
  return {all_zero && tv <= 1e-9, std::to_string(r.state.observations.size()) +
                                      " observations" + (all_zero ? " all zero" : " nonzero") +
                                      " tv=" + fmt("%.1e", tv)};
}

double mean_first(const std::vector<double>& v, std::size_t n) {
  n = std::min(n, v.size());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / double(n);
}

struct Shared {
  std::size_t before = 0, after = 0;
  CompareReport report;
};

Shared shared_run(const Setup& s) {
  const AccAebPolicy cav(s.cfg.accaeb);
  const AdaptiveResult r = run_adaptive({s.offline, s.p_s, s.p_x, cav, s.cfg.episode},
                                        s.cfg.adaptive);
  Shared out;
  out.before = count_mismatch(s.p_s, s.p_a);
  out.after = count_mismatch(r.snapshots.back().sm_updated, s.p_a);
  CompareConfig cc = s.cfg.compare;
  cc.n_reps = 100;
  cc.targets = {0.3, 0.2, 0.1};
  out.report = compare_methods({s.p_x, s.p_a, s.offline, r.customized}, cc);
  return out;
}

Outcome dissimilarity_learning(const Shared& sh) {
  const bool ok = 2 * sh.after <= sh.before;
  return {ok, "mismatched cells " + std::to_string(sh.before) + " -> " + std::to_string(sh.after)};
}

Outcome acceleration(const Shared& sh) {
  const TargetResult& t = sh.report.targets[1];
  const double c = t.crude.mean;
  const double o = mean_first(t.offline.required, 20);
  const double a = mean_first(t.adaptive.required, 20);
  const bool ok = c > o && o > a && c / o >= 10 && o / a >= 3;
  return {ok, "crude " + fmt("%.0f", c) + " offline " + fmt("%.0f", o) + " adaptive " +
                  fmt("%.0f", a) + " (x" + fmt("%.1f", c / o) + ", x" + fmt("%.2f", o / a) + ")"};
}

Outcome stability(const Shared& sh) {
  const TargetResult& t = sh.report.targets[1];
  const double cv = t.adaptive.std / t.adaptive.mean;
  const bool ok = cv < 0.5 && t.adaptive.max < t.offline.mean;
  return {ok, "adaptive mean " + fmt("%.1f", t.adaptive.mean) + " std " +
                  fmt("%.1f", t.adaptive.std) + " max " + fmt("%.0f", t.adaptive.max) +
                  " vs offline mean " + fmt("%.0f", t.offline.mean)};
}

Outcome precision_scaling(const Shared& sh) {
  std::vector<double> r;
  for (const TargetResult& t : sh.report.targets) {
    r.push_back(mean_first(t.offline.required, 20) / mean_first(t.adaptive.required, 20));
  }
  const bool ok = r[0] <= r[1] && r[1] <= r[2];
  return {ok, "offline/adaptive at 0.3, 0.2, 0.1: " + fmt("%.2f", r[0]) + ", " +
                  fmt("%.2f", r[1]) + ", " + fmt("%.2f", r[2])};
}

// ------------------------------------------------------------ criterion 9

Outcome gp_oracles() {
  const ScenarioSpace s;
  Rng rng(9);
  std::vector<std::string> bad;

  // Exact interpolation.
  Points x;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(s.scenario(rng.below(s.n_total())));
    y.push_back(std::sin(x.back().range / 7) + 0.3 * x.back().range_rate / 10);
  }
  GpOptions fixed;
  fixed.optimize = false;
  fixed.jitter = 1e-8;
  const GpPosterior interp = gpr_fit(s, x, y, fixed);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(interp.mean[s.locate(x[i]).flat] - y[i]));
  }
  if (worst >= 1e-4) bad.push_back("interpolation " + fmt("%.1e", worst));

  // Marginal-likelihood gradients against central differences.
  Eigen::VectorXd yr(15), yc(15);
  Points xg;
  for (int i = 0; i < 15; ++i) {
    xg.push_back(s.scenario(rng.below(s.n_total())));
    yr(i) = rng.uniform() < 0.4 ? -1.0 : 0.0;
    yc(i) = xg.back().range_rate < -4 ? 1.0 : -1.0;
  }
  const std::array<double, 3> th{std::log(1.3), std::log(12.0), std::log(2.5)};
  double rel = 0.0;
  for (int which = 0; which < 2; ++which) {
    auto f = [&](const std::array<double, 3>& t, std::array<double, 3>* g) {
      const ArdSeKernel k = ArdSeKernel::from_log(t);
      return which == 0 ? gpr_log_marginal(k, xg, yr, 1e-6, g)
                        : gpc_laplace(k, xg, yc, 1e-6, g).log_marginal;
    };
    std::array<double, 3> g{};
    (void)f(th, &g);
    for (int d = 0; d < 3; ++d) {
      auto tp = th, tm = th;
      tp[d] += 1e-5;
      tm[d] -= 1e-5;
      const double fd = (f(tp, nullptr) - f(tm, nullptr)) / 2e-5;
      rel = std::max(rel, std::abs(g[d] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  if (rel >= 1e-4) bad.push_back("gradient " + fmt("%.1e", rel));

  // Separable classification.
  Points xs;
  std::vector<double> lab;
  while (xs.size() < 30) {
    const Scenario c = s.scenario(rng.below(s.n_total()));
    const double margin = c.range / 10.0 + c.range_rate;
    if (std::abs(margin) < 1.5) continue;
    xs.push_back(c);
    lab.push_back(margin < 0 ? 1.0 : -1.0);
  }
  const GpcPosterior cls = gpc_fit(s, xs, lab, GpOptions{});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    correct += (cls.p_class1[s.locate(xs[i]).flat] > 0.5) == (lab[i] > 0);
  }
  if (correct != xs.size()) bad.push_back("gpc accuracy");

  // Gated fit on a cluster of f = -1: near -1 inside, near 0 beyond five
  // nominal length scales (10 m, 3 m/s).
  std::vector<Observation> obs;
  auto in_cluster = [](const Scenario& c) { return c.range <= 12 && c.range_rate <= -10; };
  for (std::size_t i = 0; i < s.n_r(); i += 3) {
    for (std::size_t j = 0; j < s.n_rdot(); j += 6) {
      const std::size_t k = s.index(i, j).flat;
      obs.push_back({k, in_cluster(s.scenario(k)) ? -1.0 : 0.0});
    }
  }
  const GatedPosterior gated = gated_fit(s, obs, GpOptions{});
  const auto& lam = GpOptions{}.init.lambda;
  double inside = 0.0, far = 0.0;
  std::size_t n_far = 0;
  for (std::size_t k = 0; k < s.n_total(); ++k) {
    const Scenario c = s.scenario(k);
    if (in_cluster(c)) inside = std::max(inside, std::abs(gated.mean[k]));
    const double dr = std::max(0.0, c.range - 12) / lam[0];
    const double dd = std::max(0.0, c.range_rate + 10) / lam[1];
    if (std::hypot(dr, dd) > 5.0) {
      far = std::max(far, std::abs(gated.mean[k]));
      ++n_far;
    }
  }
  if (!(inside > 0.8)) bad.push_back("gated inside " + fmt("%.2f", inside));
  if (n_far == 0 || !(far < 0.1)) bad.push_back("gated far " + fmt("%.3f", far));

  std::string detail = "interp " + fmt("%.1e", worst) + " grad rel " + fmt("%.1e", rel) +
                       " gpc " + std::to_string(correct) + "/" + std::to_string(xs.size()) +
                       " gated inside " + fmt("%.2f", inside) + " far " + fmt("%.3f", far);
  for (const auto& b : bad) detail += "; failed: " + b;
  return {bad.empty(), detail};
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s  %-24s %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", name,
              o.detail.c_str(), sec);
  std::fflush(stdout);
}

}  // namespace

int main() {
  report(1, "grid fidelity", grid_fidelity);
  report(2, "fvdm correctness", fvdm_correctness);
  report(3, "is unbiasedness", is_unbiased);
  report(4, "variance formula", variance_formula);

  const Setup setup;
  report(5, "zero-dissimilarity", [&] { return fixed_point(setup); });

  Shared sh;
  std::string shared_error;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    sh = shared_run(setup);
  } catch (const std::exception& e) {
    shared_error = e.what();
  }
  std::printf("# shared adaptive run and 100-replication comparison: %.1fs\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  auto guarded = [&](Outcome (*fn)(const Shared&)) {
    return [&, fn]() -> Outcome {
      if (!shared_error.empty()) return {false, "shared run failed: " + shared_error};
      return fn(sh);
    };
  };
  report(6, "dissimilarity learning", guarded(dissimilarity_learning));
  report(7, "acceleration ordering", guarded(acceleration));
  report(8, "replication stability", guarded(stability));
  report(9, "gp engine oracles", gp_oracles);
  report(10, "precision scaling", guarded(precision_scaling));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
