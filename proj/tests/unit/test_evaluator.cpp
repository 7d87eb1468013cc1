#include <gtest/gtest.h>

#include <cmath>

#include "atslg/error.hpp"
#include "atslg/evaluator.hpp"
#include "atslg/offline_library.hpp"

using namespace atslg;

namespace {

// 10 x 10 toy grid with a known accident set and a skewed exposure.
struct Toy {
  ScenarioSpace space{GridConfig{0, 20, 2, 0, 3.6, 0.4}};
  ScenarioField p_x{space};
  ScenarioField p_a{space};
  Toy() {
    for (std::size_t k = 0; k < space.n_total(); ++k) {
      p_x[k] = 1.0 + static_cast<double>((k * 37) % 11);
      const ScenarioIndex i = space.index(k);
      p_a[k] = (i.i_r < 3 && i.i_rdot < 4) || k == 77 ? 1.0 : 0.0;
    }
    p_x.normalize();
  }
};

EvalConfig fixed_n(std::size_t n) {
  EvalConfig c;
  c.max_tests = n;
  c.target_half_width = 1e-9;  // never reached: run exactly n tests
  return c;
}

}  // namespace

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.999), 3.090232306167813, 1e-11);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-9);
}

TEST(MinTests, ExampleAndMonotone) {
  EXPECT_EQ(min_tests(0.0, 0.01, 0.05, 0.2), 0u);
  EXPECT_EQ(min_tests(1e-4, 0.01, 0.05, 0.2), 97u);
  std::size_t prev = 0;
  for (double s2 = 1e-6; s2 < 1e-2; s2 *= 1.7) {
    const std::size_t n = min_tests(s2, 0.01, 0.05, 0.2);
    ASSERT_GE(n, prev);
    prev = n;
  }
  EXPECT_THROW((void)min_tests(1e-4, 0.0, 0.05, 0.2), NumericalError);
}

TEST(RunningStats, MatchesTwoPass) {
  RunningStats s;
  const std::vector<double> xs{1e9 + 4, 1e9 + 7, 1e9 + 13, 1e9 + 16};
  for (double x : xs) s.add(x);
  EXPECT_DOUBLE_EQ(s.mean(), 1e9 + 10);
  EXPECT_DOUBLE_EQ(s.variance(), 30.0);
  RunningStats one;
  one.add(3.0);
  EXPECT_EQ(one.variance(), 0.0);
}

TEST(Crude, NeverAndAlwaysCrash) {
  const Toy t;
  EvalConfig cfg;
  cfg.max_tests = 500;
  Rng rng(1);
  const EvalTrace never = evaluate_crude(t.p_x, [](std::size_t) { return false; }, cfg, rng);
  EXPECT_EQ(never.mu_hat, 0.0);
  EXPECT_FALSE(never.converged);
  EXPECT_FALSE(never.diagnostic.empty());

  const EvalTrace always = evaluate_crude(t.p_x, [](std::size_t) { return true; }, cfg, rng);
  EXPECT_EQ(always.mu_hat, 1.0);
  EXPECT_EQ(always.sample_variance, 0.0);
  EXPECT_TRUE(always.converged);
  EXPECT_EQ(always.n_used, cfg.warmup);
}

TEST(Crude, WithinThreeSigmaOnToyGrid) {
  const Toy t;
  const double mu = true_rate(t.p_a, t.p_x);
  Rng rng(2);
  const std::size_t n = 20000;
  const EvalTrace tr = evaluate_crude(t.p_x, field_outcome(t.p_a), fixed_n(n), rng);
  EXPECT_NEAR(tr.mu_hat, mu, 3 * std::sqrt(mu * (1 - mu) / n));
}

TEST(Is, IdentityImportanceEqualsCrude) {
  const Toy t;
  Rng a(3), b(3);
  const EvalTrace c = evaluate_crude(t.p_x, field_outcome(t.p_a), fixed_n(300), a);
  const EvalTrace i = evaluate_is(t.p_x, t.p_x, field_outcome(t.p_a), fixed_n(300), b);
  ASSERT_EQ(c.records.size(), i.records.size());
  for (std::size_t k = 0; k < c.records.size(); ++k) {
    ASSERT_EQ(c.records[k].flat, i.records[k].flat);
    ASSERT_EQ(c.records[k].mean, i.records[k].mean);
  }
}

TEST(Is, OptimalImportanceCutsVariance) {
  const Toy t;
  ScenarioField num(t.space);
  for (std::size_t k = 0; k < num.size(); ++k) num[k] = t.p_a[k] * t.p_x[k];
  // Mix in a little uniform mass so the support condition holds.
  ScenarioField q(t.space);
  const double mu = num.sum();
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = 0.99 * num[k] / mu + 0.01 / q.size();
  Rng a(4), b(5);
  const EvalTrace crude = evaluate_crude(t.p_x, field_outcome(t.p_a), fixed_n(2000), a);
  const EvalTrace is = evaluate_is(q, t.p_x, field_outcome(t.p_a), fixed_n(2000), b);
  EXPECT_LT(10 * is.sample_variance, crude.sample_variance);
}

TEST(Is, SupportViolationThrowsBeforeSampling) {
  const Toy t;
  ScenarioField q = t.p_x;
  q[5] = 0.0;
  Rng rng(6);
  const std::uint64_t before = Rng(6).engine()();
  EXPECT_THROW((void)evaluate_is(q, t.p_x, field_outcome(t.p_a), fixed_n(10), rng), SupportError);
  EXPECT_EQ(rng.engine()(), before);
}

TEST(TheoreticalVariance, ZeroAtOptimumAndHandValue) {
  const Toy t;
  ScenarioField q(t.space);
  const double mu = true_rate(t.p_a, t.p_x);
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = t.p_a[k] * t.p_x[k] / mu;
  EXPECT_NEAR(theoretical_variance(q, t.p_a, t.p_x), 0.0, 1e-12);

  const ScenarioField uni(t.space, 1.0 / 100);
  double s = 0.0;
  for (std::size_t k = 0; k < 100; ++k) s += std::pow(t.p_a[k] * t.p_x[k], 2) * 100;
  EXPECT_NEAR(theoretical_variance(uni, t.p_a, t.p_x), s - mu * mu, 1e-15);
  EXPECT_GE(theoretical_variance(uni, t.p_a, t.p_x), -1e-12);
}

TEST(TheoreticalVariance, MatchesWeightVariance) {
  const Toy t;
  ScenarioField v(t.space);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (k % 3 == 0 ? 1.0 : 0.0) * t.p_x[k];
  const Library lib = build_library(v, 0.1);
  const double s2 = theoretical_variance(lib.q, t.p_a, t.p_x);
  RunningStats across;
  for (int r = 0; r < 400; ++r) {
    Rng rng = Rng::stream(10, "rep" + std::to_string(r));
    across.add(evaluate_is(lib.q, t.p_x, field_outcome(t.p_a), fixed_n(500), rng).mu_hat);
  }
  const double ratio = across.variance() / (s2 / 500);
  EXPECT_GT(ratio, 1 / 1.5);
  EXPECT_LT(ratio, 1.5);
}

TEST(Compare, ParallelEqualsSerialAndChargesAdaptivePhase) {
  const Toy t;
  ScenarioField v(t.space);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = t.p_x[k] * (k % 2 ? 1.0 : 0.0);
  const Library off = build_library(v, 0.1);
  ScenarioField va(t.space);
  for (std::size_t k = 0; k < v.size(); ++k) va[k] = t.p_a[k] * t.p_x[k];
  const Library cust = build_library(va, 0.1);
  CompareConfig cfg;
  cfg.n_reps = 6;
  cfg.eval.seed = 3;
  const CompareReport a = compare_methods({t.p_x, t.p_a, off, cust}, cfg);
  const CompareReport b = compare_methods_serial({t.p_x, t.p_a, off, cust}, cfg);
  ASSERT_EQ(a.targets.size(), 3u);
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    EXPECT_EQ(a.targets[i].offline.required, b.targets[i].offline.required);
    EXPECT_EQ(a.targets[i].adaptive.required, b.targets[i].adaptive.required);
    for (double n : a.targets[i].adaptive.required) EXPECT_GE(n, 100.0);
    EXPECT_TRUE(a.targets[i].crude.analytic);
  }
  EXPECT_EQ(a.mu_offline, b.mu_offline);
}

TEST(EvalConfigValidation, RejectsBadValues) {
  EvalConfig c;
  c.alpha = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = EvalConfig{};
  c.target_half_width = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = EvalConfig{};
  c.max_tests = 0;
  EXPECT_THROW(validate(c), ConfigError);
}
