#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "atslg/error.hpp"
#include "atslg/gp_engine.hpp"
#include "atslg/rng.hpp"

namespace atslg {

double ArdSeKernel::operator()(const Scenario& a, const Scenario& b) const noexcept {
  const double d0 = (a.range - b.range) / lambda[0];
  const double d1 = (a.range_rate - b.range_rate) / lambda[1];
  return sigma_f * sigma_f * std::exp(-0.5 * (d0 * d0 + d1 * d1));
}

std::array<double, 3> ArdSeKernel::log_params() const noexcept {
  return {std::log(sigma_f), std::log(lambda[0]), std::log(lambda[1])};
}

ArdSeKernel ArdSeKernel::from_log(const std::array<double, 3>& theta) noexcept {
  return ArdSeKernel{std::exp(theta[0]), {std::exp(theta[1]), std::exp(theta[2])}};
}

Eigen::MatrixXd gram(const ArdSeKernel& k, const Points& x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = k.variance();
    for (Eigen::Index j = 0; j < i; ++j) {
      g(i, j) = g(j, i) = k(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)]);
    }
  }
  return g;
}

std::array<Eigen::MatrixXd, 3> gram_log_gradients(const ArdSeKernel& k, const Points& x,
                                                  const Eigen::MatrixXd& g) {
  const auto n = static_cast<Eigen::Index>(x.size());
  std::array<Eigen::MatrixXd, 3> d{2.0 * g, Eigen::MatrixXd::Zero(n, n),
                                   Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scenario& a = x[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < i; ++j) {
      const Scenario& b = x[static_cast<std::size_t>(j)];
      const double r0 = (a.range - b.range) / k.lambda[0];
      const double r1 = (a.range_rate - b.range_rate) / k.lambda[1];
      d[1](i, j) = d[1](j, i) = g(i, j) * r0 * r0;
      d[2](i, j) = d[2](j, i) = g(i, j) * r1 * r1;
    }
  }
  return d;
}

Factorization robust_cholesky(const Eigen::MatrixXd& k, double jitter) {
  const auto n = k.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  double j = jitter;
  for (int attempt = 0; attempt < 7; ++attempt, j *= 10.0) {
    Factorization f{Eigen::LLT<Eigen::MatrixXd>(k + j * eye), j};
    if (f.llt.info() == Eigen::Success) return f;
  }
  std::ostringstream msg;
  msg << "cholesky failed after jitter escalation to " << j / 10.0 << " (n=" << n
      << ", diag min " << k.diagonal().minCoeff() << ", diag max " << k.diagonal().maxCoeff()
      << ")";
  throw NumericalError(msg.str());
}

HyperBounds default_bounds(const ScenarioSpace& space, double sigma_lo, double sigma_hi) {
  const GridConfig& c = space.config();
  const double range_r = c.r_max - c.r_min;
  const double range_rd = c.rdot_max - c.rdot_min;
  HyperBounds b;
  b.lo = {sigma_lo, 0.5 * c.r_step, 0.5 * c.rdot_step};
  b.hi = {sigma_hi, std::max(10.0 * range_r, 10.0 * c.r_step),
          std::max(10.0 * range_rd, 10.0 * c.rdot_step)};
  return b;
}

namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Evaluated {
  bool ok = false;
  double value = -std::numeric_limits<double>::infinity();
  Vec3 grad{};
};

Evaluated evaluate(const LogObjective& fn, const Vec3& x) {
  Evaluated e;
  try {
    e.value = fn(x, e.grad);
    e.ok = std::isfinite(e.value) && std::isfinite(e.grad[0]) && std::isfinite(e.grad[1]) &&
           std::isfinite(e.grad[2]);
  } catch (const NumericalError&) {
    e.ok = false;
  }
  return e;
}

// Gradient with components pointing out of the box at active bounds removed.
Vec3 projected_gradient(const Vec3& x, const Vec3& g, const Vec3& lo, const Vec3& hi) {
  Vec3 p = g;
  for (int i = 0; i < 3; ++i) {
    if ((x[i] <= lo[i] && g[i] < 0.0) || (x[i] >= hi[i] && g[i] > 0.0)) p[i] = 0.0;
  }
  return p;
}

Evaluated ascend(const LogObjective& fn, Vec3 x, const Vec3& lo, const Vec3& hi, int max_iter,
                 Vec3& x_out) {
  for (int i = 0; i < 3; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  Evaluated cur = evaluate(fn, x);
  if (!cur.ok) return cur;

  // Inverse Hessian approximation of the negated objective.
  std::array<Vec3, 3> h{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  constexpr double kMaxStep = 2.0;  // in log units
  for (int it = 0; it < max_iter; ++it) {
    const Vec3 pg = projected_gradient(x, cur.grad, lo, hi);
    if (std::sqrt(dot(pg, pg)) < 1e-6) break;

    Vec3 d{};
    for (int i = 0; i < 3; ++i) d[i] = dot(h[i], pg);
    for (int i = 0; i < 3; ++i) {
      if (pg[i] == 0.0) d[i] = 0.0;
    }
    if (dot(d, pg) <= 0.0) {
      h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
      d = pg;
    }
    const double dmax = std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
    if (dmax > kMaxStep) {
      for (double& di : d) di *= kMaxStep / dmax;
    }

    double step = 1.0;
    Vec3 xn{};
    Evaluated next;
    bool accepted = false;
    while (step > 1e-10) {
      for (int i = 0; i < 3; ++i) xn[i] = std::clamp(x[i] + step * d[i], lo[i], hi[i]);
      next = evaluate(fn, xn);
      Vec3 s{xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]};
      if (next.ok && next.value >= cur.value + 1e-4 * dot(cur.grad, s)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Vec3 s{xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]};
    const Vec3 yv{cur.grad[0] - next.grad[0], cur.grad[1] - next.grad[1],
                  cur.grad[2] - next.grad[2]};
    const double sy = dot(s, yv);
    const double change = next.value - cur.value;
    x = xn;
    cur = next;
    if (sy > 1e-12) {
      // BFGS update of the inverse Hessian of -objective.
      Vec3 hy{};
      for (int i = 0; i < 3; ++i) hy[i] = dot(h[i], yv);
      const double yhy = dot(yv, hy);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
      }
    }
    if (std::abs(change) < 1e-9 * (1.0 + std::abs(cur.value))) break;
  }
  x_out = x;
  return cur;
}

}  // namespace

std::array<double, 3> maximize_log_objective(const LogObjective& fn, const HyperBounds& bounds,
                                             const GpOptions& opt) {
  Vec3 lo{}, hi{};
  for (int i = 0; i < 3; ++i) {
    lo[i] = std::log(bounds.lo[i]);
    hi[i] = std::log(bounds.hi[i]);
  }
  Rng rng = Rng::stream(opt.seed, "gp.restarts");
  Vec3 best_x = opt.init.log_params();
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  const int starts = std::max(1, opt.restarts);
  for (int r = 0; r < starts; ++r) {
    Vec3 x0 = opt.init.log_params();
    if (r > 0) {
      for (int i = 0; i < 3; ++i) x0[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
    }
    Vec3 x{};
    const Evaluated e = ascend(fn, x0, lo, hi, opt.max_iter, x);
    if (e.ok && e.value > best) {
      best = e.value;
      best_x = x;
      any = true;
    }
  }
  if (!any) throw NumericalError("hyperparameter fit: objective failed at every start");
  return best_x;
}

}  // namespace atslg
