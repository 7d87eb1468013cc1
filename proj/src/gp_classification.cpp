#include <cmath>
#include <numbers>

#include "atslg/error.hpp"
#include "atslg/gp_engine.hpp"

namespace atslg {
namespace {

constexpr int kMaxNewton = 100;

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// Fallback class probability when only one label has been observed.
double degenerate_p1(double label) noexcept { return 0.5 * (1.0 + label * std::tanh(1.0)); }

struct ModeState {
  Eigen::VectorXd f, a, pi, grad, sqrt_w;
  Eigen::LLT<Eigen::MatrixXd> b_llt;
  double psi = 0.0;
};

// `f` is the centred latent; the likelihood sees f + m.
double log_lik(const Eigen::VectorXd& y, const Eigen::VectorXd& f, double m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s += log_sigmoid(y(i) * (f(i) + m));
  return s;
}

// Likelihood derivatives and the factor of B = I + W^1/2 K W^1/2 at f.
void refresh(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double m, ModeState& st) {
  const auto n = st.f.size();
  st.pi.resize(n);
  st.grad.resize(n);
  st.sqrt_w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    st.pi(i) = sigmoid(st.f(i) + m);
    st.grad(i) = 0.5 * (y(i) + 1.0) - st.pi(i);
    st.sqrt_w(i) = std::sqrt(st.pi(i) * (1.0 - st.pi(i)));
  }
  Eigen::MatrixXd b = st.sqrt_w.asDiagonal() * k * st.sqrt_w.asDiagonal();
  b.diagonal().array() += 1.0;
  st.b_llt.compute(b);
  if (st.b_llt.info() != Eigen::Success) throw NumericalError("gpc: factorization of B failed");
}

}  // namespace

double class_prior_logit(const Eigen::VectorXd& y) noexcept {
  const double n1 = static_cast<double>((y.array() > 0.0).count());
  const double p = (n1 + 1.0) / (static_cast<double>(y.size()) + 2.0);
  return std::log(p / (1.0 - p));
}

LaplaceResult gpc_laplace(const ArdSeKernel& kern, const Points& x, const Eigen::VectorXd& y,
                          double jitter, std::array<double, 3>* grad,
                          const Eigen::VectorXd* warm, double prior_mean) {
  const double m = prior_mean;
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n == 0) throw InputError("gpc: at least one observation is required");
  const Eigen::MatrixXd g = gram(kern, x);
  Eigen::MatrixXd k = g;
  k.diagonal().array() += jitter;

  ModeState st;
  st.f = Eigen::VectorXd::Zero(n);
  st.a = Eigen::VectorXd::Zero(n);
  if (warm != nullptr && warm->size() == n) {
    // Recover a consistent `a` so the objective is comparable; a cold start
    // is used when K is too ill-conditioned for that.
    const Eigen::LLT<Eigen::MatrixXd> kf(k);
    if (kf.info() == Eigen::Success) {
      st.f = *warm;
      st.a = kf.solve(st.f);
    }
  }
  st.psi = -0.5 * st.a.dot(st.f) + log_lik(y, st.f, m);

  bool converged = false;
  int it = 0;
  for (; it < kMaxNewton; ++it) {
    refresh(k, y, m, st);
    const Eigen::VectorXd b = st.sqrt_w.cwiseProduct(st.sqrt_w).cwiseProduct(st.f) + st.grad;
    const Eigen::VectorXd c = st.b_llt.solve(st.sqrt_w.cwiseProduct(k * b));
    Eigen::VectorXd a_new = b - st.sqrt_w.cwiseProduct(c);
    Eigen::VectorXd f_new = k * a_new;
    double psi_new = -0.5 * a_new.dot(f_new) + log_lik(y, f_new, m);
    // Damped step when the full Newton step overshoots.
    for (int h = 0; h < 30 && psi_new < st.psi; ++h) {
      a_new = 0.5 * (a_new + st.a);
      f_new = k * a_new;
      psi_new = -0.5 * a_new.dot(f_new) + log_lik(y, f_new, m);
    }
    const double change = psi_new - st.psi;
    st.a = a_new;
    st.f = f_new;
    st.psi = psi_new;
    if (std::abs(change) < 1e-10 * (1.0 + std::abs(psi_new))) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericalError("gpc: Newton iteration did not converge in " +
                         std::to_string(kMaxNewton) + " steps");
  }
  refresh(k, y, m, st);

  LaplaceResult res;
  res.f_hat = st.f;
  res.iterations = it + 1;
  const Eigen::MatrixXd& l = st.b_llt.matrixLLT();
  res.log_marginal = -0.5 * st.grad.dot(st.f) + log_lik(y, st.f, m) -
                     l.diagonal().array().log().sum();

  if (grad != nullptr) {
    // Explicit term plus the implicit term through the mode.
    const Eigen::MatrixXd sw = st.sqrt_w.asDiagonal();
    const Eigen::MatrixXd z = sw * st.b_llt.solve(sw);
    const Eigen::MatrixXd c = st.b_llt.matrixL().solve(sw * k);
    // dW_ii/df_i; the mode moves the evidence through -1/2 log|B| only via W.
    Eigen::VectorXd dw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      dw(i) = st.pi(i) * (1.0 - st.pi(i)) * (1.0 - 2.0 * st.pi(i));
    }
    const Eigen::VectorXd s2 =
        -0.5 * (k.diagonal() - c.cwiseProduct(c).colwise().sum().transpose()).cwiseProduct(dw);
    const auto dk = gram_log_gradients(kern, x, g);
    for (int j = 0; j < 3; ++j) {
      const double s1 =
          0.5 * st.grad.dot(dk[j] * st.grad) - 0.5 * z.cwiseProduct(dk[j]).sum();
      const Eigen::VectorXd bj = dk[j] * st.grad;
      const Eigen::VectorXd s3 = bj - k * (z * bj);
      (*grad)[j] = s1 + s2.dot(s3);
    }
  }
  return res;
}

std::pair<double, double> GpcModel::predict(const Scenario& s) const {
  if (degenerate) return {degenerate_p1(y(0)), 0.0};
  Eigen::VectorXd ks(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) ks(static_cast<Eigen::Index>(i)) = kernel(x[i], s);
  const double mean = prior_mean + ks.dot(grad_lik);
  const Eigen::VectorXd v = b_factor.matrixL().solve(sqrt_w.cwiseProduct(ks));
  const double var = std::max(0.0, kernel.variance() - v.squaredNorm());
  const double kappa = 1.0 / std::sqrt(1.0 + std::numbers::pi * var / 8.0);
  return {sigmoid(kappa * mean), var};
}

GpcModel gpc_train(const ScenarioSpace& space, const Points& x, const Eigen::VectorXd& y,
                   const GpOptions& opt) {
  if (x.empty()) throw InputError("gpc: at least one observation is required");
  if (static_cast<Eigen::Index>(x.size()) != y.size()) {
    throw ShapeError("gpc: inputs and labels differ in length");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 1.0 && y(i) != -1.0) throw InputError("gpc: labels must be +1 or -1");
  }
  GpcModel m;
  m.x = x;
  m.y = y;
  m.kernel = opt.init;
  if ((y.array() == y(0)).all()) {
    m.degenerate = true;
    return m;
  }
  m.prior_mean = class_prior_logit(y);

  if (opt.optimize) {
    Eigen::VectorXd warm;
    const LogObjective fn = [&](const std::array<double, 3>& theta, std::array<double, 3>& g) {
      const LaplaceResult r = gpc_laplace(ArdSeKernel::from_log(theta), x, y, opt.jitter, &g,
                                          warm.size() > 0 ? &warm : nullptr, m.prior_mean);
      warm = r.f_hat;
      return r.log_marginal;
    };
    m.kernel = ArdSeKernel::from_log(maximize_log_objective(
        fn, default_bounds(space, opt.gpc_sigma_lo, opt.gpc_sigma_hi), opt));
  }

  const LaplaceResult r = gpc_laplace(m.kernel, x, y, opt.jitter, nullptr, nullptr, m.prior_mean);
  m.f_hat = r.f_hat;
  m.log_marginal = r.log_marginal;
  Eigen::MatrixXd k = gram(m.kernel, x);
  k.diagonal().array() += opt.jitter;
  ModeState st;
  st.f = r.f_hat;
  refresh(k, y, m.prior_mean, st);
  m.grad_lik = st.grad;
  m.sqrt_w = st.sqrt_w;
  m.b_factor = st.b_llt;
  return m;
}

namespace {

GpcPosterior empty_posterior(const GpcModel& model, const ScenarioSpace& space) {
  GpcPosterior post;
  post.p_class1 = ScenarioField(space);
  post.latent_var = ScenarioField(space);
  post.kernel = model.kernel;
  post.degenerate = model.degenerate;
  post.n_train = model.x.size();
  post.log_marginal = model.log_marginal;
  return post;
}

}  // namespace

GpcPosterior gpc_predict_grid(const GpcModel& model, const ScenarioSpace& space) {
  GpcPosterior post = empty_posterior(model, space);
  const auto n = static_cast<long>(space.n_total());
#pragma omp parallel for schedule(static)
  for (long c = 0; c < n; ++c) {
    const auto flat = static_cast<std::size_t>(c);
    const auto [p, v] = model.predict(space.scenario(flat));
    post.p_class1[flat] = p;
    post.latent_var[flat] = v;
  }
  return post;
}

GpcPosterior gpc_predict_grid_serial(const GpcModel& model, const ScenarioSpace& space) {
  GpcPosterior post = empty_posterior(model, space);
  for (std::size_t flat = 0; flat < space.n_total(); ++flat) {
    const auto [p, v] = model.predict(space.scenario(flat));
    post.p_class1[flat] = p;
    post.latent_var[flat] = v;
  }
  return post;
}

GpcPosterior gpc_fit(const ScenarioSpace& space, const Points& x, const std::vector<double>& labels,
                     const GpOptions& opt) {
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return gpc_predict_grid(gpc_train(space, x, y, opt), space);
}

}  // namespace atslg
