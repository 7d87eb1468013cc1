#include <cmath>
#include <numbers>

#include "atslg/error.hpp"
#include "atslg/gp_engine.hpp"

namespace atslg {
namespace {

Eigen::VectorXd cross_vector(const ArdSeKernel& k, const Points& x, const Scenario& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = k(x[i], s);
  return v;
}

GpPosterior empty_posterior(const GprModel& model, const ScenarioSpace& space) {
  GpPosterior post;
  post.mean = ScenarioField(space);
  post.var = ScenarioField(space);
  post.kernel = model.kernel;
  post.n_train = model.x.size();
  post.log_marginal = model.log_marginal;
  return post;
}

}  // namespace

std::pair<double, double> GprModel::predict(const Scenario& s) const {
  const Eigen::VectorXd ks = cross_vector(kernel, x, s);
  const double mean = ks.dot(alpha);
  const Eigen::VectorXd v = factor.llt.matrixL().solve(ks);
  return {mean, std::max(0.0, kernel.variance() - v.squaredNorm())};
}

double gpr_log_marginal(const ArdSeKernel& k, const Points& x, const Eigen::VectorXd& y,
                        double jitter, std::array<double, 3>* grad) {
  const Eigen::MatrixXd g = gram(k, x);
  const Factorization f = robust_cholesky(g, jitter);
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const Eigen::MatrixXd& l = f.llt.matrixLLT();
  const auto n = static_cast<double>(x.size());
  const double lml = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum() -
                     0.5 * n * std::log(2.0 * std::numbers::pi);
  if (grad != nullptr) {
    const auto dk = gram_log_gradients(k, x, g);
    const auto m = static_cast<Eigen::Index>(x.size());
    const Eigen::MatrixXd inner =
        alpha * alpha.transpose() - f.llt.solve(Eigen::MatrixXd::Identity(m, m));
    for (int j = 0; j < 3; ++j) (*grad)[j] = 0.5 * inner.cwiseProduct(dk[j]).sum();
  }
  return lml;
}

GprModel gpr_condition(const ArdSeKernel& k, const Points& x, const Eigen::VectorXd& y,
                       double jitter) {
  if (x.empty()) throw InputError("gpr: at least one observation is required");
  if (static_cast<Eigen::Index>(x.size()) != y.size()) {
    throw ShapeError("gpr: inputs and targets differ in length");
  }
  GprModel m;
  m.kernel = k;
  m.x = x;
  m.factor = robust_cholesky(gram(k, x), jitter);
  m.alpha = m.factor.llt.solve(y);
  const Eigen::MatrixXd& l = m.factor.llt.matrixLLT();
  m.log_marginal = -0.5 * y.dot(m.alpha) - l.diagonal().array().log().sum() -
                   0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
  return m;
}

GprModel gpr_train(const ScenarioSpace& space, const Points& x, const Eigen::VectorXd& y,
                   const GpOptions& opt) {
  if (x.empty()) throw InputError("gpr: at least one observation is required");
  ArdSeKernel k = opt.init;
  // Zero targets carry no information about scale; the prior kernel is kept.
  if (opt.optimize && y.cwiseAbs().maxCoeff() > 0.0) {
    const LogObjective fn = [&](const std::array<double, 3>& theta, std::array<double, 3>& g) {
      return gpr_log_marginal(ArdSeKernel::from_log(theta), x, y, opt.jitter, &g);
    };
    k = ArdSeKernel::from_log(maximize_log_objective(
        fn, default_bounds(space, opt.gpr_sigma_lo, opt.gpr_sigma_hi), opt));
  }
  return gpr_condition(k, x, y, opt.jitter);
}

GpPosterior gpr_predict_grid(const GprModel& model, const ScenarioSpace& space) {
  GpPosterior post = empty_posterior(model, space);
  const auto n = static_cast<long>(space.n_total());
#pragma omp parallel for schedule(static)
  for (long c = 0; c < n; ++c) {
    const auto flat = static_cast<std::size_t>(c);
    const auto [m, v] = model.predict(space.scenario(flat));
    post.mean[flat] = m;
    post.var[flat] = v;
  }
  return post;
}

GpPosterior gpr_predict_grid_serial(const GprModel& model, const ScenarioSpace& space) {
  GpPosterior post = empty_posterior(model, space);
  for (std::size_t flat = 0; flat < space.n_total(); ++flat) {
    const auto [m, v] = model.predict(space.scenario(flat));
    post.mean[flat] = m;
    post.var[flat] = v;
  }
  return post;
}

GpPosterior gpr_prior(const ScenarioSpace& space, const ArdSeKernel& k) {
  GpPosterior post;
  post.mean = ScenarioField(space, 0.0);
  post.var = ScenarioField(space, k.variance());
  post.kernel = k;
  return post;
}

GpPosterior gpr_fit(const ScenarioSpace& space, const Points& x, const std::vector<double>& y,
                    const GpOptions& opt) {
  const Eigen::VectorXd t =
      Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return gpr_predict_grid(gpr_train(space, x, t, opt), space);
}

}  // namespace atslg
