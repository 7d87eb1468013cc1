#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "atslg/scenario_space.hpp"

namespace atslg {

using Points = std::vector<Scenario>;

/// ARD squared-exponential kernel over (R, Rdot).
struct ArdSeKernel {
  double sigma_f = 1.0;
  std::array<double, 2> lambda{10.0, 3.0};

  [[nodiscard]] double operator()(const Scenario& a, const Scenario& b) const noexcept;
  [[nodiscard]] double variance() const noexcept { return sigma_f * sigma_f; }

  /// Hyperparameters in log space: (log sigma_f, log lambda_R, log lambda_Rdot).
  [[nodiscard]] std::array<double, 3> log_params() const noexcept;
  static ArdSeKernel from_log(const std::array<double, 3>& theta) noexcept;
};

Eigen::MatrixXd gram(const ArdSeKernel& k, const Points& x);
/// Derivatives of the gram matrix with respect to the log hyperparameters.
std::array<Eigen::MatrixXd, 3> gram_log_gradients(const ArdSeKernel& k, const Points& x,
                                                  const Eigen::MatrixXd& gram_matrix);

/// Cholesky of K + jitter I, multiplying the jitter by 10 up to six times on
/// failure. Throws NumericalError with diagonal diagnostics.
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};
Factorization robust_cholesky(const Eigen::MatrixXd& k, double jitter);

/// Box in natural units for (sigma_f, lambda_R, lambda_Rdot).
struct HyperBounds {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};
/// Length scales in [0.5 step, max(10 range, 10 step)] per dimension.
HyperBounds default_bounds(const ScenarioSpace& space, double sigma_lo, double sigma_hi);

struct GpOptions {
  double jitter = 1e-6;
  int restarts = 5;          // total starts, the first one at `init`
  int max_iter = 60;
  bool optimize = true;
  std::uint64_t seed = 0;    // restart stream
  ArdSeKernel init{};
  double gpr_sigma_lo = 0.05;
  double gpr_sigma_hi = 20.0;
  double gpc_sigma_lo = 0.1;
  double gpc_sigma_hi = 10.0;
};

/// Objective value and gradient in log space. Throwing marks the point infeasible.
using LogObjective = std::function<double(const std::array<double, 3>&, std::array<double, 3>&)>;

/// Projected quasi-Newton ascent with Armijo backtracking from several starts.
/// Returns the best log-space point found. Throws NumericalError when the
/// objective fails at every start.
std::array<double, 3> maximize_log_objective(const LogObjective& fn, const HyperBounds& bounds,
                                             const GpOptions& opt);

// ---------------------------------------------------------------- regression

/// Conditioned GP regressor with zero prior mean.
struct GprModel {
  ArdSeKernel kernel;
  Points x;
  Eigen::VectorXd alpha;
  Factorization factor;
  double log_marginal = 0.0;

  /// Predictive (mean, variance); variance clipped at 0.
  [[nodiscard]] std::pair<double, double> predict(const Scenario& s) const;
};

/// Log marginal likelihood of y under the kernel; fills the log-space gradient.
double gpr_log_marginal(const ArdSeKernel& k, const Points& x, const Eigen::VectorXd& y,
                        double jitter, std::array<double, 3>* grad = nullptr);

GprModel gpr_condition(const ArdSeKernel& k, const Points& x, const Eigen::VectorXd& y,
                       double jitter);
/// Fits hyperparameters (when opt.optimize) and conditions. Needs >= 1 point.
GprModel gpr_train(const ScenarioSpace& space, const Points& x, const Eigen::VectorXd& y,
                   const GpOptions& opt);

struct GpPosterior {
  ScenarioField mean;
  ScenarioField var;
  ArdSeKernel kernel;
  std::size_t n_train = 0;
  double log_marginal = 0.0;
};

GpPosterior gpr_predict_grid(const GprModel& model, const ScenarioSpace& space);
GpPosterior gpr_predict_grid_serial(const GprModel& model, const ScenarioSpace& space);
/// Zero-mean prior on the grid, used when a class has no observations.
GpPosterior gpr_prior(const ScenarioSpace& space, const ArdSeKernel& k = {});
GpPosterior gpr_fit(const ScenarioSpace& space, const Points& x, const std::vector<double>& y,
                    const GpOptions& opt);

// ------------------------------------------------------------ classification

/// Laplace-approximated GP classifier, logistic likelihood, labels in {+1,-1}.
struct GpcModel {
  ArdSeKernel kernel;
  Points x;
  Eigen::VectorXd y;
  Eigen::VectorXd f_hat;     // posterior mode of the latent function
  Eigen::VectorXd grad_lik;  // d log p(y|f) / df at the mode
  Eigen::VectorXd sqrt_w;
  Eigen::LLT<Eigen::MatrixXd> b_factor;  // B = I + W^1/2 K W^1/2
  double log_marginal = 0.0;
  bool degenerate = false;   // single observed class: constant fallback
  double prior_mean = 0.0;   // constant latent prior mean

  /// (P(y=+1), latent predictive variance).
  [[nodiscard]] std::pair<double, double> predict(const Scenario& s) const;
};

struct LaplaceResult {
  Eigen::VectorXd f_hat;
  double log_marginal = 0.0;
  int iterations = 0;
};

/// Newton mode search (at most 100 iterations) and the approximate log
/// marginal likelihood with its log-space gradient. `warm` seeds the search.
/// The latent has constant prior mean `prior_mean`; f_hat is reported
/// relative to it.
LaplaceResult gpc_laplace(const ArdSeKernel& k, const Points& x, const Eigen::VectorXd& y,
                          double jitter, std::array<double, 3>* grad = nullptr,
                          const Eigen::VectorXd* warm = nullptr, double prior_mean = 0.0);

/// Latent prior mean: logit of the smoothed share of +1 labels,
/// (n_+1 + 1) / (n + 2). Away from the data the classifier falls back to the
/// observed class balance instead of 1/2.
double class_prior_logit(const Eigen::VectorXd& y) noexcept;

GpcModel gpc_train(const ScenarioSpace& space, const Points& x, const Eigen::VectorXd& y,
                   const GpOptions& opt);

struct GpcPosterior {
  ScenarioField p_class1;
  ScenarioField latent_var;
  ArdSeKernel kernel;
  bool degenerate = false;
  std::size_t n_train = 0;
  double log_marginal = 0.0;
};

GpcPosterior gpc_predict_grid(const GpcModel& model, const ScenarioSpace& space);
GpcPosterior gpc_predict_grid_serial(const GpcModel& model, const ScenarioSpace& space);
GpcPosterior gpc_fit(const ScenarioSpace& space, const Points& x, const std::vector<double>& labels,
                     const GpOptions& opt);

// ------------------------------------------------------------------- gated

struct Observation {
  std::size_t flat = 0;
  double f = 0.0;  // dissimilarity in {-1, 0, +1}

  bool operator==(const Observation&) const = default;
};

/// Classifier over {f != 0} vs {f == 0} blending one regressor per class.
struct GatedPosterior {
  GpcPosterior gpc;
  GpPosterior gp_sub;  // f != 0
  GpPosterior gp_opt;  // f == 0
  ScenarioField mean;  // p1 m_sub + (1 - p1) m_opt
};

GatedPosterior gated_fit(const ScenarioSpace& space, const std::vector<Observation>& obs,
                         const GpOptions& opt);

}  // namespace atslg
