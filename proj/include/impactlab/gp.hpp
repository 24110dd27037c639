#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "impactlab/types.hpp"

namespace impactlab {

/// ARD squared-exponential kernel parameters.
struct GpHyperparams {
  double signal_std = 1.0;
  Eigen::VectorXd length_scales;
  double noise_std = 0.1;

  void validate() const;
  Eigen::Index dim() const { return length_scales.size(); }

  /// (log sigma_f, log l_1..l_D, log sigma_n)
  Eigen::VectorXd to_log() const;
  static GpHyperparams from_log(const Eigen::VectorXd& theta);
};

/// sigma_f^2 exp(-1/2 sum_d (x_d - x'_d)^2 / l_d^2)
double ard_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const GpHyperparams& hp);

/// Diagonal jitter added to the kernel matrix, relative to sigma_f^2.
inline constexpr double kJitter = 1e-8;

struct LmlResult {
  double value = 0.0;
  /// d value / d (log sigma_f, log l_1..l_D, log sigma_n)
  Eigen::VectorXd gradient;
};

/// Log marginal likelihood of zero-mean GP targets `y` at inputs `x` (N x D).
/// Throws NumericalFailure if the kernel matrix is not positive definite.
LmlResult log_marginal_likelihood(const GpHyperparams& hp, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y);

struct GpFitOptions {
  bool optimize = true;
  /// Optimizer starts: the initial guess plus (restarts - 1) perturbed copies.
  int restarts = 3;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  /// Subtract the target mean before fitting. The targets are always scaled
  /// by their spread; without centering, an empty set predicts exactly 0.
  bool center = true;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact GP posterior with cached Cholesky factor and weights. Immutable once
/// built, so safe to share across threads.
class GpRegressor {
 public:
  GpRegressor() = default;

  /// Default hyperparameter guess: l_d = std of feature d, sigma_f = 1,
  /// sigma_n = 0.1 (in standardized target units).
  static GpHyperparams initial_guess(const Eigen::MatrixXd& x);

  /// Fit hyperparameters (unless options.optimize is false) and condition on
  /// the data. N = 0 is allowed and yields the prior.
  static GpRegressor fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const GpFitOptions& options = {});

  /// Condition on data with fixed hyperparameters, given in target units.
  /// Targets are used as is (no centering or scaling).
  static GpRegressor condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const GpHyperparams& hp);

  /// Rebuild from stored state (deserialization).
  static GpRegressor restore(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const GpHyperparams& standardized_hp, double offset, double scale);

  GpPrediction predict(const Eigen::VectorXd& query) const;
  double predict_mean(const Eigen::VectorXd& query) const { return predict(query).mean; }

  /// Hyperparameters in standardized target units.
  const GpHyperparams& standardized_hyperparams() const { return hp_; }
  /// Hyperparameters in target units.
  GpHyperparams hyperparams() const;
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }
  double offset() const { return offset_; }
  double scale() const { return scale_; }
  Eigen::Index dim() const { return hp_.dim(); }
  Eigen::Index size() const { return x_.rows(); }
  double log_marginal_likelihood() const { return lml_; }

 private:
  void factor();

  GpHyperparams hp_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;  // raw targets
  double offset_ = 0.0;
  double scale_ = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = kJitter;
  double lml_ = 0.0;
};

}  // namespace impactlab
