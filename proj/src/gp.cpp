#include "impactlab/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

extern "C" {
void dpotrf_(const char* uplo, const int* n, double* a, const int* lda, int* info);
void dpotri_(const char* uplo, const int* n, double* a, const int* lda, int* info);
}

namespace impactlab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd kernel_matrix(const GpHyperparams& hp, const MatrixXd& x) {
  const MatrixXd xs = x * hp.length_scales.cwiseInverse().asDiagonal();
  const VectorXd sq = xs.rowwise().squaredNorm();
  MatrixXd d2 = (-2.0 * xs * xs.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  const double sf2 = hp.signal_std * hp.signal_std;
  return (sf2 * (-0.5 * d2.cwiseMax(0.0)).array().exp()).matrix();
}

struct Factored {
  Eigen::LLT<MatrixXd> llt;
  MatrixXd kf;  // noise-free kernel matrix
  double jitter = kJitter;  // relative to sigma_f^2
};

// K + (sigma_n^2 + jitter sigma_f^2) I, escalating the jitter if needed.
Factored factor_kernel(const GpHyperparams& hp, const MatrixXd& x) {
  Factored f;
  f.kf = kernel_matrix(hp, x);
  const double sf2 = hp.signal_std * hp.signal_std;
  const double sn2 = hp.noise_std * hp.noise_std;
  for (double jitter = kJitter; jitter <= 1e-2; jitter *= 10.0) {
    MatrixXd k = f.kf;
    k.diagonal().array() += sn2 + jitter * sf2;
    f.llt.compute(k);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalFailure("GP kernel matrix is not positive definite even with maximal jitter");
}

struct Box {
  VectorXd lo;
  VectorXd hi;
  VectorXd clamp(const VectorXd& t) const { return t.cwiseMax(lo).cwiseMin(hi); }
};

// Projected BFGS on f(theta) = -LML, with a backtracking Armijo search.
VectorXd minimize_neg_lml(const MatrixXd& x, const VectorXd& y, VectorXd theta, const Box& box,
                          int max_iterations, double* best_value) {
  auto eval = [&](const VectorXd& t, VectorXd* grad) {
    try {
      const LmlResult r = log_marginal_likelihood(GpHyperparams::from_log(t), x, y);
      if (!std::isfinite(r.value)) return std::numeric_limits<double>::infinity();
      if (grad) *grad = -r.gradient;
      return -r.value;
    } catch (const NumericalFailure&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::Index n = theta.size();
  theta = box.clamp(theta);
  VectorXd g;
  double f = eval(theta, &g);
  if (!std::isfinite(f)) {
    *best_value = f;
    return theta;
  }
  MatrixXd h = MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    // components pinned at a bound with the gradient pushing outward are frozen
    VectorXd pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((theta[i] <= box.lo[i] && g[i] > 0.0) || (theta[i] >= box.hi[i] && g[i] < 0.0)) pg[i] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() < 1e-7) break;

    VectorXd dir = -(h * pg);
    if (dir.dot(pg) >= 0.0) {
      h.setIdentity();
      dir = -pg;
    }
    // keep individual log-steps modest
    const double longest = dir.lpNorm<Eigen::Infinity>();
    if (longest > 2.0) dir *= 2.0 / longest;

    double step = 1.0;
    VectorXd next;
    VectorXd g_next;
    double f_next = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      next = box.clamp(theta + step * dir);
      f_next = eval(next, &g_next);
      if (f_next <= f + 1e-4 * g.dot(next - theta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const VectorXd s = next - theta;
    const VectorXd yk = g_next - g;
    const double sy = s.dot(yk);
    const double improvement = f - f_next;
    theta = next;
    g = g_next;
    f = f_next;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const MatrixXd a = MatrixXd::Identity(n, n) - rho * s * yk.transpose();
      h = a * h * a.transpose() + rho * s * s.transpose();
    }
    if (improvement < 1e-10 * (1.0 + std::abs(f))) break;
  }
  *best_value = f;
  return theta;
}

}  // namespace

void GpHyperparams::validate() const {
  if (!(signal_std > 0.0 && std::isfinite(signal_std))) throw InvalidInput("signal_std must be positive");
  if (!(noise_std > 0.0 && std::isfinite(noise_std))) throw InvalidInput("noise_std must be positive");
  for (Eigen::Index d = 0; d < length_scales.size(); ++d) {
    if (!(length_scales[d] > 0.0 && std::isfinite(length_scales[d]))) {
      throw InvalidInput("length scales must be positive");
    }
  }
}

VectorXd GpHyperparams::to_log() const {
  VectorXd t(dim() + 2);
  t[0] = std::log(signal_std);
  t.segment(1, dim()) = length_scales.array().log();
  t[dim() + 1] = std::log(noise_std);
  return t;
}

GpHyperparams GpHyperparams::from_log(const VectorXd& theta) {
  GpHyperparams hp;
  const Eigen::Index d = theta.size() - 2;
  hp.signal_std = std::exp(theta[0]);
  hp.length_scales = theta.segment(1, d).array().exp();
  hp.noise_std = std::exp(theta[d + 1]);
  return hp;
}

double ard_kernel(const VectorXd& x, const VectorXd& y, const GpHyperparams& hp) {
  if (x.size() != hp.dim() || y.size() != hp.dim()) {
    throw InvalidInput("kernel input dimension does not match the length scales");
  }
  const double r2 = ((x - y).array() / hp.length_scales.array()).square().sum();
  return hp.signal_std * hp.signal_std * std::exp(-0.5 * r2);
}

LmlResult log_marginal_likelihood(const GpHyperparams& hp, const MatrixXd& x, const VectorXd& y) {
  hp.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index dims = hp.dim();
  if (x.cols() != dims || y.size() != n) throw InvalidInput("GP data dimensions do not agree");
  LmlResult out;
  out.gradient = VectorXd::Zero(dims + 2);
  if (n == 0) return out;

  const MatrixXd kf = kernel_matrix(hp, x);
  const double sf2 = hp.signal_std * hp.signal_std;
  const double sn2 = hp.noise_std * hp.noise_std;
  const int ni = static_cast<int>(n);
  MatrixXd a;
  double jitter = kJitter;
  for (;; jitter *= 10.0) {
    if (jitter > 1e-2) {
      throw NumericalFailure("GP kernel matrix is not positive definite even with maximal jitter");
    }
    a = kf;
    a.diagonal().array() += sn2 + jitter * sf2;
    int info = 0;
    dpotrf_("L", &ni, a.data(), &ni, &info);
    if (info == 0) break;
  }
  const auto l = a.triangularView<Eigen::Lower>();
  VectorXd alpha = l.solve(y);
  out.value = -0.5 * alpha.squaredNorm() - a.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  a.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);

  // d LML / d theta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta)
  int info = 0;
  dpotri_("L", &ni, a.data(), &ni, &info);
  if (info != 0) throw NumericalFailure("GP kernel inverse failed");
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
  a = alpha * alpha.transpose() - a;

  // dK/dlog sigma_f = 2 (K_f + jitter sigma_f^2 I)
  out.gradient[0] = (a.cwiseProduct(kf)).sum() + jitter * sf2 * a.trace();
  for (Eigen::Index d = 0; d < dims; ++d) {
    const VectorXd col = x.col(d) / hp.length_scales[d];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = col[i] - col[j];
        acc += a(i, j) * kf(i, j) * diff * diff;
      }
    }
    out.gradient[1 + d] = 0.5 * acc;
  }
  out.gradient[dims + 1] = sn2 * a.trace();
  return out;
}

GpHyperparams GpRegressor::initial_guess(const MatrixXd& x) {
  GpHyperparams hp;
  hp.length_scales = VectorXd::Ones(x.cols());
  if (x.rows() >= 2) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      const double mean = x.col(d).mean();
      const double sd =
          std::sqrt((x.col(d).array() - mean).square().sum() / static_cast<double>(x.rows() - 1));
      // spreads at rounding level (a constant mass, say) count as constant
      const double magnitude = x.col(d).cwiseAbs().maxCoeff();
      if (sd > 1e-9 * magnitude && std::isfinite(sd)) hp.length_scales[d] = sd;
    }
  }
  hp.signal_std = 1.0;
  hp.noise_std = 0.1;
  return hp;
}

GpRegressor GpRegressor::fit(const MatrixXd& x, const VectorXd& y, const GpFitOptions& options) {
  if (x.rows() != y.size()) throw InvalidInput("GP inputs and targets differ in length");
  GpRegressor gp;
  gp.x_ = x;
  gp.y_ = y;
  const Eigen::Index n = y.size();
  gp.offset_ = options.center && n > 0 ? y.mean() : 0.0;
  if (n > 0) {
    const double spread = std::sqrt((y.array() - gp.offset_).square().sum() / static_cast<double>(n));
    gp.scale_ = spread > 0.0 && std::isfinite(spread) ? spread : 1.0;
  }
  gp.hp_ = initial_guess(x);

  if (options.optimize && n > 0) {
    const VectorXd ys = (y.array() - gp.offset_) / gp.scale_;
    const Eigen::Index dims = x.cols();
    Box box{VectorXd(dims + 2), VectorXd(dims + 2)};
    box.lo[0] = std::log(1e-2);
    box.hi[0] = std::log(1e2);
    for (Eigen::Index d = 0; d < dims; ++d) {
      box.lo[1 + d] = std::log(1e-2 * gp.hp_.length_scales[d]);
      box.hi[1 + d] = std::log(1e2 * gp.hp_.length_scales[d]);
    }
    box.lo[dims + 1] = std::log(1e-5);
    box.hi[dims + 1] = std::log(1.0);

    const VectorXd start = gp.hp_.to_log();
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    // Every start gets a short run; only the most promising one is refined.
    const int scout = std::min(options.max_iterations, 15);
    double best = std::numeric_limits<double>::infinity();
    VectorXd best_theta = start;
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
      VectorXd t0 = start;
      if (r > 0) {
        for (Eigen::Index i = 0; i < t0.size(); ++i) t0[i] += jitter(rng);
      }
      double value = 0.0;
      const VectorXd t = minimize_neg_lml(x, ys, t0, box, scout, &value);
      if (value < best) {
        best = value;
        best_theta = t;
      }
    }
    if (std::isfinite(best) && options.max_iterations > scout) {
      double value = 0.0;
      const VectorXd t =
          minimize_neg_lml(x, ys, best_theta, box, options.max_iterations - scout, &value);
      if (value <= best) {
        best = value;
        best_theta = t;
      }
    }
    if (!std::isfinite(best)) throw NumericalFailure("GP hyperparameter search failed at every start");
    gp.hp_ = GpHyperparams::from_log(best_theta);
  }
  gp.factor();
  return gp;
}

GpRegressor GpRegressor::condition(const MatrixXd& x, const VectorXd& y, const GpHyperparams& hp) {
  return restore(x, y, hp, 0.0, 1.0);
}

GpRegressor GpRegressor::restore(const MatrixXd& x, const VectorXd& y,
                                 const GpHyperparams& standardized_hp, double offset, double scale) {
  standardized_hp.validate();
  if (x.rows() != y.size() || x.cols() != standardized_hp.dim()) {
    throw InvalidInput("GP data dimensions do not agree");
  }
  if (!(scale > 0.0)) throw InvalidInput("GP target scale must be positive");
  GpRegressor gp;
  gp.hp_ = standardized_hp;
  gp.x_ = x;
  gp.y_ = y;
  gp.offset_ = offset;
  gp.scale_ = scale;
  gp.factor();
  return gp;
}

void GpRegressor::factor() {
  const Eigen::Index n = x_.rows();
  if (n == 0) {
    alpha_.resize(0);
    lml_ = 0.0;
    return;
  }
  const VectorXd ys = (y_.array() - offset_) / scale_;
  Factored f = factor_kernel(hp_, x_);
  llt_ = std::move(f.llt);
  jitter_ = f.jitter;
  alpha_ = llt_.solve(ys);
  const MatrixXd l = llt_.matrixL();
  lml_ = -0.5 * ys.dot(alpha_) - l.diagonal().array().log().sum() -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

GpPrediction GpRegressor::predict(const VectorXd& query) const {
  if (query.size() != hp_.dim()) throw InvalidInput("GP query dimension mismatch");
  const double prior = hp_.signal_std * hp_.signal_std + hp_.noise_std * hp_.noise_std;
  GpPrediction out;
  if (x_.rows() == 0) {
    out.mean = offset_;
    out.variance = scale_ * scale_ * prior;
    return out;
  }
  VectorXd k(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) k[i] = ard_kernel(x_.row(i).transpose(), query, hp_);
  out.mean = offset_ + scale_ * k.dot(alpha_);
  const VectorXd v = llt_.matrixL().solve(k);
  out.variance = scale_ * scale_ * std::max(0.0, prior - v.squaredNorm());
  return out;
}

GpHyperparams GpRegressor::hyperparams() const {
  GpHyperparams hp = hp_;
  hp.signal_std *= scale_;
  hp.noise_std *= scale_;
  return hp;
}

}  // namespace impactlab
