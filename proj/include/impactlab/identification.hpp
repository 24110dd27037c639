#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "impactlab/models.hpp"
#include "impactlab/optimize.hpp"

namespace impactlab {

struct ParamBounds {
  double mu_lo = 0.0;
  double mu_hi = ModelParams::kDefaultMuMax;
  double eps_lo = 0.0;
  double eps_hi = 1.0;

  void validate() const;
  Vec2 lower() const { return {mu_lo, eps_lo}; }
  Vec2 upper() const { return {mu_hi, eps_hi}; }
  ModelParams clamp(const ModelParams& p) const;
};

struct FitConfig {
  std::size_t k = 120;  // trials per fit
  std::size_t m = 50;   // bootstrap iterations
  ParamBounds bounds;
  int grid_mu = 64;
  int grid_eps = 64;
  NelderMeadOptions polish;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate(std::size_t dataset_size) const;
};

/// A trial reduced to what the impulse objective needs.
struct PreparedTrial {
  ContactProblem problem;
  Vec2 measured;  // measured impulse (t, n)
};

/// Throws InvalidInput if any trial is not approaching the surface.
std::vector<PreparedTrial> prepare_trials(std::span<const ImpactTrial> trials);

/// sum_n || P_n - f(mu, eps, trial_n) ||_2
double impulse_objective(ModelId model, const ModelParams& params,
                         std::span<const PreparedTrial> trials);

struct BatchFit {
  ModelParams params;
  double objective = 0.0;
  /// The objective does not depend on mu at the optimum (all trials
  /// frictionless-central, say); mu is then reported as the lower bound.
  bool mu_unidentified = false;
  bool polish_converged = false;
};

/// Grid search over the parameter box followed by a Nelder-Mead polish from
/// the best vertex. Exact grid ties resolve to the smallest mu, then eps.
BatchFit fit_batch(ModelId model, std::span<const PreparedTrial> trials, const FitConfig& config);
BatchFit fit_batch(ModelId model, std::span<const ImpactTrial> trials, const FitConfig& config);

struct FitResult {
  ModelId model = ModelId::APNewton;
  std::size_t k = 0;
  std::size_t m = 0;
  ModelParams mean;
  double std_mu = 0.0;
  double std_eps = 0.0;
  std::vector<ModelParams> iterations;
  std::vector<double> objectives;
};

/// m fits, each on k trials drawn without replacement (independently per
/// iteration); reports the mean and sample standard deviation.
FitResult fit_bootstrap(ModelId model, std::span<const ImpactTrial> dataset,
                        const FitConfig& config);

/// fit_bootstrap at each k in `k_values` (same m, seeds derived from k).
std::vector<FitResult> convergence_curve(ModelId model, std::span<const ImpactTrial> dataset,
                                         std::span<const std::size_t> k_values,
                                         const FitConfig& config);

struct PerTrialFit {
  std::uint64_t trial_id = 0;
  ModelParams params;
  double residual = 0.0;  // impulse error norm at the optimum
};

std::vector<PerTrialFit> fit_per_trial(ModelId model, std::span<const ImpactTrial> dataset,
                                       const FitConfig& config);

struct SurfaceGrid {
  ParamBounds bounds;
  int n_mu = 64;
  int n_eps = 64;

  double mu(int i) const;
  double eps(int j) const;
};

struct ObjectiveSurface {
  SurfaceGrid grid;
  Eigen::MatrixXd values;  // (n_mu, n_eps)
};

ObjectiveSurface objective_surface(ModelId model, std::span<const ImpactTrial> trials,
                                   const SurfaceGrid& grid, unsigned threads = 0);

/// Rows of "mu,eps,objective".
void write_surface_csv(std::ostream& out, const ObjectiveSurface& surface);

/// {"format": "impactlab-fit", "version": 1, "fits": [...]}, one entry per
/// model with mean and std of (mu, eps) plus the per-iteration values.
std::string fits_to_json(std::span<const FitResult> fits);
std::vector<FitResult> fits_from_json(const std::string& text);
/// Mean parameters keyed by model, the input analytical evaluation needs.
ModelParamMap fit_params(std::span<const FitResult> fits);
/// Plain-text table: model, mu +- std, eps +- std.
std::string fits_table(std::span<const FitResult> fits);

}  // namespace impactlab
