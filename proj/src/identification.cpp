#include "impactlab/identification.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "impactlab/parallel.hpp"
#include "text_format.hpp"

namespace impactlab {

namespace {

double grid_value(double lo, double hi, int n, int i) {
  return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

std::pair<double, double> mean_and_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

void ParamBounds::validate() const {
  if (!(mu_lo >= 0.0 && mu_lo <= mu_hi)) throw InvalidInput("invalid friction bounds");
  if (!(eps_lo >= 0.0 && eps_lo <= eps_hi && eps_hi <= 1.0)) {
    throw InvalidInput("invalid restitution bounds");
  }
}

ModelParams ParamBounds::clamp(const ModelParams& p) const {
  return {std::clamp(p.mu, mu_lo, mu_hi), std::clamp(p.eps, eps_lo, eps_hi)};
}

void FitConfig::validate(std::size_t dataset_size) const {
  bounds.validate();
  if (k < 1 || k > dataset_size) {
    throw InvalidInput("trials per fit (k = " + std::to_string(k) + ") must be in [1, " +
                       std::to_string(dataset_size) + "]");
  }
  if (m < 1) throw InvalidInput("bootstrap iterations must be at least 1");
  if (grid_mu < 1 || grid_eps < 1) throw InvalidInput("grid resolution must be positive");
}

std::vector<PreparedTrial> prepare_trials(std::span<const ImpactTrial> trials) {
  std::vector<PreparedTrial> out;
  out.reserve(trials.size());
  for (const ImpactTrial& t : trials) {
    PreparedTrial p{ContactProblem::from(t.body, t.contact, t.pre.v), measured_impulse(t).vec()};
    if (!(p.problem.velocity.y() < 0.0)) {
      throw InvalidInput("trial " + std::to_string(t.id) + " is not an approaching impact");
    }
    out.push_back(p);
  }
  return out;
}

double impulse_objective(ModelId model, const ModelParams& params,
                         std::span<const PreparedTrial> trials) {
  double total = 0.0;
  for (const PreparedTrial& t : trials) {
    total += (t.measured - predict_contact_impulse(model, params, t.problem)).norm();
  }
  return total;
}

BatchFit fit_batch(ModelId model, std::span<const PreparedTrial> trials, const FitConfig& config) {
  config.bounds.validate();
  if (trials.empty()) throw InvalidInput("fit_batch needs at least one trial");
  const ParamBounds& b = config.bounds;
  auto objective = [&](const Vec2& x) {
    return impulse_objective(model, {x.x(), x.y()}, trials);
  };

  Vec2 best(b.mu_lo, b.eps_lo);
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i < config.grid_mu; ++i) {
    for (int j = 0; j < config.grid_eps; ++j) {
      const Vec2 x(grid_value(b.mu_lo, b.mu_hi, config.grid_mu, i),
                   grid_value(b.eps_lo, b.eps_hi, config.grid_eps, j));
      const double f = objective(x);
      if (f < best_f) {
        best_f = f;
        best = x;
      }
    }
  }

  BatchFit out;
  const Vec2 step((b.mu_hi - b.mu_lo) / std::max(config.grid_mu - 1, 1),
                  (b.eps_hi - b.eps_lo) / std::max(config.grid_eps - 1, 1));
  if (step.x() > 0.0 || step.y() > 0.0) {
    const Vec2 safe_step = step.cwiseMax(Vec2::Constant(1e-6));
    const NelderMeadResult polished =
        nelder_mead_2d(objective, best, safe_step, b.lower(), b.upper(), config.polish);
    out.polish_converged = polished.converged;
    if (polished.value < best_f) {
      best_f = polished.value;
      best = polished.x;
    }
  }

  double f_min = best_f;
  double f_max = best_f;
  for (int i = 0; i < config.grid_mu; ++i) {
    const double f = objective({grid_value(b.mu_lo, b.mu_hi, config.grid_mu, i), best.y()});
    f_min = std::min(f_min, f);
    f_max = std::max(f_max, f);
  }
  if (f_max - f_min < 1e-10 && b.mu_hi > b.mu_lo) {
    out.mu_unidentified = true;
    best.x() = b.mu_lo;
    best_f = objective(best);
  }
  out.params = {best.x(), best.y()};
  out.objective = best_f;
  return out;
}

BatchFit fit_batch(ModelId model, std::span<const ImpactTrial> trials, const FitConfig& config) {
  const auto prepared = prepare_trials(trials);
  return fit_batch(model, std::span<const PreparedTrial>(prepared), config);
}

FitResult fit_bootstrap(ModelId model, std::span<const ImpactTrial> dataset,
                        const FitConfig& config) {
  config.validate(dataset.size());
  const auto prepared = prepare_trials(dataset);

  FitResult out;
  out.model = model;
  out.k = config.k;
  out.m = config.m;
  out.iterations.resize(config.m);
  out.objectives.resize(config.m);

  parallel_for(
      config.m,
      [&](std::size_t it) {
        auto rng = stream(config.seed, static_cast<std::uint64_t>(model), it);
        std::vector<std::size_t> order(prepared.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        // partial Fisher-Yates: the first k entries are a uniform k-subset
        for (std::size_t i = 0; i < config.k; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
          std::swap(order[i], order[pick(rng)]);
        }
        // fit in dataset order, so k = N reproduces fit_batch on the full set
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.k));
        std::vector<PreparedTrial> subset;
        subset.reserve(config.k);
        for (std::size_t i = 0; i < config.k; ++i) subset.push_back(prepared[order[i]]);
        const BatchFit fit = fit_batch(model, std::span<const PreparedTrial>(subset), config);
        out.iterations[it] = fit.params;
        out.objectives[it] = fit.objective;
      },
      config.threads);

  std::vector<double> mus;
  std::vector<double> epss;
  for (const ModelParams& p : out.iterations) {
    mus.push_back(p.mu);
    epss.push_back(p.eps);
  }
  const auto [mu_mean, mu_std] = mean_and_std(mus);
  const auto [eps_mean, eps_std] = mean_and_std(epss);
  out.mean = {mu_mean, eps_mean};
  out.std_mu = mu_std;
  out.std_eps = eps_std;
  return out;
}

std::vector<FitResult> convergence_curve(ModelId model, std::span<const ImpactTrial> dataset,
                                         std::span<const std::size_t> k_values,
                                         const FitConfig& config) {
  std::vector<FitResult> out;
  out.reserve(k_values.size());
  for (std::size_t k : k_values) {
    FitConfig c = config;
    c.k = k;
    c.seed = config.seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
    out.push_back(fit_bootstrap(model, dataset, c));
  }
  return out;
}

std::vector<PerTrialFit> fit_per_trial(ModelId model, std::span<const ImpactTrial> dataset,
                                       const FitConfig& config) {
  config.bounds.validate();
  const auto prepared = prepare_trials(dataset);
  std::vector<PerTrialFit> out(dataset.size());
  parallel_for(
      dataset.size(),
      [&](std::size_t i) {
        const BatchFit fit =
            fit_batch(model, std::span<const PreparedTrial>(&prepared[i], 1), config);
        out[i] = {dataset[i].id, fit.params, fit.objective};
      },
      config.threads);
  return out;
}

double SurfaceGrid::mu(int i) const { return grid_value(bounds.mu_lo, bounds.mu_hi, n_mu, i); }
double SurfaceGrid::eps(int j) const { return grid_value(bounds.eps_lo, bounds.eps_hi, n_eps, j); }

ObjectiveSurface objective_surface(ModelId model, std::span<const ImpactTrial> trials,
                                   const SurfaceGrid& grid, unsigned threads) {
  grid.bounds.validate();
  if (grid.n_mu < 1 || grid.n_eps < 1) throw InvalidInput("surface grid must be non-empty");
  const auto prepared = prepare_trials(trials);
  ObjectiveSurface out{grid, Eigen::MatrixXd(grid.n_mu, grid.n_eps)};
  parallel_for(
      static_cast<std::size_t>(grid.n_mu),
      [&](std::size_t i) {
        for (int j = 0; j < grid.n_eps; ++j) {
          out.values(static_cast<Eigen::Index>(i), j) = impulse_objective(
              model, {grid.mu(static_cast<int>(i)), grid.eps(j)}, prepared);
        }
      },
      threads);
  return out;
}

void write_surface_csv(std::ostream& out, const ObjectiveSurface& surface) {
  out << "mu,eps,objective\n";
  for (int i = 0; i < surface.grid.n_mu; ++i) {
    for (int j = 0; j < surface.grid.n_eps; ++j) {
      out << format_double(surface.grid.mu(i)) << ',' << format_double(surface.grid.eps(j)) << ','
          << format_double(surface.values(i, j)) << '\n';
    }
  }
}

std::string fits_to_json(std::span<const FitResult> fits) {
  nlohmann::ordered_json j;
  j["format"] = "impactlab-fit";
  j["version"] = 1;
  auto rows = nlohmann::ordered_json::array();
  for (const FitResult& f : fits) {
    nlohmann::ordered_json r;
    r["model"] = std::string(to_string(f.model));
    r["k"] = f.k;
    r["m"] = f.m;
    r["mu"] = f.mean.mu;
    r["mu_std"] = f.std_mu;
    r["eps"] = f.mean.eps;
    r["eps_std"] = f.std_eps;
    auto its = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < f.iterations.size(); ++i) {
      its.push_back({{"mu", f.iterations[i].mu},
                     {"eps", f.iterations[i].eps},
                     {"objective", i < f.objectives.size() ? f.objectives[i] : 0.0}});
    }
    r["iterations"] = its;
    rows.push_back(r);
  }
  j["fits"] = rows;
  return j.dump(2);
}

std::vector<FitResult> fits_from_json(const std::string& text) {
  std::vector<FitResult> out;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "impactlab-fit") throw DataError("not an impactlab fit file");
    if (j.at("version") != 1) throw DataError("unsupported fit file version");
    for (const auto& r : j.at("fits")) {
      FitResult f;
      f.model = parse_model_id(r.at("model").get<std::string>());
      f.k = r.at("k").get<std::size_t>();
      f.m = r.at("m").get<std::size_t>();
      f.mean = {r.at("mu").get<double>(), r.at("eps").get<double>()};
      f.std_mu = r.at("mu_std").get<double>();
      f.std_eps = r.at("eps_std").get<double>();
      for (const auto& it : r.value("iterations", nlohmann::json::array())) {
        f.iterations.push_back({it.at("mu").get<double>(), it.at("eps").get<double>()});
        f.objectives.push_back(it.at("objective").get<double>());
      }
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fit file: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("malformed fit file: ") + e.what());
  }
  return out;
}

ModelParamMap fit_params(std::span<const FitResult> fits) {
  ModelParamMap out;
  for (const FitResult& f : fits) out[f.model] = f.mean;
  return out;
}

std::string fits_table(std::span<const FitResult> fits) {
  auto fixed = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return std::string(buf);
  };
  std::ostringstream s;
  s << "model               mu               eps\n";
  for (const FitResult& f : fits) {
    std::string name(display_name(f.model));
    name.resize(std::max<std::size_t>(name.size() + 1, 20), ' ');
    std::string mu = fixed(f.mean.mu) + " +- " + fixed(f.std_mu);
    mu.resize(std::max<std::size_t>(mu.size() + 1, 17), ' ');
    s << name << mu << fixed(f.mean.eps) << " +- " << fixed(f.std_eps) << '\n';
  }
  return s.str();
}

}  // namespace impactlab
