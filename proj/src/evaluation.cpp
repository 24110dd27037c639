#include "impactlab/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "impactlab/parallel.hpp"
#include "text_format.hpp"

namespace impactlab {

namespace {

using ojson = nlohmann::ordered_json;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

// Linear-interpolation quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double sorted_mean(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

void check_index(std::span<const std::size_t> index, std::size_t n, const char* side) {
  for (std::size_t i : index) {
    if (i >= n) throw InvalidInput(std::string(side) + " index out of range");
  }
}

ojson summary_json(const ErrorSummary& s) {
  ojson j;
  j["n"] = s.samples.size();
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["std"] = s.std;
  j["samples"] = s.samples;
  ojson kde;
  kde["bandwidth"] = s.kde.bandwidth;
  kde["degenerate"] = s.kde.degenerate;
  kde["x"] = s.kde.x;
  kde["density"] = s.kde.density;
  j["kde"] = kde;
  return j;
}

}  // namespace

std::string Split::describe() const {
  std::ostringstream s;
  s << "stratified by incidence-angle quartile, train fraction " << format_double(train_fraction)
    << ", seed " << seed << " (" << train.size() << " train / " << eval.size() << " eval)";
  return s.str();
}

double incidence_angle(const ImpactTrial& trial) {
  const Vec2 vc = contact_velocity(trial.contact, trial.pre.v);
  return std::atan2(std::abs(vc.x()), -vc.y());
}

Split stratified_split(std::span<const ImpactTrial> dataset, double train_fraction,
                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("train fraction must lie strictly between 0 and 1");
  }
  Split out;
  out.train_fraction = train_fraction;
  out.seed = seed;
  const std::size_t n = dataset.size();
  if (n == 0) return out;

  std::vector<double> angle(n);
  for (std::size_t i = 0; i < n; ++i) angle[i] = incidence_angle(dataset[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return angle[a] < angle[b]; });

  // Largest-remainder apportionment keeps the total at round(fraction * n).
  const std::size_t total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::array<std::size_t, 4> begin{};
  std::array<std::size_t, 4> size{};
  std::array<std::size_t, 4> quota{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t q = 0; q < 4; ++q) {
    begin[q] = q * n / 4;
    size[q] = (q + 1) * n / 4 - begin[q];
    const double exact = static_cast<double>(total) * static_cast<double>(size[q]) / static_cast<double>(n);
    quota[q] = static_cast<std::size_t>(std::floor(exact));
    remainder[q] = exact - static_cast<double>(quota[q]);
    assigned += quota[q];
  }
  std::array<std::size_t, 4> rank{0, 1, 2, 3};
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quota[rank[k % 4]];

  auto rng = stream(seed, 0x5b1u, 0);
  for (std::size_t q = 0; q < 4; ++q) {
    std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(begin[q]),
                                   order.begin() + static_cast<std::ptrdiff_t>(begin[q] + size[q]));
    std::shuffle(chunk.begin(), chunk.end(), rng);
    const std::size_t take = std::min(quota[q], chunk.size());
    out.train.insert(out.train.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(take));
    out.eval.insert(out.eval.end(), chunk.begin() + static_cast<std::ptrdiff_t>(take), chunk.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.eval.begin(), out.eval.end());
  return out;
}

std::vector<ImpactTrial> select(std::span<const ImpactTrial> dataset,
                                std::span<const std::size_t> index) {
  check_index(index, dataset.size(), "trial");
  std::vector<ImpactTrial> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(dataset[i]);
  return out;
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  const double sd = sample_std(sorted, mean);
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> default_kde_grid(std::span<const double> samples, std::size_t points) {
  if (samples.empty() || points < 2) throw InvalidInput("KDE grid needs samples and >= 2 points");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double h = silverman_bandwidth(samples);
  if (!(h > 0.0)) h = std::max(std::abs(*lo_it) * 0.1, 1e-3);
  const double lo = *lo_it - 3.0 * h;
  const double hi = *hi_it + 3.0 * h;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

KdeCurve kde_pdf(std::span<const double> samples, std::span<const double> grid) {
  if (samples.size() < 2) throw InvalidInput("KDE needs at least two samples");
  if (grid.size() < 2) throw InvalidInput("KDE grid needs at least two points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InvalidInput("KDE grid must be strictly increasing");
  }
  KdeCurve out;
  out.x.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  out.bandwidth = silverman_bandwidth(samples);

  auto area = [&] {
    double a = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      a += 0.5 * (out.density[i] + out.density[i - 1]) * (grid[i] - grid[i - 1]);
    }
    return a;
  };

  if (!(out.bandwidth > 0.0)) {
    // all samples equal: a unit-area spike at the nearest grid point
    out.degenerate = true;
    const double at = samples[0];
    const auto nearest = static_cast<std::size_t>(
        std::min_element(grid.begin(), grid.end(),
                         [&](double a, double b) { return std::abs(a - at) < std::abs(b - at); }) -
        grid.begin());
    out.density[nearest] = 1.0;
  } else {
    const double h = out.bandwidth;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double acc = 0.0;
      for (double s : samples) {
        const double u = (grid[i] - s) / h;
        acc += std::exp(-0.5 * u * u);
      }
      out.density[i] = acc * norm;
    }
  }
  const double a = area();
  if (!(a > 0.0)) throw InvalidInput("KDE grid does not cover the samples");
  for (double& d : out.density) d /= a;
  return out;
}

ErrorSummary summarize(std::vector<double> samples, bool with_kde) {
  ErrorSummary out;
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  out.mean = sorted_mean(sorted);
  out.median = quantile(sorted, 0.5);
  out.std = sample_std(sorted, out.mean);
  if (with_kde && samples.size() >= 2) out.kde = kde_pdf(samples, default_kde_grid(samples));
  out.samples = std::move(samples);
  return out;
}

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::Analytical: return "analytical";
    case RowKind::BestPostHoc: return "best-post-hoc";
    case RowKind::IrbBound: return "irb-bound";
    case RowKind::Learned: return "learned";
  }
  return "?";
}

const ModelRow* EvalReport::find(const std::string& name) const {
  for (const ModelRow& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

EvalReport evaluate_models(std::span<const ImpactTrial> dataset, const Split& split,
                           const EvalInputs& inputs, const ErrorMetric& metric, unsigned threads) {
  check_index(split.train, dataset.size(), "train");
  check_index(split.eval, dataset.size(), "eval");
  {
    const std::set<std::size_t> train(split.train.begin(), split.train.end());
    for (std::size_t i : split.eval) {
      if (train.count(i)) throw InvalidInput("train and eval splits overlap");
    }
  }
  if (split.eval.empty()) throw InvalidInput("evaluation split is empty");
  const std::vector<ImpactTrial> trials = select(dataset, split.eval);

  std::set<std::uint64_t> eval_ids;
  for (const ImpactTrial& t : trials) eval_ids.insert(t.id);
  for (const NamedLearnedModel& m : inputs.learned) {
    if (!m.model) throw InvalidInput("learned model '" + m.name + "' is missing");
    for (std::uint64_t id : m.model->training_ids()) {
      if (eval_ids.count(id)) {
        throw DataError("split leakage: learned model '" + m.name + "' was trained on evaluation trial " +
                        std::to_string(id));
      }
    }
  }
  if ((inputs.best_post_hoc) && inputs.analytical.empty()) {
    throw InvalidInput("best post hoc needs identified analytical models");
  }

  const std::size_t n = trials.size();
  const std::size_t n_analytical = inputs.analytical.size();
  const std::size_t n_learned = inputs.learned.size();
  std::vector<ModelId> ids;
  for (const auto& [id, p] : inputs.analytical) ids.push_back(id);

  std::vector<std::vector<double>> analytical(n_analytical, std::vector<double>(n));
  std::vector<std::vector<double>> learned(n_learned, std::vector<double>(n));
  std::vector<std::vector<char>> feasible(n_learned, std::vector<char>(n, 1));
  std::vector<double> irb(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t t) {
        const ImpactTrial& trial = trials[t];
        for (std::size_t k = 0; k < n_analytical; ++k) {
          const Vec3 v = predict_post_velocity(ids[k], inputs.analytical.at(ids[k]), trial.body,
                                               trial.contact, trial.pre.v);
          analytical[k][t] = velocity_error(trial, v, metric);
        }
        for (std::size_t k = 0; k < n_learned; ++k) {
          const LearnedPrediction p = inputs.learned[k].model->predict(trial.body, trial.contact, trial.pre);
          learned[k][t] = velocity_error(trial, p.v_post, metric);
          feasible[k][t] = p.feasible ? 1 : 0;
        }
        if (inputs.irb_bound) irb[t] = irb_bound(trial, {metric, true}).error;
      },
      threads);

  EvalReport report;
  report.dataset_size = dataset.size();
  report.split = split;
  report.metric = metric;

  for (std::size_t k = 0; k < n_analytical; ++k) {
    ModelRow row;
    row.name = std::string(to_string(ids[k]));
    row.kind = RowKind::Analytical;
    row.params = inputs.analytical.at(ids[k]);
    row.errors = summarize(analytical[k]);
    report.rows.push_back(std::move(row));
  }
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < n_analytical; ++k) best[t] = std::min(best[t], analytical[k][t]);
  }
  if (inputs.best_post_hoc) {
    ModelRow row;
    row.name = "best-post-hoc";
    row.kind = RowKind::BestPostHoc;
    row.errors = summarize(best);
    report.rows.push_back(std::move(row));
  }
  if (inputs.irb_bound) {
    ModelRow row;
    row.name = "irb-bound";
    row.kind = RowKind::IrbBound;
    row.errors = summarize(irb);
    report.rows.push_back(std::move(row));
    if (n_analytical > 0) {
      for (std::size_t t = 0; t < n; ++t) {
        // the bound is an exact constrained minimum; allow rounding slack only
        if (irb[t] > best[t] + 1e-12 + 1e-9 * best[t]) ++report.dominance_violations;
      }
    }
  }
  report.dominance_holds = report.dominance_violations == 0;

  for (std::size_t k = 0; k < n_learned; ++k) {
    ModelRow row;
    row.name = inputs.learned[k].name;
    row.kind = RowKind::Learned;
    row.spec = inputs.learned[k].model->spec().describe();
    row.errors = summarize(learned[k]);
    row.infeasible = static_cast<std::size_t>(std::count(feasible[k].begin(), feasible[k].end(), 0));
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_json(const EvalReport& r) {
  ojson j;
  j["format"] = "impactlab-eval-report";
  j["version"] = 1;
  j["dataset"] = r.dataset;
  j["dataset_size"] = r.dataset_size;
  ojson split;
  split["description"] = r.split.describe();
  split["train_fraction"] = r.split.train_fraction;
  split["seed"] = r.split.seed;
  split["train"] = r.split.train;
  split["eval"] = r.split.eval;
  j["split"] = split;
  j["seed"] = r.split.seed;
  j["metric"] = r.metric.describe();
  j["dominance"] = {{"holds", r.dominance_holds}, {"violations", r.dominance_violations}};
  ojson rows = ojson::array();
  for (const ModelRow& row : r.rows) {
    ojson o;
    o["name"] = row.name;
    o["kind"] = to_string(row.kind);
    if (row.params) o["params"] = {{"mu", row.params->mu}, {"eps", row.params->eps}};
    if (!row.spec.empty()) o["spec"] = row.spec;
    if (row.kind == RowKind::Learned) o["infeasible"] = row.infeasible;
    o["errors"] = summary_json(row.errors);
    rows.push_back(o);
  }
  j["models"] = rows;
  return j.dump(1);
}

void write_kde_csv(std::ostream& out, const KdeCurve& curve) {
  out << "x,density\n";
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    out << format_double(curve.x[i]) << ',' << format_double(curve.density[i]) << '\n';
  }
}

LearningCurve learning_curve(std::span<const ImpactTrial> dataset, const Split& split,
                             const LearnedSpec& spec, const CurveOptions& options) {
  if (options.sizes.empty()) throw InvalidInput("learning curve needs at least one size");
  if (options.repeats < 1) throw InvalidInput("learning curve repeats must be at least 1");
  for (std::size_t i = 0; i < options.sizes.size(); ++i) {
    if (options.sizes[i] < 1 || (i > 0 && options.sizes[i] <= options.sizes[i - 1])) {
      throw InvalidInput("learning-curve sizes must be positive and strictly increasing");
    }
  }
  if (options.sizes.back() > split.train.size()) {
    throw InvalidInput("largest training size " + std::to_string(options.sizes.back()) +
                       " exceeds the training split (" + std::to_string(split.train.size()) + ")");
  }
  if (split.eval.empty()) throw InvalidInput("evaluation split is empty");

  const std::vector<ImpactTrial> train = select(dataset, split.train);
  const std::vector<ImpactTrial> eval = select(dataset, split.eval);
  TrainOptions inner = options.train;
  inner.threads = 1;
  const TrainingData data = build_training_data(spec, train, options.train);

  LearningCurve out;
  out.model = spec.describe();
  out.sizes = options.sizes;
  out.repeats = options.repeats;
  out.per_repeat.assign(options.sizes.size(), std::vector<double>(options.repeats, 0.0));
  const std::size_t tasks = options.sizes.size() * options.repeats;
  parallel_for(
      tasks,
      [&](std::size_t task) {
        const std::size_t s = task / options.repeats;
        const std::size_t r = task % options.repeats;
        const std::size_t size = options.sizes[s];
        auto rng = stream(options.seed, size, r);
        std::vector<std::size_t> idx(train.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < size; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
          std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(size);
        std::sort(idx.begin(), idx.end());
        TrainOptions opts = inner;
        opts.gp.seed = options.train.gp.seed ^ (0x9e3779b97f4a7c15ULL * (task + 1));
        const LearnedContactModel model = train_from_data(spec, data.rows(idx), opts);
        std::vector<double> errors(eval.size());
        for (std::size_t t = 0; t < eval.size(); ++t) {
          const LearnedPrediction p = model.predict(eval[t].body, eval[t].contact, eval[t].pre);
          errors[t] = velocity_error(eval[t], p.v_post, options.metric);
        }
        out.per_repeat[s][r] = sorted_mean(std::move(errors));
      },
      options.train.threads);

  for (const auto& reps : out.per_repeat) {
    const double m = std::accumulate(reps.begin(), reps.end(), 0.0) / static_cast<double>(reps.size());
    out.mean.push_back(m);
    out.std.push_back(sample_std(reps, m));
  }
  return out;
}

std::size_t plateau_size(const LearningCurve& curve, double fraction) {
  if (curve.sizes.empty()) throw InvalidInput("empty learning curve");
  const double threshold = fraction * curve.mean.back();
  std::size_t at = curve.sizes.size() - 1;
  for (std::size_t i = curve.sizes.size() - 1; i-- > 0;) {
    if (curve.mean[i] - curve.mean[i + 1] >= threshold) break;
    at = i;
  }
  return curve.sizes[at];
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty() || v < 0) throw InvalidInput("invalid size '" + s + "' in '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  std::vector<std::size_t> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw InvalidInput("sizes range must look like a:b:step");
    const std::size_t a = number(parts[0]);
    const std::size_t b = number(parts[1]);
    const std::size_t step = number(parts[2]);
    if (step == 0 || a == 0 || a > b) throw InvalidInput("sizes range needs 0 < a <= b and step > 0");
    for (std::size_t s = a; s <= b; s += step) out.push_back(s);
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw InvalidInput("no sizes given");
  return out;
}

void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "size,mean,std\n";
  for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
    out << curve.sizes[i] << ',' << format_double(curve.mean[i]) << ',' << format_double(curve.std[i])
        << '\n';
  }
}

}  // namespace impactlab
