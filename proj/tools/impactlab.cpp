#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "impactlab/dataforge.hpp"
#include "impactlab/evaluation.hpp"
#include "impactlab/identification.hpp"
#include "impactlab/learned.hpp"
#include "impactlab/parallel.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace impactlab;
using cli::RunManifest;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitInvariant = 3;

// Raised when outputs were written but an asserted invariant failed.
struct InvariantFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset load_checked(const fs::path& path) {
  LoadResult r = load_dataset(path);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(r.trials);
}

std::string dataset_csv(const Dataset& d) {
  std::ostringstream s;
  write_dataset_csv(s, d);
  return s.str();
}

std::string dataset_json(const Dataset& d) {
  std::ostringstream s;
  write_dataset_json(s, d);
  return s.str();
}

struct Common {
  unsigned threads = 0;
  std::vector<std::string> argv;
};

RunManifest start(const std::string& command, const Common& common, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.args = common.argv;
  m.seed = seed;
  m.started = cli::utc_now();
  return m;
}

void finish(RunManifest& m) {
  m.finished = cli::utc_now();
  cli::record_run(m);
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
};

int run_gen(const GenArgs& a, const Common& common) {
  GenConfig config = a.config.empty() ? GenConfig{} : load_gen_config(a.config);
  if (a.seed) config.seed = *a.seed;
  if (a.n) config.n_trials = *a.n;
  config.validate();

  RunManifest m = start("gen", common, config.seed);
  GenStats stats;
  const Dataset data = generate_dataset(config, &stats, common.threads);
  const fs::path out(a.out);
  cli::write_file_atomic(out, out.extension() == ".json" ? dataset_json(data) : dataset_csv(data));

  m.config = ojson::parse(gen_config_to_json(config));
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.outputs.push_back(out);
  finish(m);
  std::cout << "generated " << stats.accepted << " trials (" << stats.attempts << " attempts, "
            << stats.no_contact << " without contact, " << stats.multi_impact << " multi-impact) -> "
            << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// identify
// ---------------------------------------------------------------------------

struct IdentifyArgs {
  std::string model = "all";
  std::string data;
  std::size_t k = 120;
  std::size_t m = 50;
  std::uint64_t seed = 0;
  std::string out;
  std::string surface;
  double mu_max = ModelParams::kDefaultMuMax;
  int grid = 64;
};

std::vector<ModelId> parse_models(const std::string& text) {
  if (text == "all") return {kAllModels.begin(), kAllModels.end()};
  std::vector<ModelId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_model_id(item));
  if (out.empty()) throw InvalidInput("no model given");
  return out;
}

int run_identify(const IdentifyArgs& a, const Common& common) {
  const std::vector<ModelId> models = parse_models(a.model);
  if (!a.surface.empty() && models.size() != 1) {
    throw InvalidInput("--surface needs a single --model");
  }
  FitConfig config;
  config.k = a.k;
  config.m = a.m;
  config.bounds.mu_hi = a.mu_max;
  config.grid_mu = config.grid_eps = a.grid;
  config.seed = a.seed;
  config.threads = common.threads;
  config.bounds.validate();

  const Dataset data = load_checked(a.data);
  config.validate(data.size());

  RunManifest m = start("identify", common, a.seed);
  std::vector<FitResult> fits;
  for (ModelId id : models) fits.push_back(fit_bootstrap(id, data, config));

  std::optional<ObjectiveSurface> surface;
  if (!a.surface.empty()) {
    // the surface of one k-subset, drawn from the run seed
    std::vector<std::size_t> index(data.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    std::vector<std::size_t> pick;
    std::mt19937_64 rng(a.seed);
    std::sample(index.begin(), index.end(), std::back_inserter(pick), config.k, rng);
    const Dataset subset = select(data, pick);
    surface = objective_surface(models.front(), subset, {config.bounds, a.grid, a.grid}, common.threads);
  }

  cli::write_file_atomic(a.out, fits_to_json(fits) + "\n");
  m.outputs.push_back(a.out);
  if (surface) {
    std::ostringstream s;
    write_surface_csv(s, *surface);
    cli::write_file_atomic(a.surface, s.str());
    m.outputs.push_back(a.surface);
  }
  m.config = {{"models", a.model}, {"k", a.k},         {"m", a.m},
              {"mu_max", a.mu_max}, {"grid", a.grid}, {"surface", !a.surface.empty()}};
  m.inputs.push_back(a.data);
  finish(m);
  std::cout << fits_table(fits);
  return 0;
}

// ---------------------------------------------------------------------------
// train / curve shared model options
// ---------------------------------------------------------------------------

struct ModelArgs {
  std::string cls = "data-driven-rigid";
  std::string features = "x1";
  std::string target = "y1";
  std::string base_model;
  std::string fits;
  std::optional<double> mu;
  std::optional<double> eps;
  int restarts = 3;
  int max_iterations = 100;
};

void add_model_options(CLI::App* sub, ModelArgs& a) {
  sub->add_option("--class", a.cls,
                  "data-driven-rigid | data-driven | reinforced-residual | reinforced-param")
      ->capture_default_str();
  sub->add_option("--features", a.features, "x-full | x1 | x2")->capture_default_str();
  sub->add_option("--target", a.target, "y1 | y2")->capture_default_str();
  sub->add_option("--base-model", a.base_model, "analytical base for reinforced classes");
  sub->add_option("--fits", a.fits, "identify output supplying the base model parameters");
  sub->add_option("--mu", a.mu, "base model friction (overrides --fits)");
  sub->add_option("--eps", a.eps, "base model restitution (overrides --fits)");
  sub->add_option("--restarts", a.restarts, "GP optimizer starts")->capture_default_str();
  sub->add_option("--max-iter", a.max_iterations, "GP optimizer iterations")->capture_default_str();
}

// Spec from the flags; validated before any data is read.
LearnedSpec build_spec(const ModelArgs& a) {
  LearnedSpec spec;
  spec.cls = parse_learned_class(a.cls);
  spec.features = parse_feature_space(a.features);
  spec.target = parse_target_space(a.target);
  if (!a.base_model.empty()) spec.base_model = parse_model_id(a.base_model);
  spec.validate();
  if (spec.base_model) {
    if (a.mu.has_value() != a.eps.has_value()) throw InvalidInput("--mu and --eps go together");
    if (a.mu) {
      spec.base_params = {*a.mu, *a.eps};
    } else if (!a.fits.empty()) {
      const auto params = fit_params(fits_from_json(read_text(a.fits)));
      const auto it = params.find(*spec.base_model);
      if (it == params.end()) {
        throw InvalidInput(a.fits + " has no fit for " + std::string(to_string(*spec.base_model)));
      }
      spec.base_params = it->second;
    } else {
      throw InvalidInput("reinforced classes need base parameters: pass --fits or --mu and --eps");
    }
    spec.base_params.validate(spec.bounds.mu_hi);
  }
  return spec;
}

ojson spec_config(const ModelArgs& a, const LearnedSpec& spec) {
  ojson j = {{"class", a.cls}, {"features", a.features}, {"target", a.target}};
  if (spec.base_model) {
    j["base_model"] = std::string(to_string(*spec.base_model));
    j["base_mu"] = spec.base_params.mu;
    j["base_eps"] = spec.base_params.eps;
  }
  j["restarts"] = a.restarts;
  j["max_iterations"] = a.max_iterations;
  return j;
}

TrainOptions train_options(const ModelArgs& a, std::uint64_t seed, unsigned threads) {
  TrainOptions o;
  o.gp.restarts = a.restarts;
  o.gp.max_iterations = a.max_iterations;
  o.gp.seed = seed;
  o.per_trial.seed = seed;
  o.per_trial.threads = threads;
  o.threads = threads;
  if (a.restarts < 1) throw InvalidInput("--restarts must be at least 1");
  if (a.max_iterations < 0) throw InvalidInput("--max-iter must be non-negative");
  return o;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  ModelArgs model;
  std::string data;
  std::string out;
  double split = 0.7;
  std::uint64_t seed = 0;
};

void check_fraction(double f, bool allow_zero) {
  if (!(f <= 1.0 && (f > 0.0 || (allow_zero && f == 0.0)))) {
    throw InvalidInput("--split must be a train fraction in " + std::string(allow_zero ? "[0, 1]" : "(0, 1)"));
  }
}

int run_train(const TrainArgs& a, const Common& common) {
  const LearnedSpec spec = build_spec(a.model);
  check_fraction(a.split, true);
  const TrainOptions options = train_options(a.model, a.seed, common.threads);
  const Dataset data = load_checked(a.data);

  RunManifest m = start("train", common, a.seed);
  Dataset train;
  if (a.split == 1.0) {
    train = data;
  } else if (a.split > 0.0) {
    train = select(data, stratified_split(data, a.split, a.seed).train);
  }
  const LearnedContactModel model = train_learned_model(spec, train, options);
  cli::write_file_atomic(a.out, model.to_json() + "\n");

  m.config = spec_config(a.model, spec);
  m.config["split"] = a.split;
  m.config["train_size"] = train.size();
  m.inputs.push_back(a.data);
  if (!a.model.fits.empty() && !a.model.mu) m.inputs.push_back(a.model.fits);
  m.outputs.push_back(a.out);
  finish(m);
  std::cout << "trained " << spec.describe() << " on " << train.size() << " trials -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string fits;
  std::vector<std::string> models;
  double split = 0.7;
  std::uint64_t seed = 0;
  std::string metric = "linear-normalized";
  std::string out;
  std::string kde_dir;
};

std::string kde_file_name(const std::string& model) {
  std::string s = "kde_" + model + ".csv";
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

int run_eval(const EvalArgs& a, const Common& common) {
  check_fraction(a.split, false);
  const ErrorMetric metric = ErrorMetric::parse(a.metric);

  // Model list: analytical names, the two reference rows, or learned model
  // files given as path or name=path. Default: everything in --fits plus the
  // reference rows.
  EvalInputs inputs;
  inputs.best_post_hoc = inputs.irb_bound = a.models.empty();
  ModelParamMap fitted;
  if (!a.fits.empty()) fitted = fit_params(fits_from_json(read_text(a.fits)));
  std::vector<std::pair<std::string, fs::path>> learned_files;
  if (a.models.empty()) inputs.analytical = fitted;
  for (const std::string& item : a.models) {
    if (item == "best-post-hoc") {
      inputs.best_post_hoc = true;
    } else if (item == "irb-bound") {
      inputs.irb_bound = true;
    } else if (item == "all") {
      inputs.analytical = fitted;
    } else if (const auto eq = item.find('='); eq != std::string::npos) {
      learned_files.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    } else if (fs::path(item).extension() == ".json") {
      learned_files.emplace_back(fs::path(item).stem().string(), item);
    } else {
      const ModelId id = parse_model_id(item);
      const auto it = fitted.find(id);
      if (it == fitted.end()) {
        throw InvalidInput("model '" + item + "' has no identified parameters; pass --fits");
      }
      inputs.analytical[id] = it->second;
    }
  }
  if (inputs.best_post_hoc && inputs.analytical.empty()) {
    throw InvalidInput("best-post-hoc needs analytical models with identified parameters (--fits)");
  }

  std::vector<LearnedContactModel> learned;
  learned.reserve(learned_files.size());
  for (const auto& [name, path] : learned_files) {
    if (!fs::exists(path)) throw InvalidInput("missing model file " + path.string());
    learned.push_back(LearnedContactModel::load(path));
  }
  for (std::size_t i = 0; i < learned.size(); ++i) inputs.learned.push_back({learned_files[i].first, &learned[i]});

  const Dataset data = load_checked(a.data);
  RunManifest m = start("eval", common, a.seed);
  const Split split = stratified_split(data, a.split, a.seed);
  EvalReport report = evaluate_models(data, split, inputs, metric, common.threads);
  report.dataset = fs::path(a.data).filename().string();

  cli::write_file_atomic(a.out, report_to_json(report) + "\n");
  m.outputs.push_back(a.out);
  if (!a.kde_dir.empty()) {
    for (const ModelRow& row : report.rows) {
      if (row.errors.kde.x.empty()) continue;
      std::ostringstream s;
      write_kde_csv(s, row.errors.kde);
      const fs::path p = fs::path(a.kde_dir) / kde_file_name(row.name);
      cli::write_file_atomic(p, s.str());
      m.outputs.push_back(p);
    }
  }
  m.config = {{"models", a.models}, {"split", a.split}, {"metric", metric.describe()}};
  m.inputs.push_back(a.data);
  if (!a.fits.empty()) m.inputs.push_back(a.fits);
  for (const auto& [name, path] : learned_files) m.inputs.push_back(path);
  finish(m);

  std::cout << "model                     mean      median    std\n";
  for (const ModelRow& row : report.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s  %-8.4f  %-8.4f  %-8.4f\n", row.name.c_str(), row.errors.mean,
                  row.errors.median, row.errors.std);
    std::cout << buf;
  }
  if (inputs.irb_bound && !inputs.analytical.empty()) {
    std::cout << "dominance (irb <= best post hoc <= analytical): "
              << (report.dominance_holds ? "holds" : "VIOLATED") << '\n';
  }
  if (!report.dominance_holds) {
    throw InvariantFailure(std::to_string(report.dominance_violations) + " trials violate the dominance chain");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveArgs {
  ModelArgs model;
  std::string data;
  std::string sizes;
  std::size_t repeats = 2;
  double split = 0.7;
  std::uint64_t seed = 0;
  std::string metric = "linear-normalized";
  std::string out;
};

int run_curve(const CurveArgs& a, const Common& common) {
  const LearnedSpec spec = build_spec(a.model);
  check_fraction(a.split, false);
  const ErrorMetric metric = ErrorMetric::parse(a.metric);
  CurveOptions options;
  options.sizes = parse_sizes(a.sizes);
  options.repeats = a.repeats;
  options.seed = a.seed;
  options.metric = metric;
  options.train = train_options(a.model, a.seed, common.threads);
  if (a.repeats < 1) throw InvalidInput("--repeats must be at least 1");

  const Dataset data = load_checked(a.data);
  RunManifest m = start("curve", common, a.seed);
  const Split split = stratified_split(data, a.split, a.seed);
  LearningCurve curve = learning_curve(data, split, spec, options);
  std::ostringstream s;
  write_curve_csv(s, curve);
  cli::write_file_atomic(a.out, s.str());

  m.config = spec_config(a.model, spec);
  m.config["sizes"] = options.sizes;
  m.config["repeats"] = a.repeats;
  m.config["split"] = a.split;
  m.config["metric"] = metric.describe();
  m.inputs.push_back(a.data);
  if (!a.model.fits.empty() && !a.model.mu) m.inputs.push_back(a.model.fits);
  m.outputs.push_back(a.out);
  finish(m);
  std::cout << curve.model << ": final error " << curve.mean.back() << ", plateau at "
            << plateau_size(curve) << " samples -> " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string eval;
  std::string fits;
  std::vector<std::string> curves;
  std::string out;
};

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

int run_report(const ReportArgs& a, const Common& common) {
  if (a.eval.empty() && a.fits.empty() && a.curves.empty()) {
    throw InvalidInput("report needs at least one of --eval, --fits, --curve");
  }
  RunManifest m = start("report", common, 0);
  const fs::path dir(a.out);
  std::ostringstream md;
  md << "# impactlab report\n";

  if (!a.fits.empty()) {
    const auto fits = fits_from_json(read_text(a.fits));
    md << "\n## Identified parameters\n\n| model | k | m | mu | eps |\n|---|---|---|---|---|\n";
    for (const FitResult& f : fits) {
      md << "| " << display_name(f.model) << " | " << f.k << " | " << f.m << " | " << fixed(f.mean.mu, 3)
         << " ± " << fixed(f.std_mu, 3) << " | " << fixed(f.mean.eps, 3) << " ± " << fixed(f.std_eps, 3)
         << " |\n";
    }
    m.inputs.push_back(a.fits);
  }

  if (!a.eval.empty()) {
    ojson j;
    try {
      j = ojson::parse(read_text(a.eval));
      if (j.at("format") != "impactlab-eval-report") throw DataError(a.eval + " is not an eval report");
    } catch (const ojson::exception& e) {
      throw DataError(a.eval + ": " + e.what());
    }
    md << "\n## Prediction error (" << j.at("metric").get<std::string>() << ")\n\n"
       << "Dataset " << j.at("dataset").get<std::string>() << ", " << j.at("dataset_size").get<std::size_t>()
       << " trials; " << j.at("split").at("description").get<std::string>() << ".\n\n"
       << "| model | kind | n | mean | median | std |\n|---|---|---|---|---|---|\n";
    for (const auto& row : j.at("models")) {
      const auto& e = row.at("errors");
      const std::string name = row.at("name").get<std::string>();
      md << "| " << name << " | " << row.at("kind").get<std::string>() << " | " << e.at("n").get<std::size_t>()
         << " | " << fixed(e.at("mean").get<double>()) << " | " << fixed(e.at("median").get<double>()) << " | "
         << fixed(e.at("std").get<double>()) << " |\n";
      const auto& kde = e.at("kde");
      if (kde.at("x").empty()) continue;
      std::ostringstream csv;
      csv << "x,density\n";
      for (std::size_t i = 0; i < kde.at("x").size(); ++i) {
        csv << kde.at("x")[i].dump() << ',' << kde.at("density")[i].dump() << '\n';
      }
      const fs::path p = dir / kde_file_name(name);
      cli::write_file_atomic(p, csv.str());
      m.outputs.push_back(p);
    }
    const auto& dom = j.at("dominance");
    md << "\nDominance chain (IRB ≤ Best Post Hoc ≤ analytical): "
       << (dom.at("holds").get<bool>() ? "holds" : "violated on " + dom.at("violations").dump() + " trials")
       << ".\n";
    m.inputs.push_back(a.eval);
  }

  if (!a.curves.empty()) {
    md << "\n## Learning curves\n";
    for (const std::string& path : a.curves) {
      std::ifstream in(path);
      if (!in) throw DataError("cannot read " + path);
      LearningCurve curve;
      curve.model = fs::path(path).stem().string();
      std::string line;
      std::getline(in, line);
      if (line.rfind("size,mean,std", 0) != 0) throw DataError(path + ": not a learning-curve CSV");
      while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string a0, a1, a2;
        if (!std::getline(ss, a0, ',') || !std::getline(ss, a1, ',') || !std::getline(ss, a2, ',')) continue;
        curve.sizes.push_back(std::stoull(a0));
        curve.mean.push_back(std::stod(a1));
        curve.std.push_back(std::stod(a2));
      }
      if (curve.sizes.empty()) throw DataError(path + ": empty learning curve");
      md << "\n### " << curve.model << "\n\nFinal mean error " << fixed(curve.mean.back())
         << " at " << curve.sizes.back() << " samples; plateau at " << plateau_size(curve) << " samples.\n";
      m.inputs.push_back(path);
    }
  }

  const fs::path summary = dir / "summary.md";
  cli::write_file_atomic(summary, md.str());
  m.outputs.insert(m.outputs.begin(), summary);
  m.config = {{"eval", !a.eval.empty()}, {"fits", !a.fits.empty()}, {"curves", a.curves.size()}};
  finish(m);
  std::cout << "wrote " << summary.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar rigid-body impact modeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IMPACTLAB_VERSION);
  Common common;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    // thread count never changes results; keep it out of the manifest
    if (arg == "--threads") {
      ++i;
      continue;
    }
    if (arg.rfind("--threads=", 0) == 0) continue;
    common.argv.push_back(arg);
  }
  app.add_option("--threads", common.threads, "worker threads (default: IMPACTLAB_THREADS or all cores)");
  app.fallthrough();

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic impact dataset");
  g->add_option("config", gen.config, "TOML (or .json) generator config");
  g->add_option("--out", gen.out, "dataset file (.csv or .json)")->required();
  g->add_option("--seed", gen.seed, "override the config seed");
  g->add_option("--n", gen.n, "override the number of trials");

  IdentifyArgs ident;
  auto* id = app.add_subcommand("identify", "fit analytical model parameters by bootstrap");
  id->add_option("--model", ident.model, "model name, comma list, or 'all'")->capture_default_str();
  id->add_option("--data", ident.data, "dataset file")->required();
  id->add_option("--k", ident.k, "trials per fit")->capture_default_str();
  id->add_option("--m", ident.m, "bootstrap iterations")->capture_default_str();
  id->add_option("--seed", ident.seed)->capture_default_str();
  id->add_option("--out", ident.out, "FitResult JSON")->required();
  id->add_option("--surface", ident.surface, "objective surface CSV (single model)");
  id->add_option("--mu-max", ident.mu_max, "upper friction bound")->capture_default_str();
  id->add_option("--grid", ident.grid, "grid points per parameter")->capture_default_str();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "train a learned contact model");
  add_model_options(tr, train.model);
  tr->add_option("--data", train.data, "dataset file")->required();
  tr->add_option("--out", train.out, "model file (.json)")->required();
  tr->add_option("--split", train.split, "train fraction of the stratified split (0 = empty)")
      ->capture_default_str();
  tr->add_option("--seed", train.seed)->capture_default_str();

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "compare models on the held-out split");
  ev->add_option("--data", eval.data, "dataset file")->required();
  ev->add_option("--fits", eval.fits, "identify output for the analytical models");
  ev->add_option("--models", eval.models,
                 "analytical names, all, best-post-hoc, irb-bound, or learned model files [name=]path")
      ->delimiter(',');
  ev->add_option("--split", eval.split, "train fraction of the stratified split")->capture_default_str();
  ev->add_option("--seed", eval.seed)->capture_default_str();
  ev->add_option("--metric", eval.metric, "linear | scaled, optionally -normalized")->capture_default_str();
  ev->add_option("--out", eval.out, "EvalReport JSON")->required();
  ev->add_option("--kde-dir", eval.kde_dir, "also write one KDE CSV per model here");

  CurveArgs curve;
  auto* cu = app.add_subcommand("curve", "learning curve of a learned model class");
  add_model_options(cu, curve.model);
  cu->add_option("--data", curve.data, "dataset file")->required();
  cu->add_option("--sizes", curve.sizes, "a:b:step or comma list")->required();
  cu->add_option("--repeats", curve.repeats)->capture_default_str();
  cu->add_option("--split", curve.split, "train fraction of the stratified split")->capture_default_str();
  cu->add_option("--seed", curve.seed)->capture_default_str();
  cu->add_option("--metric", curve.metric)->capture_default_str();
  cu->add_option("--out", curve.out, "curve CSV")->required();

  ReportArgs report;
  auto* re = app.add_subcommand("report", "summarize fits, evaluations and curves");
  re->add_option("--eval", report.eval, "EvalReport JSON");
  re->add_option("--fits", report.fits, "identify output");
  re->add_option("--curve", report.curves, "learning-curve CSV (repeatable)");
  re->add_option("--out", report.out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_gen(gen, common);
    if (*id) return run_identify(ident, common);
    if (*tr) return run_train(train, common);
    if (*ev) return run_eval(eval, common);
    if (*cu) return run_curve(curve, common);
    if (*re) return run_report(report, common);
  } catch (const InvariantFailure& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
