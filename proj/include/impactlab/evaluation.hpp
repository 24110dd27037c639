#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impactlab/learned.hpp"
#include "impactlab/metrics.hpp"
#include "impactlab/models.hpp"

namespace impactlab {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;  // indices into the dataset, ascending
  std::vector<std::size_t> eval;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;

  std::string describe() const;
};

/// Angle between the incident contact velocity and the surface normal, rad.
double incidence_angle(const ImpactTrial& trial);

/// Train/eval split stratified by incidence-angle quartile: each quartile
/// contributes round(fraction * size) trials to the training side.
Split stratified_split(std::span<const ImpactTrial> dataset, double train_fraction = 0.7,
                       std::uint64_t seed = 0);

std::vector<ImpactTrial> select(std::span<const ImpactTrial> dataset,
                                std::span<const std::size_t> index);

// ---------------------------------------------------------------------------
// Error distributions
// ---------------------------------------------------------------------------

struct KdeCurve {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  /// All samples (nearly) equal: the density is a single spike on the grid.
  bool degenerate = false;
};

/// 0.9 min(sd, IQR / 1.34) n^(-1/5); 0 for degenerate samples.
double silverman_bandwidth(std::span<const double> samples);

/// Evenly spaced grid covering the samples plus three bandwidths each side.
std::vector<double> default_kde_grid(std::span<const double> samples, std::size_t points = 256);

/// Gaussian-kernel density on `grid`, renormalized to unit trapezoid area.
/// Needs at least two samples and an increasing grid of at least two points.
KdeCurve kde_pdf(std::span<const double> samples, std::span<const double> grid);

struct ErrorSummary {
  std::vector<double> samples;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  KdeCurve kde;
};

/// Order-independent summary: the mean is accumulated over sorted samples.
ErrorSummary summarize(std::vector<double> samples, bool with_kde = true);

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

enum class RowKind { Analytical, BestPostHoc, IrbBound, Learned };
const char* to_string(RowKind kind);

struct ModelRow {
  std::string name;
  RowKind kind = RowKind::Analytical;
  ErrorSummary errors;
  std::optional<ModelParams> params;
  std::string spec;  // learned model description
  std::size_t infeasible = 0;
};

struct NamedLearnedModel {
  std::string name;
  const LearnedContactModel* model = nullptr;
};

struct EvalInputs {
  ModelParamMap analytical;
  std::vector<NamedLearnedModel> learned;
  bool best_post_hoc = true;
  bool irb_bound = true;
};

struct EvalReport {
  std::string dataset;
  std::size_t dataset_size = 0;
  Split split;
  ErrorMetric metric;
  std::vector<ModelRow> rows;
  /// Per trial: IRB <= Best Post Hoc <= every analytical model.
  bool dominance_holds = true;
  std::size_t dominance_violations = 0;

  const ModelRow* find(const std::string& name) const;
};

/// Evaluate every requested model on the eval side of the split. Throws
/// DataError if a learned model was trained on an evaluation trial.
EvalReport evaluate_models(std::span<const ImpactTrial> dataset, const Split& split,
                           const EvalInputs& inputs, const ErrorMetric& metric = {},
                           unsigned threads = 0);

std::string report_to_json(const EvalReport& report);

/// "x,density" rows.
void write_kde_csv(std::ostream& out, const KdeCurve& curve);

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

struct LearningCurve {
  std::string model;
  std::vector<std::size_t> sizes;
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t repeats = 1;
  std::vector<std::vector<double>> per_repeat;  // [size][repeat]
};

struct CurveOptions {
  std::vector<std::size_t> sizes;
  std::size_t repeats = 2;
  std::uint64_t seed = 0;
  TrainOptions train;
  ErrorMetric metric;
};

/// Held-out error vs training-set size. The eval side of the split is fixed;
/// each (size, repeat) trains on a fresh without-replacement subset of the
/// training side.
LearningCurve learning_curve(std::span<const ImpactTrial> dataset, const Split& split,
                             const LearnedSpec& spec, const CurveOptions& options);

/// Smallest size after which every successive improvement of the mean curve
/// is below `fraction` of the final error. Returns the last size if the
/// curve never settles.
std::size_t plateau_size(const LearningCurve& curve, double fraction = 0.05);

/// "a:b:step" (inclusive of b when it lands on the step) or a comma list.
std::vector<std::size_t> parse_sizes(const std::string& text);

/// "size,mean,std" rows.
void write_curve_csv(std::ostream& out, const LearningCurve& curve);

}  // namespace impactlab
