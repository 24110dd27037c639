#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "impactlab/dynamics.hpp"
#include "impactlab/metrics.hpp"

namespace impactlab {

/// The six two-parameter rigid contact models. Enumeration order is the
/// tie-breaking order used by best_post_hoc.
enum class ModelId { APNewton, APPoisson, DrumwrightShell, Mirtich, WangMason, Whittaker };

inline constexpr std::array<ModelId, 6> kAllModels = {
    ModelId::APNewton, ModelId::APPoisson, ModelId::DrumwrightShell,
    ModelId::Mirtich,  ModelId::WangMason, ModelId::Whittaker};

/// Command-line style name, e.g. "ap-newton".
std::string_view to_string(ModelId id);
/// Human-readable name, e.g. "AP Newton".
std::string_view display_name(ModelId id);
/// Accepts the names produced by to_string (case-insensitive).
ModelId parse_model_id(std::string_view text);

struct ModelParams {
  double mu = 0.0;   // friction coefficient
  double eps = 0.0;  // restitution coefficient

  static constexpr double kDefaultMuMax = 2.0;

  void validate(double mu_max = kDefaultMuMax) const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Contact-space view of an impact: the mobility J M^-1 J^T and the incident
/// contact velocity. Every analytical model depends on the impact only
/// through these two quantities.
struct ContactProblem {
  Mat2 mobility;
  Vec2 velocity;

  static ContactProblem from(const BodyParams& body, const ContactGeometry& contact,
                             const Vec3& v_pre);
};

/// Impulse selected by `model`, in contact coordinates. Throws NoImpact when
/// the contact is not approaching (v_n >= 0).
Vec2 predict_contact_impulse(ModelId model, const ModelParams& params,
                             const ContactProblem& problem);

Impulse2 predict_impulse(ModelId model, const ModelParams& params, const BodyParams& body,
                         const ContactGeometry& contact, const Vec3& v_pre);

Vec3 predict_post_velocity(ModelId model, const ModelParams& params, const BodyParams& body,
                           const ContactGeometry& contact, const Vec3& v_pre);

using ModelParamMap = std::map<ModelId, ModelParams>;

struct PostHocChoice {
  ModelId model = ModelId::APNewton;
  double error = 0.0;
};

struct BestPostHocResult {
  std::vector<PostHocChoice> per_trial;
  /// errors[model index][trial]
  std::vector<std::vector<double>> model_errors;
  std::vector<ModelId> models;
  double mean_error = 0.0;
};

/// Per trial, the identified model with the smallest velocity error. Exact
/// ties go to the earlier ModelId. Throws InvalidInput on empty input.
BestPostHocResult best_post_hoc(std::span<const ImpactTrial> trials, const ModelParamMap& params,
                                const ErrorMetric& metric = {});

struct IrbOptions {
  ErrorMetric metric;
  /// Restrict the impulse to the admissible part of the energy ellipse. When
  /// false, the plain least-squares impulse is returned.
  bool constrained = true;
};

struct IrbResult {
  Impulse2 impulse;
  double error = 0.0;
};

/// Best admissible rigid impulse for a recorded trial under `options.metric`.
IrbResult irb_bound(const ImpactTrial& trial, const IrbOptions& options = {});

}  // namespace impactlab
