#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "impactlab/gp.hpp"
#include "impactlab/identification.hpp"
#include "impactlab/models.hpp"

namespace impactlab {

/// XFull: (m, I, r_x, r_y, x, y, theta, xdot, ydot, thetadot)
/// X1:    (M_c11, M_c12, M_c22, v_ct, v_cn)
/// X2:    M_c v_c
enum class FeatureSpaceId { XFull, X1, X2 };
/// Y1: (P_t, P_n); Y2: (P_t, P_n, tau)
enum class TargetSpaceId { Y1, Y2 };

enum class LearnedClass {
  DataDrivenRigid,     // features -> impulse
  DataDriven,          // features -> wrench
  ReinforcedResidual,  // analytical model + learned residual
  ReinforcedParam,     // analytical model at learned (mu, eps)
};

std::string_view to_string(FeatureSpaceId id);
std::string_view to_string(TargetSpaceId id);
std::string_view to_string(LearnedClass c);
FeatureSpaceId parse_feature_space(std::string_view text);
TargetSpaceId parse_target_space(std::string_view text);
LearnedClass parse_learned_class(std::string_view text);

int feature_dim(FeatureSpaceId id);
int target_dim(TargetSpaceId id);

Eigen::VectorXd extract_features(FeatureSpaceId space, const BodyParams& body,
                                 const ContactGeometry& contact, const PlanarState& pre);

struct LearnedSpec {
  LearnedClass cls = LearnedClass::DataDrivenRigid;
  FeatureSpaceId features = FeatureSpaceId::X1;
  TargetSpaceId target = TargetSpaceId::Y1;
  std::optional<ModelId> base_model;
  ModelParams base_params;
  /// Clamp for ReinforcedParam outputs.
  ParamBounds bounds;

  /// Throws InvalidInput with an explanation for invalid combinations.
  void validate() const;
  /// Number of GP outputs: target dim, or 2 (mu, eps) for ReinforcedParam.
  int output_dim() const;
  std::string describe() const;
};

struct LearnedPrediction {
  Vec3 v_post = Vec3::Zero();
  /// Predicted contact wrench; tau = 0 for impulse-target classes.
  Wrench3 wrench;
  /// Parameters used by the analytical model (ReinforcedParam only).
  std::optional<ModelParams> params;
  /// Physical plausibility: impulse inside the admissible part of the energy
  /// ellipse (Y1), or no energy gain and no penetration (Y2). Learned models
  /// may violate this; it is reported, not enforced.
  bool feasible = true;
};

struct TrainOptions {
  GpFitOptions gp;
  /// Per-trial identification settings for ReinforcedParam.
  FitConfig per_trial;
  unsigned threads = 0;
};

/// Features and targets for a set of trials, in trial order.
struct TrainingData {
  Eigen::MatrixXd inputs;   // N x feature dim
  Eigen::MatrixXd targets;  // N x output dim
  std::vector<std::uint64_t> trial_ids;

  TrainingData rows(std::span<const std::size_t> index) const;
};

TrainingData build_training_data(const LearnedSpec& spec, std::span<const ImpactTrial> trials,
                                 const TrainOptions& options = {});

class LearnedContactModel {
 public:
  LearnedContactModel() = default;
  LearnedContactModel(LearnedSpec spec, std::vector<GpRegressor> gps,
                      std::vector<std::uint64_t> training_ids);

  const LearnedSpec& spec() const { return spec_; }
  const std::vector<GpRegressor>& gps() const { return gps_; }
  const std::vector<std::uint64_t>& training_ids() const { return training_ids_; }

  LearnedPrediction predict(const BodyParams& body, const ContactGeometry& contact,
                            const PlanarState& pre) const;

  std::string to_json() const;
  static LearnedContactModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LearnedContactModel load(const std::filesystem::path& path);

 private:
  LearnedSpec spec_;
  std::vector<GpRegressor> gps_;
  std::vector<std::uint64_t> training_ids_;
};

LearnedContactModel train_learned_model(const LearnedSpec& spec, std::span<const ImpactTrial> trials,
                                        const TrainOptions& options = {});
LearnedContactModel train_from_data(const LearnedSpec& spec, const TrainingData& data,
                                    const TrainOptions& options = {});

LearnedPrediction predict_learned(const LearnedContactModel& model, const BodyParams& body,
                                  const ContactGeometry& contact, const PlanarState& pre);

}  // namespace impactlab
