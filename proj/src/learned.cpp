#include "impactlab/learned.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "impactlab/parallel.hpp"

namespace impactlab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

constexpr const char* kFormat = "impactlab-learned-model";
constexpr int kVersion = 1;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  return out;
}

bool is_reinforced(LearnedClass c) {
  return c == LearnedClass::ReinforcedResidual || c == LearnedClass::ReinforcedParam;
}

Wrench3 base_wrench(const LearnedSpec& spec, const BodyParams& body, const ContactGeometry& contact,
                    const Vec3& v_pre) {
  const Impulse2 p = predict_impulse(*spec.base_model, spec.base_params, body, contact, v_pre);
  return {p.t, p.n, 0.0};
}

bool impulse_feasible(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                      const Impulse2& p) {
  try {
    return is_admissible(EnergyEllipse(body, contact, v_pre), p);
  } catch (const DegenerateInput&) {
    return false;
  }
}

bool wrench_feasible(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                     const Vec3& v_post) {
  const Mat3 m = inertia_matrix(body);
  const double e0 = v_pre.dot(m * v_pre);
  const double e1 = v_post.dot(m * v_post);
  const double scale = std::max(e0, 1e-300);
  const Vec2 vc = contact_velocity(contact, v_pre);
  return e1 <= e0 + EnergyEllipse::kDefaultTolerance * scale &&
         contact_velocity(contact, v_post).y() >= -EnergyEllipse::kDefaultTolerance * vc.norm();
}

json vector_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd json_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json gp_json(const GpRegressor& gp) {
  const GpHyperparams& hp = gp.standardized_hyperparams();
  json rows = json::array();
  for (Eigen::Index i = 0; i < gp.inputs().rows(); ++i) {
    rows.push_back(vector_json(gp.inputs().row(i).transpose()));
  }
  return {{"signal_std", hp.signal_std},
          {"length_scales", vector_json(hp.length_scales)},
          {"noise_std", hp.noise_std},
          {"offset", gp.offset()},
          {"scale", gp.scale()},
          {"inputs", rows},
          {"targets", vector_json(gp.targets())}};
}

GpRegressor json_gp(const json& j, int feature_dim) {
  GpHyperparams hp;
  hp.signal_std = j.at("signal_std").get<double>();
  hp.length_scales = json_vector(j.at("length_scales"));
  hp.noise_std = j.at("noise_std").get<double>();
  const VectorXd y = json_vector(j.at("targets"));
  const json& rows = j.at("inputs");
  if (rows.size() != static_cast<std::size_t>(y.size())) {
    throw DataError("model file: GP inputs and targets differ in length");
  }
  MatrixXd x(y.size(), feature_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const VectorXd r = json_vector(rows[i]);
    if (r.size() != feature_dim) throw DataError("model file: GP input row has the wrong dimension");
    x.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return GpRegressor::restore(x, y, hp, j.at("offset").get<double>(), j.at("scale").get<double>());
}

}  // namespace

std::string_view to_string(FeatureSpaceId id) {
  switch (id) {
    case FeatureSpaceId::XFull: return "x-full";
    case FeatureSpaceId::X1: return "x1";
    case FeatureSpaceId::X2: return "x2";
  }
  return "?";
}

std::string_view to_string(TargetSpaceId id) { return id == TargetSpaceId::Y1 ? "y1" : "y2"; }

std::string_view to_string(LearnedClass c) {
  switch (c) {
    case LearnedClass::DataDrivenRigid: return "data-driven-rigid";
    case LearnedClass::DataDriven: return "data-driven";
    case LearnedClass::ReinforcedResidual: return "reinforced-residual";
    case LearnedClass::ReinforcedParam: return "reinforced-param";
  }
  return "?";
}

FeatureSpaceId parse_feature_space(std::string_view text) {
  const std::string s = lower(text);
  if (s == "x-full" || s == "xfull" || s == "x") return FeatureSpaceId::XFull;
  if (s == "x1") return FeatureSpaceId::X1;
  if (s == "x2") return FeatureSpaceId::X2;
  throw InvalidInput("unknown feature space '" + std::string(text) + "' (x-full, x1, x2)");
}

TargetSpaceId parse_target_space(std::string_view text) {
  const std::string s = lower(text);
  if (s == "y1") return TargetSpaceId::Y1;
  if (s == "y2") return TargetSpaceId::Y2;
  throw InvalidInput("unknown target space '" + std::string(text) + "' (y1, y2)");
}

LearnedClass parse_learned_class(std::string_view text) {
  const std::string s = lower(text);
  for (LearnedClass c : {LearnedClass::DataDrivenRigid, LearnedClass::DataDriven,
                         LearnedClass::ReinforcedResidual, LearnedClass::ReinforcedParam}) {
    if (s == to_string(c)) return c;
  }
  throw InvalidInput("unknown model class '" + std::string(text) +
                     "' (data-driven-rigid, data-driven, reinforced-residual, reinforced-param)");
}

int feature_dim(FeatureSpaceId id) {
  switch (id) {
    case FeatureSpaceId::XFull: return 10;
    case FeatureSpaceId::X1: return 5;
    case FeatureSpaceId::X2: return 2;
  }
  return 0;
}

int target_dim(TargetSpaceId id) { return id == TargetSpaceId::Y1 ? 2 : 3; }

VectorXd extract_features(FeatureSpaceId space, const BodyParams& body,
                          const ContactGeometry& contact, const PlanarState& pre) {
  VectorXd f(feature_dim(space));
  if (space == FeatureSpaceId::XFull) {
    f << body.mass, body.inertia, contact.r.x(), contact.r.y(), pre.q, pre.v;
    return f;
  }
  const Mat2 mc = effective_contact_inertia(body, contact);
  const Vec2 vc = contact_velocity(contact, pre.v);
  if (space == FeatureSpaceId::X1) {
    f << mc(0, 0), mc(0, 1), mc(1, 1), vc.x(), vc.y();
  } else {
    f << mc * vc;
  }
  return f;
}

void LearnedSpec::validate() const {
  switch (cls) {
    case LearnedClass::DataDrivenRigid:
      if (target != TargetSpaceId::Y1) {
        throw InvalidInput("data-driven-rigid predicts a contact impulse: use target y1");
      }
      break;
    case LearnedClass::DataDriven:
      if (target != TargetSpaceId::Y2) {
        throw InvalidInput("data-driven predicts a contact wrench: use target y2");
      }
      break;
    case LearnedClass::ReinforcedParam:
      if (target != TargetSpaceId::Y1) {
        throw InvalidInput("reinforced-param drives a rigid model: use target y1");
      }
      break;
    case LearnedClass::ReinforcedResidual:
      break;
  }
  if (is_reinforced(cls)) {
    if (!base_model) throw InvalidInput(std::string(to_string(cls)) + " needs a base model");
    base_params.validate(bounds.mu_hi);
  } else if (base_model) {
    throw InvalidInput(std::string(to_string(cls)) + " does not take a base model");
  }
  bounds.validate();
}

int LearnedSpec::output_dim() const {
  return cls == LearnedClass::ReinforcedParam ? 2 : target_dim(target);
}

std::string LearnedSpec::describe() const {
  std::string s = std::string(to_string(cls)) + "/" + std::string(to_string(features)) + "/" +
                  std::string(to_string(target));
  if (base_model) s += "/" + std::string(to_string(*base_model));
  return s;
}

TrainingData TrainingData::rows(std::span<const std::size_t> index) const {
  TrainingData out;
  out.inputs.resize(static_cast<Eigen::Index>(index.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(index.size()), targets.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.inputs.row(r) = inputs.row(static_cast<Eigen::Index>(index[i]));
    out.targets.row(r) = targets.row(static_cast<Eigen::Index>(index[i]));
    out.trial_ids.push_back(trial_ids.at(index[i]));
  }
  return out;
}

TrainingData build_training_data(const LearnedSpec& spec, std::span<const ImpactTrial> trials,
                                 const TrainOptions& options) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(trials.size());
  TrainingData data;
  data.inputs.resize(n, feature_dim(spec.features));
  data.targets.resize(n, spec.output_dim());

  std::vector<PerTrialFit> per_trial;
  if (spec.cls == LearnedClass::ReinforcedParam && !trials.empty()) {
    FitConfig cfg = options.per_trial;
    cfg.bounds = spec.bounds;
    cfg.threads = options.threads;
    per_trial = fit_per_trial(*spec.base_model, trials, cfg);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const ImpactTrial& t = trials[static_cast<std::size_t>(i)];
    data.trial_ids.push_back(t.id);
    data.inputs.row(i) = extract_features(spec.features, t.body, t.contact, t.pre).transpose();
    switch (spec.cls) {
      case LearnedClass::DataDrivenRigid:
        data.targets.row(i) = measured_impulse(t).vec().transpose();
        break;
      case LearnedClass::DataDriven:
        data.targets.row(i) = measured_wrench(t).vec().transpose();
        break;
      case LearnedClass::ReinforcedResidual: {
        const Wrench3 base = base_wrench(spec, t.body, t.contact, t.pre.v);
        if (spec.target == TargetSpaceId::Y1) {
          data.targets.row(i) = (measured_impulse(t).vec() - base.linear().vec()).transpose();
        } else {
          data.targets.row(i) = (measured_wrench(t).vec() - base.vec()).transpose();
        }
        break;
      }
      case LearnedClass::ReinforcedParam: {
        const ModelParams& p = per_trial[static_cast<std::size_t>(i)].params;
        data.targets.row(i) << p.mu, p.eps;
        break;
      }
    }
  }
  return data;
}

LearnedContactModel::LearnedContactModel(LearnedSpec spec, std::vector<GpRegressor> gps,
                                         std::vector<std::uint64_t> training_ids)
    : spec_(std::move(spec)), gps_(std::move(gps)), training_ids_(std::move(training_ids)) {
  spec_.validate();
  if (gps_.size() != static_cast<std::size_t>(spec_.output_dim())) {
    throw InvalidInput("learned model needs one GP per output dimension");
  }
  for (const GpRegressor& gp : gps_) {
    if (gp.dim() != feature_dim(spec_.features)) {
      throw InvalidInput("GP input dimension does not match the feature space");
    }
  }
}

LearnedContactModel train_from_data(const LearnedSpec& spec, const TrainingData& data,
                                    const TrainOptions& options) {
  spec.validate();
  const int outputs = spec.output_dim();
  if (data.inputs.cols() != feature_dim(spec.features) || data.targets.cols() != outputs) {
    throw InvalidInput("training data does not match the model specification");
  }
  std::vector<GpRegressor> gps(static_cast<std::size_t>(outputs));
  parallel_for(
      gps.size(),
      [&](std::size_t k) {
        GpFitOptions gp = options.gp;
        gp.seed = options.gp.seed + 0x51ed27ULL * (k + 1);
        gp.center = spec.cls != LearnedClass::ReinforcedResidual;
        gps[k] = GpRegressor::fit(data.inputs, data.targets.col(static_cast<Eigen::Index>(k)), gp);
      },
      options.threads);
  return LearnedContactModel(spec, std::move(gps), data.trial_ids);
}

LearnedContactModel train_learned_model(const LearnedSpec& spec, std::span<const ImpactTrial> trials,
                                        const TrainOptions& options) {
  return train_from_data(spec, build_training_data(spec, trials, options), options);
}

LearnedPrediction LearnedContactModel::predict(const BodyParams& body, const ContactGeometry& contact,
                                               const PlanarState& pre) const {
  const VectorXd f = extract_features(spec_.features, body, contact, pre);
  VectorXd out(static_cast<Eigen::Index>(gps_.size()));
  for (std::size_t k = 0; k < gps_.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = gps_[k].predict_mean(f);
  }

  LearnedPrediction p;
  switch (spec_.cls) {
    case LearnedClass::DataDrivenRigid:
      p.wrench = {out[0], out[1], 0.0};
      break;
    case LearnedClass::DataDriven:
      p.wrench = {out[0], out[1], out[2]};
      break;
    case LearnedClass::ReinforcedResidual: {
      const Wrench3 base = base_wrench(spec_, body, contact, pre.v);
      p.wrench = {base.t + out[0], base.n + out[1],
                  spec_.target == TargetSpaceId::Y2 ? base.tau + out[2] : 0.0};
      break;
    }
    case LearnedClass::ReinforcedParam: {
      p.params = spec_.bounds.clamp({out[0], out[1]});
      const Impulse2 imp = predict_impulse(*spec_.base_model, *p.params, body, contact, pre.v);
      p.wrench = {imp.t, imp.n, 0.0};
      break;
    }
  }
  if (spec_.target == TargetSpaceId::Y1) {
    p.v_post = apply_impulse(body, contact, pre.v, p.wrench.linear());
    p.feasible = impulse_feasible(body, contact, pre.v, p.wrench.linear());
  } else {
    p.v_post = apply_wrench(body, contact, pre.v, p.wrench);
    p.feasible = wrench_feasible(body, contact, pre.v, p.v_post);
  }
  return p;
}

LearnedPrediction predict_learned(const LearnedContactModel& model, const BodyParams& body,
                                  const ContactGeometry& contact, const PlanarState& pre) {
  return model.predict(body, contact, pre);
}

std::string LearnedContactModel::to_json() const {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["class"] = to_string(spec_.cls);
  j["features"] = to_string(spec_.features);
  j["target"] = to_string(spec_.target);
  if (spec_.base_model) {
    j["base"] = {{"model", to_string(*spec_.base_model)},
                 {"mu", spec_.base_params.mu},
                 {"eps", spec_.base_params.eps}};
  } else {
    j["base"] = nullptr;
  }
  j["bounds"] = {{"mu", {spec_.bounds.mu_lo, spec_.bounds.mu_hi}},
                 {"eps", {spec_.bounds.eps_lo, spec_.bounds.eps_hi}}};
  j["training_ids"] = training_ids_;
  json gps = json::array();
  for (const GpRegressor& gp : gps_) gps.push_back(gp_json(gp));
  j["gps"] = gps;
  return j.dump(1);
}

LearnedContactModel LearnedContactModel::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != kFormat) throw DataError("not a learned model file");
    const int version = j.at("version").get<int>();
    if (version != kVersion) {
      throw DataError("unsupported learned model version " + std::to_string(version));
    }
    LearnedSpec spec;
    spec.cls = parse_learned_class(j.at("class").get<std::string>());
    spec.features = parse_feature_space(j.at("features").get<std::string>());
    spec.target = parse_target_space(j.at("target").get<std::string>());
    if (!j.at("base").is_null()) {
      spec.base_model = parse_model_id(j["base"].at("model").get<std::string>());
      spec.base_params = {j["base"].at("mu").get<double>(), j["base"].at("eps").get<double>()};
    }
    const auto mu = j.at("bounds").at("mu").get<std::vector<double>>();
    const auto eps = j.at("bounds").at("eps").get<std::vector<double>>();
    if (mu.size() != 2 || eps.size() != 2) throw DataError("model file: malformed bounds");
    spec.bounds = {mu[0], mu[1], eps[0], eps[1]};
    std::vector<GpRegressor> gps;
    for (const json& g : j.at("gps")) gps.push_back(json_gp(g, feature_dim(spec.features)));
    return LearnedContactModel(spec, std::move(gps),
                               j.at("training_ids").get<std::vector<std::uint64_t>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed learned model file: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("invalid learned model file: ") + e.what());
  }
}

void LearnedContactModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

LearnedContactModel LearnedContactModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace impactlab
