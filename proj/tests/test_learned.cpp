#include <doctest.h>

#include <random>

#include "impactlab/learned.hpp"
#include "support.hpp"

using namespace impactlab;

namespace {

const BodyParams kUnit{1.0, 1.0, std::nullopt};

PlanarState pre_state(const Vec3& v, const Vec3& q = Vec3::Zero()) {
  PlanarState s;
  s.q = q;
  s.v = v;
  return s;
}

Dataset base_data(ModelId id, ModelParams p, int n, std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset out;
  for (int i = 0; i < n; ++i) {
    const auto s = test::random_impact(rng);
    Vec3 post = predict_post_velocity(id, p, s.body, s.contact, s.v);
    post += noise * Vec3(g(rng), g(rng), g(rng));
    out.push_back(test::make_trial(s.body, s.contact, s.v, post, static_cast<std::uint64_t>(i)));
  }
  return out;
}

TrainOptions fast() {
  TrainOptions o;
  o.gp.restarts = 2;
  o.gp.max_iterations = 40;
  o.threads = 1;
  return o;
}

}  // namespace

TEST_CASE("feature spaces") {
  const ContactGeometry c{Vec2(0.0, -1.0)};
  const PlanarState s = pre_state(Vec3(0, -1, 0));
  Eigen::VectorXd x1(5);
  x1 << 0.5, 0.0, 1.0, 0.0, -1.0;
  CHECK((extract_features(FeatureSpaceId::X1, kUnit, c, s) - x1).norm() < 1e-15);
  Eigen::VectorXd x2(2);
  x2 << 0.0, -1.0;
  CHECK((extract_features(FeatureSpaceId::X2, kUnit, c, s) - x2).norm() < 1e-15);

  const BodyParams b{0.3, 0.02, std::nullopt};
  const ContactGeometry r{Vec2(0.01, -0.04)};
  const PlanarState full = pre_state(Vec3(0.5, -1.2, 7.0), Vec3(1.0, 0.04, 0.3));
  Eigen::VectorXd xf(10);
  xf << 0.3, 0.02, 0.01, -0.04, 1.0, 0.04, 0.3, 0.5, -1.2, 7.0;
  CHECK(extract_features(FeatureSpaceId::XFull, b, r, full) == xf);
  CHECK(feature_dim(FeatureSpaceId::XFull) == 10);
  CHECK(target_dim(TargetSpaceId::Y2) == 3);
}

TEST_CASE("names round trip") {
  for (auto c : {LearnedClass::DataDrivenRigid, LearnedClass::DataDriven, LearnedClass::ReinforcedResidual,
                 LearnedClass::ReinforcedParam}) {
    CHECK(parse_learned_class(to_string(c)) == c);
  }
  for (auto f : {FeatureSpaceId::XFull, FeatureSpaceId::X1, FeatureSpaceId::X2}) {
    CHECK(parse_feature_space(to_string(f)) == f);
  }
  CHECK(parse_target_space("y2") == TargetSpaceId::Y2);
  CHECK_THROWS_AS(parse_feature_space("x5"), InvalidInput);
}

TEST_CASE("class, target and base combinations") {
  LearnedSpec s;
  s.cls = LearnedClass::DataDrivenRigid;
  s.target = TargetSpaceId::Y2;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.cls = LearnedClass::DataDriven;
  CHECK_NOTHROW(s.validate());
  s.target = TargetSpaceId::Y1;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.cls = LearnedClass::ReinforcedResidual;
  CHECK_THROWS_AS(s.validate(), InvalidInput);  // no base
  s.base_model = ModelId::Mirtich;
  CHECK_NOTHROW(s.validate());
  s.target = TargetSpaceId::Y2;
  CHECK_NOTHROW(s.validate());
  s.cls = LearnedClass::ReinforcedParam;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.target = TargetSpaceId::Y1;
  CHECK_NOTHROW(s.validate());
  s.cls = LearnedClass::DataDrivenRigid;
  CHECK_THROWS_AS(s.validate(), InvalidInput);  // base not allowed
}

TEST_CASE("reinforced residual with no data is its base model, bit for bit") {
  std::mt19937_64 rng(31);
  for (TargetSpaceId target : {TargetSpaceId::Y1, TargetSpaceId::Y2}) {
    LearnedSpec spec{LearnedClass::ReinforcedResidual, FeatureSpaceId::X1, target, ModelId::WangMason,
                     {0.2, 0.6}};
    const LearnedContactModel m = train_learned_model(spec, Dataset{}, fast());
    for (int i = 0; i < 1000; ++i) {
      const auto s = test::random_impact(rng);
      const Vec3 want = predict_post_velocity(ModelId::WangMason, {0.2, 0.6}, s.body, s.contact, s.v);
      CHECK(m.predict(s.body, s.contact, pre_state(s.v)).v_post == want);
    }
  }
}

TEST_CASE("residual GPs learn nothing from base-model data") {
  const ModelParams p{0.3, 0.5};
  const Dataset train = base_data(ModelId::APNewton, p, 40, 4);
  const Dataset test_set = base_data(ModelId::APNewton, p, 40, 5);
  const LearnedSpec spec{LearnedClass::ReinforcedResidual, FeatureSpaceId::X1, TargetSpaceId::Y1,
                         ModelId::APNewton, p};
  const LearnedContactModel m = train_learned_model(spec, train, fast());
  for (const ImpactTrial& t : test_set) {
    const Vec3 v = m.predict(t.body, t.contact, t.pre).v_post;
    CHECK(velocity_error(t, v) <= 1e-6);
  }
}

TEST_CASE("data-driven rigid model interpolates a single trial") {
  const Dataset one = base_data(ModelId::Whittaker, {0.2, 0.5}, 1, 9);
  const LearnedSpec spec{LearnedClass::DataDrivenRigid, FeatureSpaceId::X1, TargetSpaceId::Y1};
  const LearnedContactModel m = train_learned_model(spec, one, fast());
  const Impulse2 want = measured_impulse(one[0]);
  const LearnedPrediction got = m.predict(one[0].body, one[0].contact, one[0].pre);
  const double sn = m.gps()[1].hyperparams().noise_std;
  CHECK(std::abs(got.wrench.n - want.n) <= 3.0 * sn + 1e-9);
  CHECK(got.wrench.tau == 0.0);
}

TEST_CASE("reinforced-param predictions are clamped and admissible") {
  const Dataset train = base_data(ModelId::Mirtich, {0.4, 0.6}, 30, 2, 0.05);
  LearnedSpec spec{LearnedClass::ReinforcedParam, FeatureSpaceId::X2, TargetSpaceId::Y1, ModelId::Mirtich,
                   {0.4, 0.6}};
  TrainOptions o = fast();
  o.per_trial.grid_mu = o.per_trial.grid_eps = 24;
  const LearnedContactModel m = train_learned_model(spec, train, o);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto s = test::random_impact(rng);
    const LearnedPrediction p = m.predict(s.body, s.contact, pre_state(s.v));
    REQUIRE(p.params.has_value());
    CHECK_NOTHROW(p.params->validate());
    CHECK(p.feasible);
  }
}

TEST_CASE("learned impulse predictions are checked against the ellipse") {
  // trained on heavily noisy data the raw GP impulse can leave the ellipse;
  // the flag must agree with a direct admissibility check
  const Dataset train = base_data(ModelId::APNewton, {0.3, 0.9}, 25, 6, 0.8);
  const LearnedSpec spec{LearnedClass::DataDrivenRigid, FeatureSpaceId::X2, TargetSpaceId::Y1};
  const LearnedContactModel m = train_learned_model(spec, train, fast());
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto s = test::random_impact(rng);
    const LearnedPrediction p = m.predict(s.body, s.contact, pre_state(s.v));
    const EnergyEllipse e(s.body, s.contact, s.v);
    CHECK(p.feasible == is_admissible(e, p.wrench.linear()));
  }
}

TEST_CASE("output dimensions are independent") {
  const Dataset train = base_data(ModelId::APPoisson, {0.2, 0.4}, 30, 12, 0.02);
  const LearnedSpec spec{LearnedClass::DataDriven, FeatureSpaceId::X1, TargetSpaceId::Y2};
  const TrainOptions o = fast();
  const TrainingData data = build_training_data(spec, train, o);
  const LearnedContactModel m = train_from_data(spec, data, o);
  // each output GP equals a GP fit on that column alone with the same seed
  for (std::size_t k = 0; k < 3; ++k) {
    GpFitOptions g = o.gp;
    g.seed = o.gp.seed + 0x51ed27ULL * (k + 1);
    const GpRegressor alone =
        GpRegressor::fit(data.inputs, data.targets.col(static_cast<Eigen::Index>(k)), g);
    const Eigen::VectorXd q = data.inputs.row(3).transpose() * 1.01;
    CHECK(alone.predict_mean(q) == m.gps()[k].predict_mean(q));
  }
}

TEST_CASE("model files round trip") {
  const Dataset train = base_data(ModelId::Mirtich, {0.1, 0.5}, 25, 14, 0.02);
  const LearnedSpec spec{LearnedClass::ReinforcedResidual, FeatureSpaceId::XFull, TargetSpaceId::Y2,
                         ModelId::Mirtich, {0.1, 0.5}};
  const LearnedContactModel m = train_learned_model(spec, train, fast());
  const LearnedContactModel back = LearnedContactModel::from_json(m.to_json());
  CHECK(back.spec().describe() == spec.describe());
  CHECK(back.training_ids() == m.training_ids());
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto s = test::random_impact(rng);
    CHECK(back.predict(s.body, s.contact, pre_state(s.v)).v_post ==
          m.predict(s.body, s.contact, pre_state(s.v)).v_post);
  }
  CHECK(back.to_json() == m.to_json());
  CHECK_THROWS_AS(LearnedContactModel::from_json("{\"format\":\"x\"}"), DataError);
  CHECK_THROWS_AS(LearnedContactModel::from_json("not json"), DataError);
}
