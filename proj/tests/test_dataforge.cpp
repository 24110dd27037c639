#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <sstream>

#include "impactlab/dataforge.hpp"
#include "impactlab/dynamics.hpp"
#include "support.hpp"

using namespace impactlab;
namespace fs = std::filesystem;

namespace {

GenConfig small_config(std::size_t n, std::uint64_t seed = 1) {
  GenConfig c;
  c.n_trials = n;
  c.seed = seed;
  return c;
}

// A central drop: the minor axis vertical, falling straight down.
PlanarState central_drop(const GenConfig& c, double speed) {
  PlanarState s;
  s.q = Vec3(0.0, c.shape.b + 1e-4, 0.0);
  s.v = Vec3(0.0, -speed, 0.0);
  return s;
}

std::string csv_of(const Dataset& d) {
  std::ostringstream s;
  write_dataset_csv(s, d);
  return s.str();
}

LoadResult parse_csv(const std::string& text) {
  std::istringstream in(text);
  return read_dataset_csv(in);
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("support point of the ellipse") {
  const EllipseShape e{0.05, 0.035};
  CHECK((support_offset(e, 0.0) - Vec2(0.0, -0.035)).norm() < 1e-15);
  CHECK((support_offset(e, std::numbers::pi / 2) - Vec2(0.0, -0.05)).norm() < 1e-15);
  // brute force over the boundary
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.14, 3.14);
  for (int i = 0; i < 50; ++i) {
    const double th = u(rng);
    double lowest = 1.0;
    Vec2 at;
    for (int k = 0; k < 200000; ++k) {
      const double s = 2.0 * std::numbers::pi * k / 200000.0;
      const Vec2 body(e.a * std::cos(s), e.b * std::sin(s));
      const Vec2 world(std::cos(th) * body.x() - std::sin(th) * body.y(),
                       std::sin(th) * body.x() + std::cos(th) * body.y());
      if (world.y() < lowest) {
        lowest = world.y();
        at = world;
      }
    }
    const Vec2 got = support_offset(e, th);
    CHECK(std::abs(got.y() - lowest) < 1e-9);
    CHECK(std::abs(got.x() - at.x()) < 5e-5);
  }
}

TEST_CASE("config validation names the field") {
  GenConfig c;
  c.stiffness = -1.0;
  CHECK(message_of([&] { c.validate(); }).find("contact.stiffness") != std::string::npos);
  c = GenConfig{};
  c.dt = 1e-4;
  CHECK(message_of([&] { c.validate(); }).find("integrator.dt") != std::string::npos);
  c = GenConfig{};
  c.vy = {-0.5, -1.0};
  CHECK(message_of([&] { c.validate(); }).find("initial.vy") != std::string::npos);
}

TEST_CASE("TOML and JSON configs") {
  const std::string toml = R"(n_trials = 12
seed = 9

[body]
mass = 0.05

[contact]
stiffness = 2e5
mu = 0.3

[initial]
vy = [-2.0, -1.0]

[noise]
std = [0.01, 0.01, 0.2]
)";
  const GenConfig c = parse_gen_config_toml(toml, "cfg.toml");
  CHECK(c.n_trials == 12);
  CHECK(c.seed == 9);
  CHECK(c.mass == 0.05);
  CHECK(c.stiffness == 2e5);
  CHECK(c.mu_true == 0.3);
  CHECK(c.vy.lo == -2.0);
  CHECK(c.noise_std[2] == 0.2);
  CHECK(c.damping == GenConfig{}.damping);

  const GenConfig j = parse_gen_config_json(gen_config_to_json(c));
  CHECK(gen_config_to_json(j) == gen_config_to_json(c));

  const std::string unknown = "n_trials = 3\n[contact]\nstifness = 1e5\n";
  const std::string msg = message_of([&] { parse_gen_config_toml(unknown, "cfg.toml"); });
  CHECK(msg.find("contact.stifness") != std::string::npos);
  CHECK(msg.find("cfg.toml:3") != std::string::npos);

  const std::string wrong_type = "[contact]\nmu = \"high\"\n";
  CHECK(message_of([&] { parse_gen_config_toml(wrong_type, "c.toml"); }).find("c.toml:2") != std::string::npos);

  const std::string broken = "n_trials = 3\n[contact\n";
  CHECK(message_of([&] { parse_gen_config_toml(broken, "b.toml"); }).find("b.toml:2") != std::string::npos);

  CHECK_THROWS_AS(parse_gen_config_json("{\"seed\": -1}"), InvalidInput);
  CHECK_THROWS_AS(parse_gen_config_json("{\"body\": {\"mass\": 0}}"), InvalidInput);
}

TEST_CASE("central elastic drop bounces back with the incoming speed") {
  GenConfig c;
  c.mu_true = 0.0;
  c.damping = 0.0;
  c.gravity = 0.0;
  c.stiffness = 1e7;
  c.dt = 2e-7;
  const SimResult r = simulate_impact(c, central_drop(c, 1.5));
  REQUIRE(r.outcome == SimOutcome::Accepted);
  CHECK(std::abs(r.trial.post.v.y() - 1.5) < 0.015);
  CHECK(r.contact_steps >= 50);
}

TEST_CASE("damping dissipates") {
  GenConfig c;
  c.mu_true = 0.0;
  const SimResult r = simulate_impact(c, central_drop(c, 1.5));
  REQUIRE(r.outcome == SimOutcome::Accepted);
  CHECK(std::abs(r.trial.post.v.y()) < 1.5);
  CHECK(r.energy_offset < r.energy_onset);
}

TEST_CASE("simulator outcomes") {
  GenConfig c;
  PlanarState up = central_drop(c, 1.0);
  up.v.y() = 1.0;
  c.gravity = 0.0;
  CHECK(simulate_impact(c, up).outcome == SimOutcome::NoContact);
}

TEST_CASE("measured impulse converges as the contact stiffens") {
  PlanarState init;
  GenConfig c;
  c.mu_true = 0.2;
  const double theta = 0.4;
  init.q = Vec3(0.0, 1e-4 - support_offset(c.shape, theta).y(), theta);
  init.v = Vec3(0.3, -1.5, 4.0);
  std::vector<Vec2> p;
  for (double k : {1e5, 1e6, 1e7}) {
    c.stiffness = k;
    c.damping = 2.0 * 0.2 * std::sqrt(k * c.mass);  // fixed damping ratio
    c.dt = 2e-7;
    const SimResult r = simulate_impact(c, init);
    REQUIRE(r.outcome == SimOutcome::Accepted);
    p.push_back(measured_impulse(r.trial).vec());
  }
  CHECK((p[2] - p[1]).norm() < (p[1] - p[0]).norm());
}

TEST_CASE("dataset generation") {
  CHECK(generate_dataset(small_config(0)).empty());

  GenStats s1, s4;
  const Dataset a = generate_dataset(small_config(40, 5), &s1, 1);
  const Dataset b = generate_dataset(small_config(40, 5), &s4, 4);
  REQUIRE(a.size() == 40);
  CHECK(csv_of(a) == csv_of(b));
  CHECK(s1.accepted == s4.accepted);
  CHECK(s1.attempts == s4.attempts);
  CHECK(csv_of(generate_dataset(small_config(40, 6), nullptr, 1)) != csv_of(a));

  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == i);
    CHECK(contact_velocity(a[i].contact, a[i].pre.v).y() < 0.0);
    CHECK(a[i].post.q == a[i].pre.q);
    // the contact point sits on the ground at onset, within one step of travel
    CHECK(std::abs(a[i].pre.q.y() + a[i].contact.r.y()) < 1e-5);
    // noise-free: the measured wrench reproduces the velocity change exactly
    const Vec3 v = apply_wrench(a[i].body, a[i].contact, a[i].pre.v, measured_wrench(a[i]));
    CHECK((v - a[i].post.v).norm() <= 1e-10 * (1.0 + a[i].post.v.norm()));
  }
}

TEST_CASE("measured impulses are mostly admissible") {
  const Dataset d = generate_dataset(small_config(500, 2));
  std::size_t ok = 0;
  for (const ImpactTrial& t : d) {
    const EnergyEllipse e(t.body, t.contact, t.pre.v);
    // compliance lets the contact point move during the event; allow 1%
    if (is_admissible(e, measured_impulse(t), 1e-2)) ++ok;
  }
  const double rate = static_cast<double>(ok) / static_cast<double>(d.size());
  CHECK(rate > 0.5);
  CHECK(rate <= 1.0);
}

TEST_CASE("low acceptance is a configuration error") {
  GenConfig c = small_config(20);
  c.horizon = 1e-4;  // too short to reach the ground from the smallest clearance
  c.clearance = {0.002, 0.003};
  c.vy = {-0.9, -0.8};
  CHECK_THROWS_AS(generate_dataset(c), InvalidInput);
}

TEST_CASE("noise is applied to velocities only") {
  GenConfig c = small_config(20, 4);
  const Dataset clean = generate_dataset(c);
  c.noise_std = {0.01, 0.01, 0.2};
  const Dataset noisy = generate_dataset(c);
  REQUIRE(noisy.size() == clean.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(noisy[i].pre.q == clean[i].pre.q);
    CHECK(noisy[i].contact.r == clean[i].contact.r);
    diff += (noisy[i].post.v - clean[i].post.v).norm();
  }
  CHECK(diff > 0.0);
}

TEST_CASE("CSV round trip is field exact") {
  const Dataset d = generate_dataset(small_config(30, 8));
  const std::string text = csv_of(d);
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  const LoadResult back = parse_csv(text);
  CHECK(back.warnings.empty());
  REQUIRE(back.trials.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.trials[i].id == d[i].id);
    CHECK(back.trials[i].body.mass == d[i].body.mass);
    CHECK(back.trials[i].body.inertia == d[i].body.inertia);
    CHECK(back.trials[i].contact.r == d[i].contact.r);
    CHECK(back.trials[i].pre.q == d[i].pre.q);
    CHECK(back.trials[i].pre.v == d[i].pre.v);
    CHECK(back.trials[i].post.v == d[i].post.v);
  }
  CHECK(csv_of(back.trials) == text);
}

TEST_CASE("JSON round trip") {
  const Dataset d = generate_dataset(small_config(10, 8));
  std::ostringstream out;
  write_dataset_json(out, d);
  std::istringstream in(out.str());
  const LoadResult back = read_dataset_json(in);
  CHECK(csv_of(back.trials) == csv_of(d));
}

TEST_CASE("malformed CSV is reported with its line") {
  const std::string h = std::string(kCsvHeader) + "\n";
  const std::string row = "0,1,1,0,-1,0,1,0,0,-1,0,0,0.5,0\n";
  CHECK(parse_csv(h + row).trials.size() == 1);
  CHECK(parse_csv(h + "\r\n" + row).trials.size() == 1);

  CHECK(message_of([&] { parse_csv("trial,m\n" + row); }).find("line 1") != std::string::npos);
  CHECK(message_of([&] { parse_csv(h + row + "1,1,1,0,-1\n"); }).find("line 3") != std::string::npos);
  CHECK(message_of([&] { parse_csv(h + row + "1,1,1,0,-1,0,1,0,0,x,0,0,0.5,0\n"); }).find("vy_pre") !=
        std::string::npos);
  CHECK(message_of([&] { parse_csv(h + row + row); }).find("duplicate") != std::string::npos);
  CHECK_THROWS_AS(parse_csv(h + "0,0,1,0,-1,0,1,0,0,-1,0,0,0.5,0\n"), DataError);

  // receding contact point: kept, flagged, warned
  const LoadResult r = parse_csv(h + "4,1,1,0,-1,0,1,0,0,1,0,0,0.5,0\n");
  REQUIRE(r.trials.size() == 1);
  CHECK(r.trials[0].flagged);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("line 2") != std::string::npos);
}

TEST_CASE("a 1718-row file loads in under a second") {
  std::mt19937_64 rng(1);
  Dataset d;
  for (std::uint64_t i = 0; i < 1718; ++i) {
    const auto s = test::random_impact(rng);
    d.push_back(test::make_trial(s.body, s.contact, s.v, -0.5 * s.v, i));
  }
  const fs::path path = fs::temp_directory_path() / "impactlab_1718.csv";
  save_dataset(path, d);
  const auto t0 = std::chrono::steady_clock::now();
  const LoadResult r = load_dataset(path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fs::remove(path);
  CHECK(r.trials.size() == 1718);
  CHECK(secs < 1.0);
}
