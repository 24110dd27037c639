#include "impactlab/dataforge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "impactlab/parallel.hpp"

namespace impactlab {

namespace {

double kinetic_plus_potential(const BodyParams& body, const Vec3& q, const Vec3& v, double g) {
  return 0.5 * body.mass * (v.x() * v.x() + v.y() * v.y()) + 0.5 * body.inertia * v.z() * v.z() +
         body.mass * g * q.y();
}

void check_range(const Range& r, const char* name) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi)) {
    throw InvalidInput(std::string("initial.") + name + ": expected lo <= hi");
  }
}

double sample(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

BodyParams GenConfig::body() const {
  BodyParams b = BodyParams::uniform_ellipse(mass, shape);
  if (inertia > 0.0) b.inertia = inertia;
  return b;
}

void GenConfig::validate() const {
  if (!(mass > 0.0)) throw InvalidInput("body.mass must be positive");
  if (!(shape.a >= shape.b && shape.b > 0.0)) throw InvalidInput("body.a, body.b: need a >= b > 0");
  if (!(inertia >= 0.0)) throw InvalidInput("body.inertia must be positive (or 0 for uniform)");
  if (!(stiffness > 0.0)) throw InvalidInput("contact.stiffness must be positive");
  if (!(damping >= 0.0)) throw InvalidInput("contact.damping must be non-negative");
  if (!(mu_true >= 0.0)) throw InvalidInput("contact.mu must be non-negative");
  if (!(v_reg > 0.0)) throw InvalidInput("contact.v_reg must be positive");
  if (!(gravity >= 0.0)) throw InvalidInput("integrator.gravity must be non-negative");
  if (!(dt > 0.0)) throw InvalidInput("integrator.dt must be positive");
  if (!(horizon > 0.0)) throw InvalidInput("integrator.horizon must be positive");
  if (!(post_window >= 0.0)) throw InvalidInput("integrator.post_window must be non-negative");
  check_range(clearance, "clearance");
  check_range(vx, "vx");
  check_range(vy, "vy");
  check_range(omega, "omega");
  check_range(theta, "theta");
  if (clearance.lo < 0.0) throw InvalidInput("initial.clearance must be non-negative");
  if (vy.hi >= 0.0 && clearance.lo == 0.0) {
    throw InvalidInput("initial.vy must be negative when the clearance can be zero");
  }
  for (double s : noise_std) {
    if (!(s >= 0.0)) throw InvalidInput("noise.std entries must be non-negative");
  }
  // The stiffest event is felt by the smallest effective normal mass, reached
  // when the contact sits at the end of the major axis.
  const BodyParams b = body();
  const double a = shape.a;
  const double m_eff = 1.0 / (1.0 / b.mass + a * a / b.inertia);
  const double duration = std::numbers::pi * std::sqrt(m_eff / stiffness);
  if (duration / dt < 50.0) {
    throw InvalidInput("integrator.dt too large: a contact event spans only " +
                       std::to_string(static_cast<int>(duration / dt)) +
                       " steps (need at least 50)");
  }
}

Vec2 support_offset(const EllipseShape& shape, double theta) {
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double h = std::sqrt(shape.a * shape.a * s * s + shape.b * shape.b * c * c);
  return {-(shape.a * shape.a - shape.b * shape.b) * s * c / h, -h};
}

SimResult simulate_impact(const GenConfig& config, const PlanarState& initial) {
  const BodyParams body = config.body();
  const double m = body.mass;
  const double inertia = body.inertia;
  const double g = config.gravity;
  const double dt = config.dt;
  const auto max_steps = static_cast<std::size_t>(std::ceil(config.horizon / dt));

  SimResult out;
  Vec3 q = initial.q;
  Vec3 v = initial.v;
  auto depth = [&](Vec2& r) {
    r = support_offset(config.shape, q.z());
    return -(q.y() + r.y());
  };

  // free flight up to force onset
  Vec2 r;
  std::size_t step = 0;
  while (depth(r) <= 0.0) {
    if (++step > max_steps) return out;
    v.y() -= g * dt;
    q += dt * v;
  }
  out.trial.body = body;
  out.trial.contact.r = r;
  out.trial.pre = {q, v};
  out.energy_onset = kinetic_plus_potential(body, q, v, g);

  // contact event
  std::size_t contact_steps = 0;
  for (double delta = depth(r); delta > 0.0; delta = depth(r)) {
    if (++contact_steps > max_steps) {
      out.outcome = SimOutcome::MultiImpact;  // never separated: resting or rolling contact
      return out;
    }
    const double vt = v.x() - v.z() * r.y();
    const double vn = v.y() + v.z() * r.x();
    const double fn = std::max(0.0, config.stiffness * delta - config.damping * vn);
    const double ft = -config.mu_true * fn * std::tanh(vt / config.v_reg);
    v.x() += dt * ft / m;
    v.y() += dt * (fn / m - g);
    v.z() += dt * (r.x() * fn - r.y() * ft) / inertia;
    q += dt * v;
  }
  out.contact_steps = contact_steps;
  out.energy_offset = kinetic_plus_potential(body, q, v, g);

  const Vec3 v_offset = v;
  // a second touchdown shortly after separation is a multi-impact event
  const auto window = static_cast<std::size_t>(std::ceil(config.post_window / dt));
  for (std::size_t i = 0; i < window; ++i) {
    v.y() -= g * dt;
    q += dt * v;
    if (depth(r) > 0.0) {
      out.outcome = SimOutcome::MultiImpact;
      return out;
    }
  }

  out.trial.post.q = out.trial.pre.q;
  out.trial.post.v = v_offset + Vec3(0.0, g * dt * static_cast<double>(contact_steps), 0.0);
  out.outcome = SimOutcome::Accepted;
  return out;
}

Dataset generate_dataset(const GenConfig& config, GenStats* stats, unsigned threads) {
  config.validate();
  GenStats local;
  Dataset out;
  out.reserve(config.n_trials);
  const std::size_t max_attempts = 10 * config.n_trials + 100;
  const unsigned workers = resolve_threads(threads);

  auto attempt = [&](std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    PlanarState init;
    const double theta = sample(rng, config.theta);
    const double gap = sample(rng, config.clearance);
    init.q = Vec3(0.0, gap - support_offset(config.shape, theta).y(), theta);
    init.v.x() = sample(rng, config.vx);
    init.v.y() = sample(rng, config.vy);
    init.v.z() = sample(rng, config.omega);
    SimResult res = simulate_impact(config, init);
    if (res.outcome == SimOutcome::Accepted) {
      for (int i = 0; i < 3; ++i) {
        if (config.noise_std[i] > 0.0) {
          std::normal_distribution<double> noise(0.0, config.noise_std[i]);
          res.trial.pre.v[i] += noise(rng);
          res.trial.post.v[i] += noise(rng);
        }
      }
    }
    return res;
  };

  std::size_t next = 0;
  while (out.size() < config.n_trials) {
    if (next >= max_attempts) {
      throw InvalidInput("generation accepted " + std::to_string(out.size()) + " of " +
                         std::to_string(next) +
                         " drops (below 10%); check the initial-condition ranges");
    }
    const std::size_t missing = config.n_trials - out.size();
    const std::size_t batch =
        std::min(max_attempts - next, missing + missing / 4 + workers);
    std::vector<SimResult> results(batch);
    parallel_for(batch, [&](std::size_t i) { results[i] = attempt(next + i); }, workers);
    for (SimResult& res : results) {
      ++local.attempts;
      ++next;
      switch (res.outcome) {
        case SimOutcome::Accepted:
          if (out.size() < config.n_trials) {
            res.trial.id = out.size();
            out.push_back(std::move(res.trial));
            ++local.accepted;
          }
          break;
        case SimOutcome::NoContact:
          ++local.no_contact;
          break;
        case SimOutcome::MultiImpact:
          ++local.multi_impact;
          break;
      }
      if (out.size() == config.n_trials) break;
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace impactlab
