#pragma once

#include <cmath>
#include <random>

#include "impactlab/dynamics.hpp"
#include "impactlab/models.hpp"

namespace impactlab::test {

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= abs_floor + rel * std::max(std::abs(a), std::abs(b));
}

// Random body, contact and approaching pre-impact velocity. The contact
// offset points below the center of mass, as it does for a resting body.
struct RandomImpact {
  BodyParams body;
  ContactGeometry contact;
  Vec3 v;
};

inline RandomImpact random_impact(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomImpact out;
  out.body.mass = 0.1 + 2.0 * u(rng);
  out.body.inertia = out.body.mass * (0.01 + 0.2 * u(rng));
  const double rx = -0.3 + 0.6 * u(rng);
  const double ry = -(0.02 + 0.3 * u(rng));
  out.contact.r = Vec2(rx, ry);
  do {
    out.v = Vec3(-2.0 + 4.0 * u(rng), -3.0 + 3.5 * u(rng), -30.0 + 60.0 * u(rng));
  } while (!(contact_velocity(out.contact, out.v).y() < -1e-3));
  return out;
}

inline ImpactTrial make_trial(const BodyParams& body, const ContactGeometry& contact, const Vec3& pre,
                              const Vec3& post, std::uint64_t id = 0) {
  ImpactTrial t;
  t.id = id;
  t.body = body;
  t.contact = contact;
  t.pre.v = pre;
  t.post.v = post;
  return t;
}

}  // namespace impactlab::test
