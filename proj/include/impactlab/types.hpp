#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace impactlab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Input that violates a documented invariant (negative mass, bad config...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well formed but carries no information to act on, e.g. an
/// energy ellipse built from a zero incident contact velocity.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The contact point is not approaching the surface, so no impact occurs.
class NoImpact : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to produce a usable result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Bodies, states and contacts
// ---------------------------------------------------------------------------

/// Semi-axes of the elliptical body outline, meters. Only the synthetic
/// generator needs the shape; impact models see mass and inertia alone.
struct EllipseShape {
  double a = 0.05;
  double b = 0.035;
};

struct BodyParams {
  double mass = 1.0;     // kg
  double inertia = 1.0;  // kg m^2, about the center of mass
  std::optional<EllipseShape> shape;

  /// Throws InvalidInput unless m > 0, I > 0 and (if present) a >= b > 0.
  void validate() const;

  /// Uniform solid ellipse of the given mass.
  static BodyParams uniform_ellipse(double mass, EllipseShape shape);

  /// sqrt(I / m): converts angular velocity into a commensurate linear speed.
  double characteristic_length() const;
};

/// Configuration q = (x, y, theta) and velocity v = (xdot, ydot, thetadot).
struct PlanarState {
  Vec3 q = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

/// Contact point offset from the center of mass in the world frame. The
/// tangential direction is world x, the normal is world y (pointing away from
/// the ground).
struct ContactGeometry {
  Vec2 r = Vec2(0.0, -1.0);

  void validate() const;
};

/// Linear impulse at the contact point, (tangential, normal), N s.
struct Impulse2 {
  double t = 0.0;
  double n = 0.0;

  Vec2 vec() const { return {t, n}; }
  static Impulse2 from(const Vec2& p) { return {p.x(), p.y()}; }
  friend bool operator==(const Impulse2&, const Impulse2&) = default;
};

/// Linear impulse plus an impulsive torque about the contact point.
struct Wrench3 {
  double t = 0.0;    // N s
  double n = 0.0;    // N s
  double tau = 0.0;  // N m s

  Vec3 vec() const { return {t, n, tau}; }
  static Wrench3 from(const Vec3& w) { return {w.x(), w.y(), w.z()}; }
  Impulse2 linear() const { return {t, n}; }
  friend bool operator==(const Wrench3&, const Wrench3&) = default;
};

/// One recorded impact event. Rigid impacts leave the configuration
/// unchanged, so `post.q` normally equals `pre.q`.
struct ImpactTrial {
  std::uint64_t id = 0;
  BodyParams body;
  ContactGeometry contact;
  PlanarState pre;
  PlanarState post;
  /// Set by loaders when a row violates a trial invariant (kept, not dropped).
  bool flagged = false;
};

using Dataset = std::vector<ImpactTrial>;

}  // namespace impactlab
