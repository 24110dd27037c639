#pragma once

#include "impactlab/types.hpp"

namespace impactlab {

/// diag(m, m, I).
Mat3 inertia_matrix(const BodyParams& body);

/// J = [[1, 0, -r_y], [0, 1, r_x]]; maps body velocity to contact-point velocity.
Mat23 contact_jacobian(const ContactGeometry& contact);

/// Contact-point velocity (tangential, normal) for body velocity v.
Vec2 contact_velocity(const ContactGeometry& contact, const Vec3& v);

/// J M^-1 J^T, the inverse of the effective contact inertia.
Mat2 contact_mobility(const BodyParams& body, const ContactGeometry& contact);

/// M_c = (J M^-1 J^T)^-1.
Mat2 effective_contact_inertia(const BodyParams& body, const ContactGeometry& contact);

/// v_post = v_pre + M^-1 J^T P.
Vec3 apply_impulse(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                   const Impulse2& impulse);

/// v_post = v_pre + M^-1 J_w^T W with J_w = [J; 0 0 1]. With tau = 0 this is
/// the same arithmetic as apply_impulse.
Vec3 apply_wrench(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                  const Wrench3& wrench);

/// P = M_c (J v_post - J v_pre): the least-squares rigid impulse for the
/// observed velocity change. Exact when the trial is rigid-consistent.
Impulse2 measured_impulse(const ImpactTrial& trial);

/// W = J_w^-T M (v_post - v_pre). Always reproduces the observed change.
Wrench3 measured_wrench(const ImpactTrial& trial);

enum class ImpulseRegion { Admissible, EnergyViolating, Penetrating };

const char* to_string(ImpulseRegion region);

struct Admissibility {
  bool admissible = false;
  ImpulseRegion region = ImpulseRegion::Penetrating;
  double alpha = 0.0;
  Vec2 post_contact_velocity = Vec2::Zero();
  /// Sign of the post-impact tangential contact velocity: which side of the
  /// sticking line the impulse lands on (0 when on the line within tol).
  int sticking_side = 0;
};

/// Set of impulses that do not add contact-point kinetic energy:
///   (P + M_c v)^T M_c^-1 (P + M_c v) = alpha v^T M_c v,  alpha in [0, 1].
class EnergyEllipse {
 public:
  /// Throws DegenerateInput if the incident contact velocity is zero.
  EnergyEllipse(const Mat2& contact_inertia, const Vec2& incident_velocity);
  EnergyEllipse(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre);

  static constexpr double kDefaultTolerance = 1e-9;

  const Mat2& contact_inertia() const { return mc_; }
  const Mat2& mobility() const { return w_; }
  const Vec2& incident_velocity() const { return vc_; }
  double incident_energy() const { return incident_energy_; }

  /// Full-arrest impulse -M_c v_c (alpha = 0).
  Impulse2 center() const;

  double alpha(const Impulse2& impulse) const;
  Vec2 post_velocity(const Impulse2& impulse) const;

  /// Admissible iff alpha <= 1 + tol and the post normal velocity is at least
  /// -tol * |v_c|. Energy violations are reported ahead of penetration.
  Admissibility classify(const Impulse2& impulse, double tol = kDefaultTolerance) const;

 private:
  Mat2 mc_;
  Mat2 w_;
  Vec2 vc_;
  double incident_energy_;
};

double energy_alpha(const EnergyEllipse& ellipse, const Impulse2& impulse);

bool is_admissible(const EnergyEllipse& ellipse, const Impulse2& impulse,
                   double tol = EnergyEllipse::kDefaultTolerance);

}  // namespace impactlab
