#include "impactlab/dynamics.hpp"

#include <cmath>

namespace impactlab {

namespace {

bool finite(const Vec2& v) { return v.allFinite(); }

}  // namespace

void BodyParams::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw InvalidInput("body mass must be positive and finite");
  }
  if (!(inertia > 0.0) || !std::isfinite(inertia)) {
    throw InvalidInput("body inertia must be positive and finite");
  }
  if (shape && !(shape->a >= shape->b && shape->b > 0.0)) {
    throw InvalidInput("ellipse semi-axes must satisfy a >= b > 0");
  }
}

BodyParams BodyParams::uniform_ellipse(double mass, EllipseShape shape) {
  BodyParams body;
  body.mass = mass;
  body.inertia = mass * (shape.a * shape.a + shape.b * shape.b) / 4.0;
  body.shape = shape;
  body.validate();
  return body;
}

double BodyParams::characteristic_length() const { return std::sqrt(inertia / mass); }

void ContactGeometry::validate() const {
  if (!finite(r) || r.norm() == 0.0) {
    throw InvalidInput("contact offset must be finite and nonzero");
  }
}

Mat3 inertia_matrix(const BodyParams& body) {
  body.validate();
  return Vec3(body.mass, body.mass, body.inertia).asDiagonal();
}

Mat23 contact_jacobian(const ContactGeometry& contact) {
  Mat23 j;
  j << 1.0, 0.0, -contact.r.y(),  //
      0.0, 1.0, contact.r.x();
  return j;
}

Vec2 contact_velocity(const ContactGeometry& contact, const Vec3& v) {
  return {v.x() - v.z() * contact.r.y(), v.y() + v.z() * contact.r.x()};
}

Mat2 contact_mobility(const BodyParams& body, const ContactGeometry& contact) {
  const double inv_m = 1.0 / body.mass;
  const double inv_i = 1.0 / body.inertia;
  const double rx = contact.r.x();
  const double ry = contact.r.y();
  Mat2 w;
  w << inv_m + ry * ry * inv_i, -rx * ry * inv_i,  //
      -rx * ry * inv_i, inv_m + rx * rx * inv_i;
  return w;
}

Mat2 effective_contact_inertia(const BodyParams& body, const ContactGeometry& contact) {
  const Mat2 w = contact_mobility(body, contact);
  const double det = w.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw NumericalFailure("contact mobility matrix is singular");
  }
  Mat2 mc;
  mc << w(1, 1), -w(0, 1),  //
      -w(1, 0), w(0, 0);
  return mc / det;
}

Vec3 apply_impulse(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                   const Impulse2& p) {
  const Vec2& r = contact.r;
  return {v_pre.x() + p.t / body.mass, v_pre.y() + p.n / body.mass,
          v_pre.z() + (r.x() * p.n - r.y() * p.t) / body.inertia};
}

Vec3 apply_wrench(const BodyParams& body, const ContactGeometry& contact, const Vec3& v_pre,
                  const Wrench3& w) {
  const Vec2& r = contact.r;
  return {v_pre.x() + w.t / body.mass, v_pre.y() + w.n / body.mass,
          v_pre.z() + ((r.x() * w.n - r.y() * w.t) + w.tau) / body.inertia};
}

Impulse2 measured_impulse(const ImpactTrial& trial) {
  const Vec2 dvc = contact_velocity(trial.contact, trial.post.v - trial.pre.v);
  return Impulse2::from(effective_contact_inertia(trial.body, trial.contact) * dvc);
}

Wrench3 measured_wrench(const ImpactTrial& trial) {
  const Vec3 dv = trial.post.v - trial.pre.v;
  const Vec2& r = trial.contact.r;
  const double pt = trial.body.mass * dv.x();
  const double pn = trial.body.mass * dv.y();
  const double tau = trial.body.inertia * dv.z() - (r.x() * pn - r.y() * pt);
  return {pt, pn, tau};
}

const char* to_string(ImpulseRegion region) {
  switch (region) {
    case ImpulseRegion::Admissible:
      return "admissible";
    case ImpulseRegion::EnergyViolating:
      return "energy-violating";
    case ImpulseRegion::Penetrating:
      return "penetrating";
  }
  return "unknown";
}

EnergyEllipse::EnergyEllipse(const Mat2& contact_inertia, const Vec2& incident_velocity)
    : mc_(contact_inertia), w_(contact_inertia.inverse()), vc_(incident_velocity) {
  if (!vc_.allFinite() || vc_.isZero(0.0)) {
    throw DegenerateInput("energy ellipse needs a nonzero incident contact velocity");
  }
  incident_energy_ = vc_.dot(mc_ * vc_);
}

EnergyEllipse::EnergyEllipse(const BodyParams& body, const ContactGeometry& contact,
                             const Vec3& v_pre)
    : EnergyEllipse(effective_contact_inertia(body, contact), contact_velocity(contact, v_pre)) {
  w_ = contact_mobility(body, contact);
}

Impulse2 EnergyEllipse::center() const { return Impulse2::from(-(mc_ * vc_)); }

double EnergyEllipse::alpha(const Impulse2& impulse) const {
  const Vec2 shifted = impulse.vec() + mc_ * vc_;
  return shifted.dot(w_ * shifted) / incident_energy_;
}

Vec2 EnergyEllipse::post_velocity(const Impulse2& impulse) const {
  return vc_ + w_ * impulse.vec();
}

Admissibility EnergyEllipse::classify(const Impulse2& impulse, double tol) const {
  Admissibility out;
  out.alpha = alpha(impulse);
  out.post_contact_velocity = post_velocity(impulse);
  const double speed_scale = vc_.norm();
  const bool energy_ok = out.alpha <= 1.0 + tol;
  const bool separating = out.post_contact_velocity.y() >= -tol * speed_scale;
  out.admissible = energy_ok && separating;
  out.region = !energy_ok    ? ImpulseRegion::EnergyViolating
               : !separating ? ImpulseRegion::Penetrating
                             : ImpulseRegion::Admissible;
  const double vt = out.post_contact_velocity.x();
  out.sticking_side = std::abs(vt) <= tol * speed_scale ? 0 : (vt > 0.0 ? 1 : -1);
  return out;
}

double energy_alpha(const EnergyEllipse& ellipse, const Impulse2& impulse) {
  return ellipse.alpha(impulse);
}

bool is_admissible(const EnergyEllipse& ellipse, const Impulse2& impulse, double tol) {
  return ellipse.classify(impulse, tol).admissible;
}

}  // namespace impactlab
