#include "contact_laws.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace impactlab::detail {

namespace {

constexpr double kRelTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

int sign_or(double x, int fallback) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : fallback); }

}  // namespace

Vec2 frictional_lcp(const Mat2& w, const Vec2& v0, double vn_target, double pn_min, double mu) {
  const double vscale = std::max({v0.norm(), std::abs(vn_target), 1e-300});
  const double tv = kRelTol * vscale;
  const double tp = tv / w.diagonal().minCoeff();

  // tangential mode: 0 = stick, +-1 = sliding with that sign of final slip
  auto accept = [&](const Vec2& dp, int mode) {
    if (!dp.allFinite()) return false;
    const Vec2 vf = v0 + w * dp;
    if (dp.y() < pn_min - tp || vf.y() < vn_target - tv) return false;
    if (mode == 0) return std::abs(dp.x()) <= mu * dp.y() + tp;
    return mode * vf.x() >= -tv;
  };

  const int s0 = sign_or(v0.x(), 1);
  const std::array<int, 3> modes = {0, s0, -s0};

  // Normal impulse at its lower bound, separating velocity free.
  for (int mode : modes) {
    const Vec2 dp = mode == 0 ? Vec2(-(v0.x() + w(0, 1) * pn_min) / w(0, 0), pn_min)
                              : Vec2(-mode * mu * pn_min, pn_min);
    if (accept(dp, mode)) return dp;
  }
  // Normal velocity at its target, impulse free.
  for (int mode : modes) {
    Vec2 dp;
    if (mode == 0) {
      dp = w.inverse() * Vec2(-v0.x(), vn_target - v0.y());
    } else {
      const double den = w(1, 1) - mode * mu * w(1, 0);
      if (!(den > 0.0)) continue;
      const double pn = (vn_target - v0.y()) / den;
      dp = Vec2(-mode * mu * pn, pn);
    }
    if (accept(dp, mode)) return dp;
  }
  throw NumericalFailure("frictional complementarity problem has no solution");
}

bool small_qp(const Mat2& h, const Vec2& g, const Eigen::Matrix<double, Eigen::Dynamic, 2>& a,
              const Eigen::VectorXd& b, Vec2& x) {
  const Eigen::Index m = a.rows();
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  auto feasible = [&](const Vec2& p) {
    return p.allFinite() && ((a * p - b).array() <= 1e-11 * scale).all();
  };
  auto objective = [&](const Vec2& p) { return 0.5 * p.dot(h * p) + g.dot(p); };

  bool found = false;
  double best = kInf;
  auto consider = [&](const Vec2& p) {
    if (!feasible(p)) return;
    const double f = objective(p);
    if (f < best) {
      best = f;
      x = p;
      found = true;
    }
  };

  const Mat2 h_inv = h.inverse();
  consider(-h_inv * g);
  for (Eigen::Index i = 0; i < m; ++i) {
    // min on the line a_i x = b_i
    const Vec2 ai = a.row(i).transpose();
    const double denom = ai.dot(h_inv * ai);
    if (denom <= 0.0) continue;
    const double lambda = (ai.dot(-h_inv * g) - b(i)) / denom;
    consider(-h_inv * (g + lambda * ai));
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      Mat2 aa;
      aa.row(0) = a.row(i);
      aa.row(1) = a.row(j);
      if (std::abs(aa.determinant()) < 1e-14 * aa.squaredNorm()) continue;
      consider(aa.inverse() * Vec2(b(i), b(j)));
    }
  }
  return found;
}

// Anitescu-Potra with Newton restitution: a single velocity-level
// complementarity problem whose normal target is -eps v_n.
Vec2 ap_newton(const Mat2& w, const Vec2& v, double mu, double eps) {
  return frictional_lcp(w, v, -eps * v.y(), 0.0, mu);
}

// Anitescu-Potra with Poisson restitution: a compression problem to zero
// normal velocity, then a restitution problem whose normal impulse is at
// least eps times the compression impulse.
Vec2 ap_poisson(const Mat2& w, const Vec2& v, double mu, double eps) {
  const Vec2 compression = frictional_lcp(w, v, 0.0, 0.0, mu);
  if (eps == 0.0) return compression;
  const Vec2 vc = v + w * compression;
  return compression + frictional_lcp(w, vc, 0.0, eps * compression.y(), mu);
}

// Drumwright-Shell: compression impulse minimizes post-impact kinetic energy
// over the friction cone and non-penetration constraints (no complementarity);
// restitution adds eps times the compression normal impulse and again picks
// the most dissipative admissible friction impulse.
Vec2 drumwright_shell(const Mat2& w, const Vec2& v, double mu, double eps) {
  Eigen::Matrix<double, 4, 2> a;
  Eigen::Vector4d b;
  a << -w(1, 0), -w(1, 1),  // v_n + (W P)_n >= 0
      1.0, -mu,             // P_t <= mu P_n
      -1.0, -mu,            // -P_t <= mu P_n
      0.0, -1.0;            // P_n >= 0
  b << v.y(), 0.0, 0.0, 0.0;
  Vec2 compression;
  if (!small_qp(w, v, a, b, compression)) {
    throw NumericalFailure("Drumwright-Shell compression problem is infeasible");
  }
  if (eps == 0.0) return compression;

  const Vec2 vc = v + w * compression;
  const double dpn = eps * compression.y();
  double lo = -mu * dpn;
  double hi = mu * dpn;
  const double base = vc.y() + w(1, 1) * dpn;
  if (w(1, 0) > 0.0) {
    lo = std::max(lo, -base / w(1, 0));
  } else if (w(1, 0) < 0.0) {
    hi = std::min(hi, -base / w(1, 0));
  }
  double dpt = -(vc.x() + w(0, 1) * dpn) / w(0, 0);
  dpt = lo <= hi ? std::clamp(dpt, lo, hi) : 0.0;
  return compression + Vec2(dpt, dpn);
}

namespace {

enum class RestitutionLaw { Poisson, Energetic };

// Integrates the contact-point velocity along the normal impulse p, switching
// between sliding and sticking by the Coulomb condition (Routh's method in
// impulse space). Velocity is affine in the impulse, so every phase is
// advanced to its next event in closed form.
Vec2 integrate_along_normal_impulse(const Mat2& w, const Vec2& v_in, double mu, double eps,
                                    RestitutionLaw law) {
  const double tv = 1e-13 * v_in.norm();
  const double kappa = -w(0, 1) / w(0, 0);  // dP_t/dp that keeps v_t = 0

  Vec2 v = v_in;
  double pt = 0.0;
  double pn = 0.0;
  double work = 0.0;  // normal work, integral of v_n dp
  bool compressing = true;
  double pn_end = 0.0;
  double work_end = 0.0;

  enum class Event { None, SlipStop, CompressionEnd, RestitutionEnd, Separated };

  for (int phase = 0; phase < 32; ++phase) {
    bool stick = false;
    int s = 0;
    if (std::abs(v.x()) > tv) {
      s = v.x() > 0.0 ? 1 : -1;
    } else if (std::abs(kappa) <= mu) {
      stick = true;
      v.x() = 0.0;
    } else {
      s = w(0, 1) > 0.0 ? 1 : -1;
      v.x() = 0.0;
    }
    const double dpt = stick ? kappa : -s * mu;
    Vec2 dv = w * Vec2(dpt, 1.0);
    if (stick) dv.x() = 0.0;

    double step = kInf;
    Event event = Event::None;
    if (!stick && s * dv.x() < 0.0) {
      step = -v.x() / dv.x();
      event = Event::SlipStop;
    }
    if (compressing) {
      if (dv.y() > 0.0) {
        const double d = -v.y() / dv.y();
        if (d < step) {
          step = d;
          event = Event::CompressionEnd;
        }
      }
    } else {
      if (v.y() <= 0.0 && dv.y() <= 0.0) break;  // a second compression: stop here
      double d_end = kInf;
      if (law == RestitutionLaw::Poisson) {
        d_end = std::max(pn_end - pn, 0.0);
      } else {
        const double remaining = std::max(work_end - work, 0.0);
        const double disc = v.y() * v.y() + 2.0 * dv.y() * remaining;
        if (disc >= 0.0 && v.y() + std::sqrt(disc) > 0.0) {
          d_end = 2.0 * remaining / (v.y() + std::sqrt(disc));
        }
      }
      if (d_end <= step) {
        step = d_end;
        event = Event::RestitutionEnd;
      }
      if (dv.y() < 0.0) {
        const double d = v.y() / -dv.y();
        if (d < step) {
          step = d;
          event = Event::Separated;
        }
      }
    }
    if (event == Event::None || !std::isfinite(step)) {
      throw NumericalFailure("impulse integration did not reach a terminal event");
    }

    pt += dpt * step;
    pn += step;
    work += v.y() * step + 0.5 * dv.y() * step * step;
    v += dv * step;

    switch (event) {
      case Event::SlipStop:
        v.x() = 0.0;
        break;
      case Event::CompressionEnd:
        v.y() = 0.0;
        if (eps == 0.0) return {pt, pn};
        compressing = false;
        pn_end = (1.0 + eps) * pn;
        work_end = (1.0 - eps * eps) * work;
        break;
      case Event::RestitutionEnd:
        return {pt, pn};
      case Event::Separated:
        v.y() = 0.0;
        return {pt, pn};
      case Event::None:
        break;
    }
  }
  if (!compressing) return {pt, pn};
  throw NumericalFailure("impulse integration exceeded its phase budget");
}

}  // namespace

// Wang-Mason: Routh's method with Poisson's restitution hypothesis. The
// restitution phase ends when the normal impulse reaches (1 + eps) times the
// compression impulse.
Vec2 wang_mason(const Mat2& w, const Vec2& v, double mu, double eps) {
  return integrate_along_normal_impulse(w, v, mu, eps, RestitutionLaw::Poisson);
}

// Mirtich: the same impulse integration, terminated by the energetic
// (Stronge) criterion: restitution work equals -eps^2 times compression work.
Vec2 mirtich(const Mat2& w, const Vec2& v, double mu, double eps) {
  return integrate_along_normal_impulse(w, v, mu, eps, RestitutionLaw::Energetic);
}

// Whittaker: Newton restitution on the normal velocity and Coulomb sliding in
// the direction of the incoming slip. If the sticking impulse is inside the
// friction cone, or sliding would reverse the slip, the contact sticks.
Vec2 whittaker(const Mat2& w, const Vec2& v, double mu, double eps) {
  const Vec2 stick = w.inverse() * Vec2(-v.x(), -(1.0 + eps) * v.y());
  const double tp = kRelTol * std::abs(stick.y());
  if (stick.y() >= 0.0 && std::abs(stick.x()) <= mu * stick.y() + tp) return stick;

  const int s = sign_or(v.x(), stick.x() > 0.0 ? -1 : 1);
  const double den = w(1, 1) - s * mu * w(1, 0);
  if (den > 0.0) {
    const double pn = -(1.0 + eps) * v.y() / den;
    const Vec2 slide(-s * mu * pn, pn);
    const double vt_post = v.x() + w(0, 0) * slide.x() + w(0, 1) * slide.y();
    if (s * vt_post >= -kRelTol * v.norm()) return slide;
  }
  if (stick.y() >= 0.0) return stick;
  return ap_newton(w, v, mu, eps);
}

}  // namespace impactlab::detail
