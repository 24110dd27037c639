#pragma once

// Contact-space impulse laws behind predict_contact_impulse. Everything here
// works with the mobility W = J M^-1 J^T and contact velocities (t, n).

#include "impactlab/types.hpp"

namespace impactlab::detail {

/// Impulse increment dP from velocity v0 such that
///   dP_n >= pn_min  and  v_n' >= vn_target, complementary;
///   |dP_t| <= mu dP_n, with dP_t opposing the final slip when saturated.
/// Solved by enumerating the six contact modes.
Vec2 frictional_lcp(const Mat2& w, const Vec2& v0, double vn_target, double pn_min, double mu);

/// Minimizes 0.5 x^T H x + g^T x subject to rows of a x <= b (2-D, dense
/// active-set enumeration). Returns false if nothing is feasible.
bool small_qp(const Mat2& h, const Vec2& g, const Eigen::Matrix<double, Eigen::Dynamic, 2>& a,
              const Eigen::VectorXd& b, Vec2& x);

Vec2 ap_newton(const Mat2& w, const Vec2& v, double mu, double eps);
Vec2 ap_poisson(const Mat2& w, const Vec2& v, double mu, double eps);
Vec2 drumwright_shell(const Mat2& w, const Vec2& v, double mu, double eps);
Vec2 wang_mason(const Mat2& w, const Vec2& v, double mu, double eps);
Vec2 mirtich(const Mat2& w, const Vec2& v, double mu, double eps);
Vec2 whittaker(const Mat2& w, const Vec2& v, double mu, double eps);

}  // namespace impactlab::detail
