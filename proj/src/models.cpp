#include "impactlab/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "contact_laws.hpp"

namespace impactlab {

namespace {

struct ModelNames {
  ModelId id;
  std::string_view key;
  std::string_view display;
};

constexpr std::array<ModelNames, 6> kNames = {{
    {ModelId::APNewton, "ap-newton", "AP Newton"},
    {ModelId::APPoisson, "ap-poisson", "AP Poisson"},
    {ModelId::DrumwrightShell, "drumwright-shell", "DrumShell"},
    {ModelId::Mirtich, "mirtich", "Mirtich"},
    {ModelId::WangMason, "wang-mason", "Wang-Mason"},
    {ModelId::Whittaker, "whittaker", "Whittaker"},
}};

// Tighter than the public admissibility tolerance so that predictions remain
// admissible after the caller recomputes the ellipse in body coordinates.
constexpr double kGuardTol = 1e-11;

Vec2 raw_impulse(ModelId model, const Mat2& w, const Vec2& v, double mu, double eps) {
  switch (model) {
    case ModelId::APNewton:
      return detail::ap_newton(w, v, mu, eps);
    case ModelId::APPoisson:
      return detail::ap_poisson(w, v, mu, eps);
    case ModelId::DrumwrightShell:
      return detail::drumwright_shell(w, v, mu, eps);
    case ModelId::Mirtich:
      return detail::mirtich(w, v, mu, eps);
    case ModelId::WangMason:
      return detail::wang_mason(w, v, mu, eps);
    case ModelId::Whittaker:
      return detail::whittaker(w, v, mu, eps);
  }
  throw InvalidInput("unknown model id");
}

bool admissible(const Mat2& w, const Vec2& v, double incident_energy, const Vec2& p) {
  const Vec2 vf = v + w * p;
  const Mat2 mc = w.inverse();
  return vf.dot(mc * vf) <= (1.0 + kGuardTol) * incident_energy &&
         vf.y() >= -kGuardTol * v.norm();
}

}  // namespace

std::string_view to_string(ModelId id) {
  for (const auto& n : kNames) {
    if (n.id == id) return n.key;
  }
  return "unknown";
}

std::string_view display_name(ModelId id) {
  for (const auto& n : kNames) {
    if (n.id == id) return n.display;
  }
  return "unknown";
}

ModelId parse_model_id(std::string_view text) {
  std::string lower(text);
  std::ranges::transform(lower, lower.begin(), [](unsigned char c) {
    return c == '_' ? '-' : static_cast<char>(std::tolower(c));
  });
  for (const auto& n : kNames) {
    if (n.key == lower) return n.id;
  }
  throw InvalidInput("unknown contact model '" + std::string(text) + "'");
}

void ModelParams::validate(double mu_max) const {
  if (!(mu >= 0.0 && mu <= mu_max)) {
    throw InvalidInput("friction coefficient outside [0, mu_max]");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw InvalidInput("restitution coefficient outside [0, 1]");
  }
}

ContactProblem ContactProblem::from(const BodyParams& body, const ContactGeometry& contact,
                                    const Vec3& v_pre) {
  return {contact_mobility(body, contact), contact_velocity(contact, v_pre)};
}

// Newton and Poisson restitution can add energy when the normal and
// tangential directions are coupled. Such predictions are replaced by the
// model's own prediction at the largest restitution coefficient that stays
// admissible (found by bisection; eps = 0 never adds energy).
Vec2 predict_contact_impulse(ModelId model, const ModelParams& params,
                             const ContactProblem& problem) {
  const Mat2& w = problem.mobility;
  const Vec2& v = problem.velocity;
  if (!(v.y() < 0.0)) throw NoImpact("contact point is not approaching the surface");
  if (!std::isfinite(params.mu) || params.mu < 0.0) {
    throw InvalidInput("friction coefficient must be finite and non-negative");
  }
  const double eps = std::clamp(params.eps, 0.0, 1.0);

  const double energy = v.dot(w.inverse() * v);
  Vec2 p = raw_impulse(model, w, v, params.mu, eps);
  if (admissible(w, v, energy, p)) return p;

  double lo = 0.0;
  double hi = eps;
  Vec2 p_lo = raw_impulse(model, w, v, params.mu, 0.0);
  for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec2 p_mid = raw_impulse(model, w, v, params.mu, mid);
    if (admissible(w, v, energy, p_mid)) {
      lo = mid;
      p_lo = p_mid;
    } else {
      hi = mid;
    }
  }
  return p_lo;
}

Impulse2 predict_impulse(ModelId model, const ModelParams& params, const BodyParams& body,
                         const ContactGeometry& contact, const Vec3& v_pre) {
  return Impulse2::from(
      predict_contact_impulse(model, params, ContactProblem::from(body, contact, v_pre)));
}

Vec3 predict_post_velocity(ModelId model, const ModelParams& params, const BodyParams& body,
                           const ContactGeometry& contact, const Vec3& v_pre) {
  return apply_impulse(body, contact, v_pre, predict_impulse(model, params, body, contact, v_pre));
}

BestPostHocResult best_post_hoc(std::span<const ImpactTrial> trials, const ModelParamMap& params,
                                const ErrorMetric& metric) {
  if (trials.empty()) throw InvalidInput("best post hoc needs at least one trial");
  if (params.empty()) throw InvalidInput("best post hoc needs identified models");

  BestPostHocResult out;
  for (const auto& [id, p] : params) out.models.push_back(id);  // map order == enum order
  out.model_errors.assign(out.models.size(), std::vector<double>(trials.size(), 0.0));
  out.per_trial.resize(trials.size());

  double total = 0.0;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const ImpactTrial& trial = trials[t];
    PostHocChoice best{out.models.front(), std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < out.models.size(); ++k) {
      const ModelId id = out.models[k];
      const Vec3 v_post =
          predict_post_velocity(id, params.at(id), trial.body, trial.contact, trial.pre.v);
      const double err = velocity_error(trial, v_post, metric);
      out.model_errors[k][t] = err;
      if (err < best.error) best = {id, err};
    }
    out.per_trial[t] = best;
    total += best.error;
  }
  out.mean_error = total / static_cast<double>(trials.size());
  return out;
}

namespace {

double golden_minimize(const auto& f, double a, double b, double tol) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace

// The residual is affine in the impulse and the admissible set (energy
// ellipse intersected with the non-penetration half-plane) is convex, so the
// problem has a unique minimum: either the unconstrained least-squares
// impulse, a point on the maximum-compression chord, or a point on the
// separating arc of the ellipse boundary.
IrbResult irb_bound(const ImpactTrial& trial, const IrbOptions& options) {
  const BodyParams& body = trial.body;
  const ContactGeometry& contact = trial.contact;
  const Vec3 weights = options.metric.weights(body);

  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = weights.cwiseProduct(apply_impulse(body, contact, Vec3::Zero(), {1.0, 0.0}));
  a.col(1) = weights.cwiseProduct(apply_impulse(body, contact, Vec3::Zero(), {0.0, 1.0}));
  const Vec3 b = weights.cwiseProduct(trial.post.v - trial.pre.v);
  auto residual = [&](const Vec2& p) { return (a * p - b).squaredNorm(); };

  auto finish = [&](const Vec2& p) {
    IrbResult out;
    out.impulse = Impulse2::from(p);
    out.error =
        velocity_error(trial, apply_impulse(body, contact, trial.pre.v, out.impulse), options.metric);
    return out;
  };

  const Mat2 g = a.transpose() * a;  // full rank: the linear rows alone are I / m
  const Vec2 p_ls = g.ldlt().solve(a.transpose() * b);
  if (!options.constrained) return finish(p_ls);

  const EnergyEllipse ellipse(body, contact, trial.pre.v);
  const Mat2& w = ellipse.mobility();
  const Mat2& mc = ellipse.contact_inertia();
  const Vec2& vc = ellipse.incident_velocity();
  const double e0 = ellipse.incident_energy();

  {
    const Vec2 vf = vc + w * p_ls;
    if (vf.dot(mc * vf) <= e0 && vf.y() >= 0.0) return finish(p_ls);
  }

  // Chord of zero separating velocity through the ellipse center.
  const Vec2 center = -(mc * vc);
  Vec2 dir(w(1, 1), -w(1, 0));
  dir.normalize();
  const double t_max = std::sqrt(e0 / dir.dot(w * dir));
  const Vec3 ad = a * dir;
  double t_star = ad.dot(b - a * center) / ad.squaredNorm();
  t_star = std::clamp(t_star, -t_max, t_max);
  Vec2 best = center + t_star * dir;
  double best_f = residual(best);

  // Separating arc of the ellipse boundary, in post-velocity coordinates
  // u = sqrt(e0) L^-T (cos th, sin th) with M_c = L L^T.
  const Eigen::LLT<Mat2> llt(mc);
  const Mat2 l_inv_t = llt.matrixL().transpose().toDenseMatrix().inverse();
  const double radius = std::sqrt(e0);
  auto arc_point = [&](double th) {
    const Vec2 u = radius * (l_inv_t * Vec2(std::cos(th), std::sin(th)));
    return Vec2(mc * (u - vc));
  };
  const Vec2 n_row = l_inv_t.row(1).transpose();  // u_n = radius * n_row . (cos, sin)
  const double phi = std::atan2(n_row.y(), n_row.x());
  const double lo = phi - 0.5 * std::numbers::pi;
  const double hi = phi + 0.5 * std::numbers::pi;
  auto arc_f = [&](double th) { return residual(arc_point(th)); };

  constexpr int kSamples = 1024;
  const double h = (hi - lo) / kSamples;
  int best_i = 0;
  double best_sample = arc_f(lo);
  for (int i = 1; i <= kSamples; ++i) {
    const double f = arc_f(lo + i * h);
    if (f < best_sample) {
      best_sample = f;
      best_i = i;
    }
  }
  const double a_th = lo + std::max(best_i - 1, 0) * h;
  const double b_th = lo + std::min(best_i + 1, kSamples) * h;
  const double th = golden_minimize(arc_f, a_th, b_th, 1e-14);
  const Vec2 arc_best = arc_point(th);
  const double arc_fv = residual(arc_best);
  if (arc_fv < best_f) {
    best = arc_best;
    best_f = arc_fv;
  }
  return finish(best);
}

}  // namespace impactlab
