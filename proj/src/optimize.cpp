#include "impactlab/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace impactlab {

NelderMeadResult nelder_mead_2d(const std::function<double(const Vec2&)>& f, const Vec2& start,
                                const Vec2& step, const Vec2& lo, const Vec2& hi,
                                const NelderMeadOptions& options) {
  auto project = [&](Vec2 x) { return Vec2(x.cwiseMax(lo).cwiseMin(hi)); };

  struct Vertex {
    Vec2 x;
    double f;
  };
  int evals = 0;
  auto eval = [&](const Vec2& x) {
    ++evals;
    return Vertex{x, f(x)};
  };

  // Steps that would leave the box are flipped so the simplex is not degenerate.
  const Vec2 x0 = project(start);
  Vec2 e1 = x0 + Vec2(step.x(), 0.0);
  if (e1.x() > hi.x()) e1.x() = x0.x() - step.x();
  Vec2 e2 = x0 + Vec2(0.0, step.y());
  if (e2.y() > hi.y()) e2.y() = x0.y() - step.y();
  std::array<Vertex, 3> s = {eval(x0), eval(project(e1)), eval(project(e2))};

  bool converged = false;
  while (evals < options.max_evaluations) {
    std::ranges::sort(s, {}, &Vertex::f);
    const double spread = s[2].f - s[0].f;
    const double diameter =
        std::max((s[1].x - s[0].x).cwiseAbs().maxCoeff(), (s[2].x - s[0].x).cwiseAbs().maxCoeff());
    if (spread <= options.f_tolerance * (1.0 + std::abs(s[0].f)) && diameter <= options.x_tolerance) {
      converged = true;
      break;
    }
    if (diameter == 0.0) break;

    const Vec2 centroid = 0.5 * (s[0].x + s[1].x);
    const Vertex reflected = eval(project(centroid + (centroid - s[2].x)));
    if (reflected.f < s[0].f) {
      const Vertex expanded = eval(project(centroid + 2.0 * (centroid - s[2].x)));
      s[2] = expanded.f < reflected.f ? expanded : reflected;
      continue;
    }
    if (reflected.f < s[1].f) {
      s[2] = reflected;
      continue;
    }
    const bool outside = reflected.f < s[2].f;
    const Vec2 toward = outside ? reflected.x : s[2].x;
    const Vertex contracted = eval(project(centroid + 0.5 * (toward - centroid)));
    if (contracted.f < std::min(reflected.f, s[2].f)) {
      s[2] = contracted;
      continue;
    }
    if (outside) {
      s[2] = reflected;
    }
    // shrink toward the best vertex
    s[1] = eval(s[0].x + 0.5 * (s[1].x - s[0].x));
    s[2] = eval(s[0].x + 0.5 * (s[2].x - s[0].x));
  }
  std::ranges::sort(s, {}, &Vertex::f);
  return {s[0].x, s[0].f, evals, converged};
}

}  // namespace impactlab
