#pragma once

#include <functional>

#include "impactlab/types.hpp"

namespace impactlab {

struct NelderMeadOptions {
  int max_evaluations = 2000;
  /// Stop when both the simplex spread in f and its diameter fall below these.
  double f_tolerance = 1e-15;
  double x_tolerance = 1e-11;
};

struct NelderMeadResult {
  Vec2 x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Box-constrained 2-D Nelder-Mead: trial points are projected onto [lo, hi]
/// before evaluation. Deterministic for a given start and step.
NelderMeadResult nelder_mead_2d(const std::function<double(const Vec2&)>& f, const Vec2& start,
                                const Vec2& step, const Vec2& lo, const Vec2& hi,
                                const NelderMeadOptions& options = {});

}  // namespace impactlab
