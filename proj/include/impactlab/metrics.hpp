#pragma once

#include <string>

#include "impactlab/types.hpp"

namespace impactlab {

/// Which velocity components enter the l2 error.
enum class VelocityComponents {
  /// (xdot, ydot) only: the center-of-mass velocity.
  Linear,
  /// (xdot, ydot, thetadot * L) with L = sqrt(I / m).
  Scaled,
};

struct ErrorMetric {
  VelocityComponents components = VelocityComponents::Linear;
  /// Divide by the same norm of the pre-impact velocity.
  bool normalized = true;

  /// Per-component weights applied before taking the norm.
  Vec3 weights(const BodyParams& body) const;
  std::string describe() const;
  static ErrorMetric parse(const std::string& text);
};

/// l2 error between a predicted and the recorded post-impact velocity.
/// Throws DegenerateInput for a zero pre-impact velocity in normalized mode.
double velocity_error(const ImpactTrial& trial, const Vec3& v_post_predicted,
                      const ErrorMetric& metric = {});

}  // namespace impactlab
