#include "impactlab/metrics.hpp"

namespace impactlab {

Vec3 ErrorMetric::weights(const BodyParams& body) const {
  const double angular =
      components == VelocityComponents::Scaled ? body.characteristic_length() : 0.0;
  return {1.0, 1.0, angular};
}

std::string ErrorMetric::describe() const {
  std::string out = components == VelocityComponents::Linear ? "linear" : "scaled";
  if (normalized) out += "-normalized";
  return out;
}

ErrorMetric ErrorMetric::parse(const std::string& text) {
  ErrorMetric metric;
  std::string head = text;
  constexpr std::string_view suffix = "-normalized";
  metric.normalized = head.size() > suffix.size() && head.ends_with(suffix);
  if (metric.normalized) head.resize(head.size() - suffix.size());
  if (head == "linear") {
    metric.components = VelocityComponents::Linear;
  } else if (head == "scaled") {
    metric.components = VelocityComponents::Scaled;
  } else {
    throw InvalidInput("unknown error metric '" + text +
                       "' (expected linear|scaled, optionally with -normalized)");
  }
  return metric;
}

double velocity_error(const ImpactTrial& trial, const Vec3& v_post_predicted,
                      const ErrorMetric& metric) {
  const Vec3 w = metric.weights(trial.body);
  const double err = (w.cwiseProduct(v_post_predicted - trial.post.v)).norm();
  if (!metric.normalized) return err;
  const double scale = w.cwiseProduct(trial.pre.v).norm();
  if (scale == 0.0) {
    throw DegenerateInput("normalized velocity error needs a nonzero pre-impact velocity");
  }
  return err / scale;
}

}  // namespace impactlab
