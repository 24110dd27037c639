#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "impactlab/types.hpp"

namespace impactlab {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Synthetic drop experiment: an ellipse falling onto the ground plane y = 0
/// with a penalty spring-damper contact and regularized Coulomb friction.
struct GenConfig {
  std::size_t n_trials = 500;
  std::uint64_t seed = 0;

  double mass = 0.04;  // kg
  EllipseShape shape;
  /// Moment of inertia; <= 0 means a uniform solid ellipse.
  double inertia = 0.0;

  double stiffness = 1e6;  // N/m
  double damping = 80.0;   // N s/m
  double mu_true = 0.1;
  double v_reg = 0.01;  // m/s
  double gravity = 9.81;

  // initial conditions, sampled uniformly
  Range clearance{0.0005, 0.003};  // gap between the lowest point and the ground, m
  Range vx{-1.0, 1.0};
  Range vy{-2.5, -0.8};
  Range omega{-25.0, 25.0};
  Range theta{-3.141592653589793, 3.141592653589793};

  /// Gaussian measurement noise on (xdot, ydot, thetadot), pre and post.
  std::array<double, 3> noise_std{0.0, 0.0, 0.0};

  double dt = 1e-6;        // s
  double horizon = 0.05;   // s, time allowed to reach the ground
  double post_window = 0.005;  // s, a second contact inside this window rejects the trial

  BodyParams body() const;
  /// Throws InvalidInput, naming the offending field.
  void validate() const;
};

/// Parse a TOML (or, for a ".json" path, JSON) config file. Missing keys keep
/// their defaults; unknown keys and type errors throw InvalidInput with the
/// key and source position.
GenConfig load_gen_config(const std::filesystem::path& path);
GenConfig parse_gen_config_toml(const std::string& text, const std::string& source = "<string>");
GenConfig parse_gen_config_json(const std::string& text, const std::string& source = "<string>");
std::string gen_config_to_json(const GenConfig& config);

/// Lowest point of the ellipse relative to its center, for orientation theta.
Vec2 support_offset(const EllipseShape& shape, double theta);

enum class SimOutcome { Accepted, NoContact, MultiImpact };

struct SimResult {
  SimOutcome outcome = SimOutcome::NoContact;
  ImpactTrial trial;
  /// Total mechanical energy (kinetic + gravitational) at force onset and
  /// offset, from the raw integrator state.
  double energy_onset = 0.0;
  double energy_offset = 0.0;
  std::size_t contact_steps = 0;
};

/// Integrate one drop. The pre state is taken at contact-force onset; the post
/// velocity at offset, with the gravity impulse over the event removed so the
/// velocity change is due to contact alone. post.q = pre.q.
SimResult simulate_impact(const GenConfig& config, const PlanarState& initial);

struct GenStats {
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t no_contact = 0;
  std::size_t multi_impact = 0;
};

/// n_trials accepted drops. Each attempt draws from its own seeded stream, so
/// the result is a pure function of the config regardless of thread count.
Dataset generate_dataset(const GenConfig& config, GenStats* stats = nullptr, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "trial_id,m,I,rx,ry,qx,qy,qth,vx_pre,vy_pre,w_pre,vx_post,vy_post,w_post";

struct LoadResult {
  Dataset trials;
  /// One entry per flagged trial, with its line (CSV) or index (JSON).
  std::vector<std::string> warnings;
};

void write_dataset_csv(std::ostream& out, const Dataset& dataset);
void write_dataset_json(std::ostream& out, const Dataset& dataset);
/// Malformed content throws DataError with the line number.
LoadResult read_dataset_csv(std::istream& in);
LoadResult read_dataset_json(std::istream& in);

/// Format chosen by extension: ".json" or anything else as CSV.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
LoadResult load_dataset(const std::filesystem::path& path);

}  // namespace impactlab
