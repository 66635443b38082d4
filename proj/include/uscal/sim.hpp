#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::sim {

enum class Method { kLinear3d, kMinimal3d, kLinear2d, kMinimal2d, kMinimal2dGeneral };

std::string_view to_string(Method m);
/// Throws kParseError for unknown tags.
Method method_from_string(std::string_view tag);
bool is_3d(Method m);
/// Acquisitions consumed by one RANSAC sample.
int sample_size(Method m);

struct SimConfig {
  double scale_gt = 0.24;
  int n_lines = 50;
  double segment_length_mm = 400.0;
  double noise_us_sigma = 1.0;        // US units
  double noise_track_sigma_mm = 1.0;
  int trials_per_n = 100;
  int n_min_3d = 3;
  int n_max_3d = 10;
  int n_min_2d = 5;
  int n_max_2d = 10;
  std::uint64_t rng_seed = 42;

  double fov_radius_mm = 120.0;
  double fov_aperture_deg = 60.0;
  double slice_angle_deg = 15.0;
  double ransac_threshold_mm = 5.0;
  int ransac_max_iterations = 500;
  bool refine = true;  // false reports the raw consensus model
  std::vector<Method> methods = {Method::kLinear3d, Method::kMinimal3d, Method::kLinear2d,
                                 Method::kMinimal2d, Method::kMinimal2dGeneral};

  /// Throws kInvariantViolation on non-positive counts or negative sigmas.
  void validate() const;
};

struct Scene {
  Similarity truth;
  std::vector<Acquisition3D> pool3d;
  std::vector<Acquisition2D> pool2d;
};

/// Draws a ground truth and `n_lines` needle segments crossing the field of
/// view, with noisy detections and endpoints. The marker origin is the anchor
/// and every line keeps a clearance of 20 mm from it.
Scene generate_scene(const SimConfig& cfg, std::mt19937_64& rng);

struct TrialReport {
  Method method = Method::kLinear3d;
  int n_used = 0;
  int trial = 0;
  double rot_err_rad = 0.0;
  double trans_err_mm = 0.0;
  double scale_err = 0.0;
  bool failed = false;

  bool operator==(const TrialReport&) const = default;
};

/// Independent stream for one (N, trial) cell.
std::mt19937_64 trial_stream(std::uint64_t seed, int n, int trial);

/// Runs RANSAC then, unless `refine_result` is false, refinement on the
/// inliers (on every acquisition when the consensus is smaller than a
/// minimal set) for one method.
Similarity calibrate_once(Method m, std::span<const Acquisition3D> acqs3d,
                          std::span<const Acquisition2D> acqs2d, double threshold_mm,
                          int max_iterations, std::uint64_t seed, bool refine_result = true);

/// Every trial of every method, ordered by (N, trial, method).
std::vector<TrialReport> run_experiment(const SimConfig& cfg);

struct Medians {
  double rot_err_rad = 0.0;
  double trans_err_mm = 0.0;
  double scale_err = 0.0;
  int used = 0;
  int failed = 0;
};

/// Medians over non-failed trials of one (method, N) cell.
Medians medians(std::span<const TrialReport> reports, Method m, int n);

/// Projection reconstruction accuracy ||A X - P|| in mm.
double pra(const Similarity& a, const Point3& us_point, const Point3& tracked_point);

struct PhantomPoint {
  Point3 us_point;       // US units
  Point3 tracked_point;  // marker frame, mm
};

/// Crossed-wire style targets inside the field of view, measured with the
/// configured noise on both sides. 2D targets lie on z = 0.
std::vector<PhantomPoint> generate_phantom(const Similarity& truth, const SimConfig& cfg, int count,
                                           bool planar, std::mt19937_64& rng);

struct PraStudy {
  std::vector<double> calibrated;   // PRA of the estimated calibrations
  std::vector<double> noise_floor;  // PRA of the true calibration on the same noisy targets
  int failed_calibrations = 0;
};

/// Calibrates from `n` noisy acquisitions per trial and evaluates PRA on a
/// fresh phantom; the ground-truth PRA on the same targets is the floor.
PraStudy phantom_pra_study(const SimConfig& cfg, Method m, int n, int trials, int points_per_trial);

double median(std::vector<double> values);

}  // namespace uscal::sim
