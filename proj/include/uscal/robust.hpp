#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uscal/acquisition.hpp"
#include "uscal/calib2d.hpp"
#include "uscal/geometry.hpp"

namespace uscal::robust {

struct RansacConfig {
  double threshold = 5.0;  // mm
  int max_iterations = 500;
  int min_inliers = 0;  // 0 accepts the best candidate whatever its support
  double confidence = 0.999;
  std::uint64_t rng_seed = 0;

  /// Throws kInvariantViolation on out-of-range settings.
  void validate() const;
};

struct RansacResult {
  Similarity model;
  std::vector<bool> inlier_mask;
  int iterations_used = 0;
  double mean_inlier_residual = 0.0;  // mm

  int num_inliers() const;
};

/// A solver usable inside RANSAC: consumes exactly `sample_size`
/// acquisitions and returns every candidate it produces.
template <typename Acq>
struct SolverHandle {
  std::string name;
  int sample_size = 0;
  std::function<std::vector<Similarity>(std::span<const Acq>)> solve;
};

using SolverHandle3D = SolverHandle<Acquisition3D>;
using SolverHandle2D = SolverHandle<Acquisition2D>;

SolverHandle3D linear_3d_solver(const Point3& anchor = Point3::Zero());
SolverHandle3D minimal_3d_solver(const Point3& anchor = Point3::Zero());
SolverHandle2D linear_2d_solver(const Point3& anchor = Point3::Zero());
SolverHandle2D minimal_2d_solver(const Point3& anchor = Point3::Zero());
SolverHandle2D minimal_2d_general_solver(const Point3& anchor = Point3::Zero(),
                                         calib2d::ScanPlane plane = {});

/// Consensus search scoring every candidate of every sample. Deterministic
/// for a fixed rng_seed. Throws kInsufficientData / kNoModelFound.
RansacResult ransac(std::span<const Acquisition3D> acqs, const SolverHandle3D& solver,
                    const RansacConfig& cfg);
RansacResult ransac(std::span<const Acquisition2D> acqs, const SolverHandle2D& solver,
                    const RansacConfig& cfg);

/// Mask of acquisitions whose residual under `model` is within `threshold`.
std::vector<bool> inlier_mask(std::span<const Acquisition3D> acqs, const Similarity& model,
                              double threshold);
std::vector<bool> inlier_mask(std::span<const Acquisition2D> acqs, const Similarity& model,
                              double threshold);

struct DegeneracyFlags {
  bool parallel = false;
  bool concurrent = false;
  bool coplanar = false;

  bool any() const { return parallel || concurrent || coplanar; }
  bool operator==(const DegeneracyFlags&) const = default;
};

inline constexpr double kParallelTolerance = 1e-3;    // rad
inline constexpr double kConcurrentTolerance = 1.0;   // mm
inline constexpr double kCoplanarTolerance = 1.0;     // mm

/// Flags the line configurations that leave a similarity parameter
/// unobservable: parallel (translation), concurrent (scale), coplanar.
DegeneracyFlags diagnose_degeneracy(std::span<const Line3> lines);
DegeneracyFlags diagnose_degeneracy(std::span<const Acquisition3D> acqs);
DegeneracyFlags diagnose_degeneracy(std::span<const Acquisition2D> acqs);

}  // namespace uscal::robust
