#pragma once

#include <array>
#include <span>
#include <vector>

#include "uscal/geometry.hpp"

namespace uscal {

/// One 3D US needle scan: the tracked needle line (marker frame, mm) and two
/// points on the needle detected in the US volume (US units).
struct Acquisition3D {
  Acquisition3D(const Line3& line, const Point3& x, const Point3& x_star);

  Line3 tracked_line;
  std::array<Point3, 2> us_points;
};

/// One 2D US needle scan: the tracked needle line and its single detection in
/// the image plane.
struct Acquisition2D {
  Acquisition2D(const Line3& line, const Eigen::Vector2d& point);

  Line3 tracked_line;
  Eigen::Vector2d us_point;

  /// The detection embedded on the scan plane z = 0.
  Point3 embedded() const { return {us_point.x(), us_point.y(), 0.0}; }
};

/// Root-mean-square orthogonal distance of the two mapped US points to the
/// tracked line (mm).
double residual_3d(const Similarity& a, const Acquisition3D& acq);

/// Orthogonal distance of the mapped detection to the tracked line (mm).
double residual_2d(const Similarity& a, const Acquisition2D& acq);

inline double residual(const Similarity& a, const Acquisition3D& acq) { return residual_3d(a, acq); }
inline double residual(const Similarity& a, const Acquisition2D& acq) { return residual_2d(a, acq); }

/// Discrete candidates emitted by a minimal solver, sorted by residual.
struct SolutionSet {
  std::vector<Similarity> candidates;
  std::vector<double> residuals;  // mean orthogonal distance, mm

  std::size_t size() const { return candidates.size(); }
  bool empty() const { return candidates.empty(); }
};

template <typename Acq>
double mean_residual(const Similarity& a, std::span<const Acq> acqs) {
  if (acqs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& acq : acqs) sum += residual(a, acq);
  return sum / static_cast<double>(acqs.size());
}

}  // namespace uscal
