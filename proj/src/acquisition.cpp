#include "uscal/acquisition.hpp"

#include <cmath>

#include "uscal/error.hpp"

namespace uscal {

Acquisition3D::Acquisition3D(const Line3& line, const Point3& x, const Point3& x_star)
    : tracked_line(line), us_points{x, x_star} {
  if (!x.allFinite() || !x_star.allFinite()) {
    throw Error(ErrorCode::kInvariantViolation, "US points must be finite");
  }
  if ((x - x_star).norm() <= kLineEpsilon) {
    throw Error(ErrorCode::kInvariantViolation, "US points of a 3D acquisition must be distinct");
  }
}

Acquisition2D::Acquisition2D(const Line3& line, const Eigen::Vector2d& point)
    : tracked_line(line), us_point(point) {
  if (!point.allFinite()) {
    throw Error(ErrorCode::kInvariantViolation, "US detection must be finite");
  }
}

double residual_3d(const Similarity& a, const Acquisition3D& acq) {
  const double d0 = line_point_distance(acq.tracked_line, a.apply(acq.us_points[0]));
  const double d1 = line_point_distance(acq.tracked_line, a.apply(acq.us_points[1]));
  return std::sqrt(0.5 * (d0 * d0 + d1 * d1));
}

double residual_2d(const Similarity& a, const Acquisition2D& acq) {
  return line_point_distance(acq.tracked_line, a.apply(acq.embedded()));
}

}  // namespace uscal
