#pragma once

#include <utility>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace uscal {

using Point3 = Eigen::Vector3d;
using HomMatrix4 = Eigen::Matrix4d;

inline constexpr double kLineEpsilon = 1e-6;    // mm
inline constexpr double kAnchorEpsilon = 1e-3;  // mm

/// A 3D line carried as two distinct points. Throws kDegenerateLine when the
/// points are closer than kLineEpsilon or non-finite.
class Line3 {
 public:
  Line3(const Point3& p0, const Point3& p1);

  const Point3& p0() const { return p0_; }
  const Point3& p1() const { return p1_; }
  Eigen::Vector3d direction() const { return (p1_ - p0_).normalized(); }

 private:
  Point3 p0_;
  Point3 p1_;
};

/// Plane as (n, d) with unit normal; P lies on the plane iff n.P + d = 0.
class Plane {
 public:
  /// Normalizes the homogeneous vector so that the normal has unit length.
  explicit Plane(const Eigen::Vector4d& hom);

  const Eigen::Vector4d& hom() const { return hom_; }
  Eigen::Vector3d normal() const { return hom_.head<3>(); }
  double offset() const { return hom_(3); }
  double signed_distance(const Point3& p) const { return normal().dot(p) + offset(); }

 private:
  Eigen::Vector4d hom_;
};

/// Similarity transform P = s R X + t. The rotation is stored as a unit
/// quaternion and exposed as a matrix.
class Similarity {
 public:
  Similarity();
  Similarity(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation, double scale);
  Similarity(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation, double scale);

  static Similarity identity() { return Similarity(); }

  const Eigen::Quaterniond& quaternion() const { return rotation_; }
  Eigen::Matrix3d rotation() const { return rotation_.toRotationMatrix(); }
  const Eigen::Vector3d& translation() const { return translation_; }
  double scale() const { return scale_; }

  /// The scaled rotation block S = s R.
  Eigen::Matrix3d scaled_rotation() const { return scale_ * rotation(); }
  HomMatrix4 to_homogeneous() const;

  Point3 apply(const Point3& x) const { return scale_ * (rotation_ * x) + translation_; }
  Similarity inverse() const;

  /// Composition (this * other)(x) = this(other(x)).
  Similarity operator*(const Similarity& other) const;

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
  double scale_;
};

Point3 apply_similarity(const Similarity& a, const Point3& x);

/// Returns the pair (plane through the line and the anchor, plane through the
/// line orthogonal to the first). Throws kDegenerateAnchor when the anchor is
/// within kAnchorEpsilon of the line.
std::pair<Plane, Plane> planes_from_line(const Line3& line, const Point3& anchor);

/// Orthogonal distance from p to the infinite line.
double line_point_distance(const Line3& line, const Point3& p);

/// Projects an affine 4x4 estimate onto the nearest similarity by QR of the
/// upper-left block. The matrix is first divided by its homogeneous entry.
/// Throws kHomogeneousCollapse for a vanishing homogeneous entry and
/// kSingularBlock for a rank-deficient 3x3 block.
Similarity project_to_similarity_3d(const HomMatrix4& a_lin);

/// Angle of the residual rotation R^T R_gt, in [0, pi].
double rotation_error(const Eigen::Matrix3d& r, const Eigen::Matrix3d& r_gt);

}  // namespace uscal
