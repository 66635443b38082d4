#include "uscal/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "uscal/error.hpp"

namespace uscal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateLine: return "DegenerateLine";
    case ErrorCode::kDegenerateAnchor: return "DegenerateAnchor";
    case ErrorCode::kSingularBlock: return "SingularBlock";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kHomogeneousCollapse: return "HomogeneousCollapse";
    case ErrorCode::kEliminationFailure: return "EliminationFailure";
    case ErrorCode::kSingularC: return "SingularC";
    case ErrorCode::kNoRealSolutions: return "NoRealSolutions";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kNoModelFound: return "NoModelFound";
    case ErrorCode::kNonFiniteCost: return "NonFiniteCost";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
    case ErrorCode::kInvariantViolation:
    case ErrorCode::kDegenerateLine:
      return ErrorCategory::kInput;
    case ErrorCode::kDegenerateAnchor:
      return ErrorCategory::kGeometry;
    default:
      return ErrorCategory::kSolver;
  }
}

Line3::Line3(const Point3& p0, const Point3& p1) : p0_(p0), p1_(p1) {
  if (!p0.allFinite() || !p1.allFinite()) {
    throw Error(ErrorCode::kDegenerateLine, "line endpoints must be finite");
  }
  if ((p1 - p0).norm() <= kLineEpsilon) {
    throw Error(ErrorCode::kDegenerateLine, "line endpoints coincide");
  }
}

Plane::Plane(const Eigen::Vector4d& hom) {
  const double n = hom.head<3>().norm();
  if (!(n > 0.0) || !hom.allFinite()) {
    throw Error(ErrorCode::kInvariantViolation, "plane normal must be finite and nonzero");
  }
  hom_ = hom / n;
}

Similarity::Similarity()
    : rotation_(Eigen::Quaterniond::Identity()), translation_(Eigen::Vector3d::Zero()), scale_(1.0) {}

Similarity::Similarity(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation,
                       double scale)
    : rotation_(rotation.normalized()), translation_(translation), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kInvariantViolation, "similarity scale must be positive");
  }
  if (!rotation.coeffs().allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::kInvariantViolation, "similarity parameters must be finite");
  }
  // Canonical hemisphere keeps serialized output unique.
  if (rotation_.w() < 0.0) rotation_.coeffs() *= -1.0;
}

Similarity::Similarity(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                       double scale)
    : Similarity(Eigen::Quaterniond(rotation), translation, scale) {}

HomMatrix4 Similarity::to_homogeneous() const {
  HomMatrix4 a = HomMatrix4::Identity();
  a.topLeftCorner<3, 3>() = scaled_rotation();
  a.topRightCorner<3, 1>() = translation_;
  return a;
}

Similarity Similarity::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Similarity(inv, -(inv * translation_) / scale_, 1.0 / scale_);
}

Similarity Similarity::operator*(const Similarity& other) const {
  return Similarity(rotation_ * other.rotation_,
                    scale_ * (rotation_ * other.translation_) + translation_,
                    scale_ * other.scale_);
}

Point3 apply_similarity(const Similarity& a, const Point3& x) { return a.apply(x); }

std::pair<Plane, Plane> planes_from_line(const Line3& line, const Point3& anchor) {
  const Eigen::Vector3d dir = line.direction();
  const Eigen::Vector3d rel = line.p0() - anchor;
  // Perpendicular from the anchor to the line.
  const Eigen::Vector3d perp = rel - rel.dot(dir) * dir;
  const double dist = perp.norm();
  if (!(dist > kAnchorEpsilon)) {
    throw Error(ErrorCode::kDegenerateAnchor, "anchor lies on the tracked line");
  }
  const Eigen::Vector3d n = (perp / dist).cross(dir).normalized();
  const Eigen::Vector3d n_star = dir.cross(n).normalized();
  Eigen::Vector4d pi;
  pi << n, -n.dot(line.p0());
  Eigen::Vector4d pi_star;
  pi_star << n_star, -n_star.dot(line.p0());
  return {Plane(pi), Plane(pi_star)};
}

double line_point_distance(const Line3& line, const Point3& p) {
  return (p - line.p0()).cross(line.direction()).norm();
}

Similarity project_to_similarity_3d(const HomMatrix4& a_lin) {
  const double h = a_lin(3, 3);
  const double mag = a_lin.topRows<3>().norm();
  if (!(std::abs(h) > 1e-12 * std::max(mag, 1.0))) {
    throw Error(ErrorCode::kHomogeneousCollapse, "homogeneous entry vanishes");
  }
  const Eigen::Matrix3d s_block = a_lin.topLeftCorner<3, 3>() / h;
  const Eigen::Vector3d t = a_lin.topRightCorner<3, 1>() / h;

  Eigen::HouseholderQR<Eigen::Matrix3d> qr(s_block);
  Eigen::Matrix3d q = qr.householderQ();
  Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();

  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  if (!(rmax > 0.0) || r.diagonal().cwiseAbs().minCoeff() < 1e-12 * rmax) {
    throw Error(ErrorCode::kSingularBlock, "scaled rotation block is rank deficient");
  }
  for (int i = 0; i < 3; ++i) {
    if (r(i, i) < 0.0) {
      q.col(i) *= -1.0;
      r.row(i) *= -1.0;
    }
  }
  if (q.determinant() < 0.0) q.col(2) *= -1.0;
  const double s = r.diagonal().mean();
  return Similarity(q, t, s);
}

double rotation_error(const Eigen::Matrix3d& r, const Eigen::Matrix3d& r_gt) {
  // atan2 form of arccos((tr - 1) / 2); stays accurate near 0 and pi.
  const Eigen::Matrix3d d = r.transpose() * r_gt;
  const Eigen::Vector3d w(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double c = std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::atan2(0.5 * w.norm(), c);
}

}  // namespace uscal
