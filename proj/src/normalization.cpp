#include "normalization.hpp"

#include <cmath>

namespace uscal::detail {

namespace {

double rms_distance(const std::vector<Point3>& pts, const Point3& center) {
  double sum = 0.0;
  for (const auto& p : pts) sum += (p - center).squaredNorm();
  const double rms = std::sqrt(sum / static_cast<double>(pts.size()));
  return rms > 0.0 ? rms : 1.0;
}

Point3 centroid(const std::vector<Point3>& pts) {
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

template <typename Acq>
double tracked_rms(std::span<const Acq> acqs, const Point3& anchor) {
  std::vector<Point3> pts;
  for (const auto& a : acqs) {
    pts.push_back(a.tracked_line.p0());
    pts.push_back(a.tracked_line.p1());
  }
  return rms_distance(pts, anchor);
}

}  // namespace

Acquisition3D Normalizer::apply(const Acquisition3D& acq) const {
  return Acquisition3D(tracked(acq.tracked_line), us(acq.us_points[0]), us(acq.us_points[1]));
}

Acquisition2D Normalizer::apply(const Acquisition2D& acq) const {
  const Point3 x = us(acq.embedded());
  return Acquisition2D(tracked(acq.tracked_line), x.head<2>());
}

Similarity Normalizer::denormalize(const Similarity& a) const {
  const Similarity from_tracked(Eigen::Quaterniond::Identity(), anchor, tracked_scale);
  const Similarity to_us(Eigen::Quaterniond::Identity(), -us_center / us_scale, 1.0 / us_scale);
  return from_tracked * a * to_us;
}

HomMatrix4 Normalizer::denormalize(const HomMatrix4& a) const {
  HomMatrix4 from_tracked = HomMatrix4::Identity();
  from_tracked.topLeftCorner<3, 3>() *= tracked_scale;
  from_tracked.topRightCorner<3, 1>() = anchor;
  HomMatrix4 to_us = HomMatrix4::Identity();
  to_us.topLeftCorner<3, 3>() /= us_scale;
  to_us.topRightCorner<3, 1>() = -us_center / us_scale;
  return from_tracked * a * to_us;
}

Normalizer make_normalizer(std::span<const Acquisition3D> acqs, const Point3& anchor) {
  Normalizer n;
  n.anchor = anchor;
  n.tracked_scale = tracked_rms(acqs, anchor);
  std::vector<Point3> us;
  for (const auto& a : acqs) {
    us.push_back(a.us_points[0]);
    us.push_back(a.us_points[1]);
  }
  n.us_center = centroid(us);
  n.us_scale = rms_distance(us, n.us_center);
  return n;
}

Normalizer make_normalizer(std::span<const Acquisition2D> acqs, const Point3& anchor) {
  Normalizer n;
  n.anchor = anchor;
  n.tracked_scale = tracked_rms(acqs, anchor);
  std::vector<Point3> us;
  for (const auto& a : acqs) us.push_back(a.embedded());
  n.us_center = centroid(us);
  n.us_scale = rms_distance(us, n.us_center);
  return n;
}

}  // namespace uscal::detail
