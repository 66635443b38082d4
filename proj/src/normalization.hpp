#pragma once

#include <span>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::detail {

// Conditioning transforms applied before assembling the linear systems:
// tracked coordinates P' = (P - anchor) / tracked_scale and US coordinates
// X' = (X - us_center) / us_scale. Both are similarities, so a similarity
// solved in normalized coordinates maps back to a similarity.
struct Normalizer {
  Point3 anchor = Point3::Zero();
  double tracked_scale = 1.0;
  Point3 us_center = Point3::Zero();
  double us_scale = 1.0;

  Point3 tracked(const Point3& p) const { return (p - anchor) / tracked_scale; }
  Line3 tracked(const Line3& l) const { return Line3(tracked(l.p0()), tracked(l.p1())); }
  Point3 us(const Point3& x) const { return (x - us_center) / us_scale; }

  Acquisition3D apply(const Acquisition3D& acq) const;
  Acquisition2D apply(const Acquisition2D& acq) const;

  /// Maps a transform estimated in normalized coordinates back to raw ones.
  Similarity denormalize(const Similarity& a) const;
  HomMatrix4 denormalize(const HomMatrix4& a) const;
};

Normalizer make_normalizer(std::span<const Acquisition3D> acqs, const Point3& anchor);
// The US center keeps z = 0 so the scan plane stays z = 0.
Normalizer make_normalizer(std::span<const Acquisition2D> acqs, const Point3& anchor);

}  // namespace uscal::detail
