#pragma once

// Test-only scene construction. Independent of the sim module: ground truth
// is drawn directly and US detections are exact inverse images of the needle.

#include <cmath>
#include <random>
#include <vector>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::testing {

inline Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
}

/// Ground truth with the probe's scale; the marker origin sits well away from
/// the scanned volume.
inline Similarity random_truth(std::mt19937_64& rng, double scale = 0.24) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Quaterniond q = random_rotation(rng);
  // Marker origin expressed in US units, behind the probe apex.
  const Eigen::Vector3d marker_in_us(200.0 * u(rng), -600.0 + 100.0 * u(rng), 200.0 * u(rng));
  return Similarity(q, -scale * (q * marker_in_us), scale);
}

/// A point of the scanned region (US units): depth along +y.
inline Point3 random_us_point(std::mt19937_64& rng, bool planar) {
  std::uniform_real_distribution<double> depth(100.0, 450.0);
  std::uniform_real_distribution<double> lateral(-150.0, 150.0);
  return {lateral(rng), depth(rng), planar ? 0.0 : lateral(rng)};
}

/// Needle line in the marker frame through the mapped point `through_us`.
inline Line3 needle_through(const Similarity& truth, const Point3& through_us,
                            const Eigen::Vector3d& dir_m) {
  const Point3 c = truth.apply(through_us);
  return Line3(c - 200.0 * dir_m, c + 200.0 * dir_m);
}

inline std::vector<Acquisition3D> random_acquisitions_3d(std::mt19937_64& rng, const Similarity& truth,
                                                         int n) {
  std::vector<Acquisition3D> out;
  const Similarity inv = truth.inverse();
  while (static_cast<int>(out.size()) < n) {
    const Point3 x = random_us_point(rng, false);
    const Eigen::Vector3d dir = random_unit(rng);
    const Line3 line = needle_through(truth, x, dir);
    if (line_point_distance(line, Point3::Zero()) < 20.0) continue;
    // Second detection 30-120 US units further along the needle.
    std::uniform_real_distribution<double> step(30.0, 120.0);
    const Point3 x_star = inv.apply(truth.apply(x) + step(rng) * truth.scale() * dir);
    out.emplace_back(line, x, x_star);
  }
  return out;
}

inline std::vector<Acquisition2D> random_acquisitions_2d(std::mt19937_64& rng, const Similarity& truth,
                                                         int n) {
  std::vector<Acquisition2D> out;
  while (static_cast<int>(out.size()) < n) {
    const Point3 x = random_us_point(rng, true);
    const Line3 line = needle_through(truth, x, random_unit(rng));
    if (line_point_distance(line, Point3::Zero()) < 20.0) continue;
    out.emplace_back(line, x.head<2>());
  }
  return out;
}

struct PoseErrors {
  double rotation;
  double translation;
  double scale;
};

inline PoseErrors pose_errors(const Similarity& a, const Similarity& truth) {
  return {rotation_error(a.rotation(), truth.rotation()),
          (a.translation() - truth.translation()).norm(), std::abs(a.scale() - truth.scale())};
}

inline bool within(const PoseErrors& e, double rot, double trans, double scale) {
  return e.rotation < rot && e.translation < trans && e.scale < scale;
}

/// Smallest error over a candidate list, ranked by the sum of normalized errors.
template <typename Candidates>
PoseErrors best_errors(const Candidates& cands, const Similarity& truth) {
  PoseErrors best{1e300, 1e300, 1e300};
  double best_key = 1e300;
  for (const Similarity& c : cands) {
    const PoseErrors e = pose_errors(c, truth);
    const double key = e.rotation / 1e-6 + e.translation / 1e-5 + e.scale / 1e-8;
    if (key < best_key) {
      best_key = key;
      best = e;
    }
  }
  return best;
}

}  // namespace uscal::testing
