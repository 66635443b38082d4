#pragma once

#include <span>

#include <Eigen/Dense>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::calib2d {

using Vector10 = Eigen::Matrix<double, 10, 1>;
using ConstraintRows = Eigen::Matrix<double, 2, 10>;

/// Reduced affine map of the z = 0 scan plane: rows 0-2 are [c1 c2 t] and
/// row 3 is [0 0 h].
using ReducedAffine = Eigen::Matrix<double, 4, 3>;

/// Scan plane z = k used to embed 2D detections for the general minimal
/// route. k = 0 is accepted and surfaces as kSingularC; negative k is rejected.
struct ScanPlane {
  double k = 1.0;
};

/// Flattens A-bar as [c1x c2x tx c1y c2y ty c1z c2z tz h].
Vector10 vec_from_reduced(const ReducedAffine& a);
ReducedAffine reduced_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v);
ReducedAffine reduced_from_similarity(const Similarity& a);

/// Rows (Pi, X) and (Pi*, X) over the flattened A-bar.
ConstraintRows constraint_rows_2d(const Acquisition2D& acq, const Point3& anchor);

/// QR projection of [c1 c2] onto s [r1 r2]; r3 = r1 x r2.
Similarity project_to_similarity_2d(const ReducedAffine& a);

/// Linear solution from >= 5 point-line correspondences.
Similarity solve_linear_2d(std::span<const Acquisition2D> acqs, const Point3& anchor);

/// 3D action-matrix route with detections embedded on z = plane.k; up to 8
/// candidates.
SolutionSet solve_minimal_2d_general(std::span<const Acquisition2D> acqs, const Point3& anchor,
                                     ScanPlane plane = {});

/// Dedicated two-conic route on the reduced system; up to 4 candidates,
/// ordered by their residual on all 8 incidence rows.
SolutionSet solve_minimal_2d(std::span<const Acquisition2D> acqs, const Point3& anchor);

}  // namespace uscal::calib2d
