#pragma once

#include <span>

#include <Eigen/Dense>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::calib3d {

using Vector13 = Eigen::Matrix<double, 13, 1>;
using ConstraintRows = Eigen::Matrix<double, 4, 13>;

/// Flattens A as [S00 S01 S02 t0 S10 S11 S12 t1 S20 S21 S22 t2 h].
Vector13 vec_from_hom(const HomMatrix4& a);
HomMatrix4 hom_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Row of pi^T A X over the flattened A.
Eigen::Matrix<double, 1, 13> incidence_row(const Plane& plane, const Point3& x);

/// Four incidence rows of one line-line correspondence, ordered
/// (Pi, X), (Pi*, X), (Pi, X*), (Pi*, X*).
ConstraintRows constraint_rows_3d(const Acquisition3D& acq, const Point3& anchor);

/// Linear solution from >= 3 correspondences.
Similarity solve_linear_3d(std::span<const Acquisition3D> acqs, const Point3& anchor);

/// Minimal solution from exactly 2 correspondences; up to 8 candidates.
SolutionSet solve_minimal_3d(std::span<const Acquisition3D> acqs, const Point3& anchor);

/// The 7 x 13 system the minimal solver works on: both correspondences in
/// normalized coordinates, with the (Pi*, X*) row of the second one left out.
Eigen::MatrixXd minimal_rows_3d(std::span<const Acquisition3D> acqs, const Point3& anchor);

/// Runs the action-matrix pipeline on a 7 x 13 constraint system and returns
/// the similarity-consistent affine candidates (homogeneous entry 1). Shared
/// by the 3D minimal solver and the general 2D route.
std::vector<HomMatrix4> minimal_candidates(const Eigen::MatrixXd& rows7);

}  // namespace uscal::calib3d
