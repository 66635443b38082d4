#include "uscal/calib3d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "normalization.hpp"
#include "uscal/error.hpp"
#include "uscal/polyengine.hpp"

namespace uscal::calib3d {

namespace {

constexpr double kRootCertificate = 1e-6;

std::vector<HomMatrix4> run_action_pipeline(const poly::NullspaceBasis& basis) {
  const poly::QuadraticSystem sys = poly::quadratic_constraints_3d(basis);
  const poly::ReducedTemplate tmpl = poly::expand_and_reduce_3d(sys);
  const poly::ActionMatrix action = poly::action_matrix(tmpl.c, tmpl.b);
  std::vector<HomMatrix4> out;
  for (const Eigen::VectorXd& x : poly::extract_solutions(action)) {
    Eigen::VectorXd coeffs(6);
    coeffs << x, 1.0;
    coeffs = poly::polish_root(sys, coeffs);
    Eigen::VectorXd v = basis.combine(coeffs);
    const double h = v(12);
    if (!(std::abs(h) > poly::kHomTolerance * v.norm())) continue;
    v /= h;
    const HomMatrix4 a = hom_from_vec(v);
    // Reflections satisfy the quadratic constraints too; drop them.
    if (!(a.topLeftCorner<3, 3>().determinant() > 0.0)) continue;
    // A root that polishing could not bring onto S^T S = s^2 I is not a
    // solution; projecting it would break the linear constraints instead.
    const Eigen::Matrix3d gram = a.topLeftCorner<3, 3>().transpose() * a.topLeftCorner<3, 3>();
    const double s2 = gram.trace() / 3.0;
    if (!((gram - s2 * Eigen::Matrix3d::Identity()).norm() <= kRootCertificate * s2)) continue;
    out.push_back(a);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kNoRealSolutions, "no orientation-preserving candidate");
  }
  return out;
}

SolutionSet finalize(const std::vector<HomMatrix4>& raw, const detail::Normalizer& norm,
                     std::span<const Acquisition3D> acqs) {
  std::vector<std::pair<double, Similarity>> scored;
  for (const HomMatrix4& a : raw) {
    try {
      const Similarity s = norm.denormalize(project_to_similarity_3d(a));
      scored.emplace_back(mean_residual(s, acqs), s);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularBlock && e.code() != ErrorCode::kInvariantViolation) throw;
    }
  }
  if (scored.empty()) throw Error(ErrorCode::kNoRealSolutions, "no candidate survived projection");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  SolutionSet out;
  for (auto& [r, s] : scored) {
    out.candidates.push_back(s);
    out.residuals.push_back(r);
  }
  return out;
}

}  // namespace

Vector13 vec_from_hom(const HomMatrix4& a) {
  Vector13 v;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) v(4 * r + c) = a(r, c);
  }
  v(12) = a(3, 3);
  return v;
}

HomMatrix4 hom_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  HomMatrix4 a = HomMatrix4::Zero();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) a(r, c) = v(4 * r + c);
  }
  a(3, 3) = v(12);
  return a;
}

Eigen::Matrix<double, 1, 13> incidence_row(const Plane& plane, const Point3& x) {
  const Eigen::Vector4d& pi = plane.hom();
  Eigen::Matrix<double, 1, 13> row;
  for (int r = 0; r < 3; ++r) {
    row(4 * r + 0) = pi(r) * x.x();
    row(4 * r + 1) = pi(r) * x.y();
    row(4 * r + 2) = pi(r) * x.z();
    row(4 * r + 3) = pi(r);
  }
  row(12) = pi(3);
  return row;
}

ConstraintRows constraint_rows_3d(const Acquisition3D& acq, const Point3& anchor) {
  const auto [pi, pi_star] = planes_from_line(acq.tracked_line, anchor);
  ConstraintRows rows;
  rows.row(0) = incidence_row(pi, acq.us_points[0]);
  rows.row(1) = incidence_row(pi_star, acq.us_points[0]);
  rows.row(2) = incidence_row(pi, acq.us_points[1]);
  rows.row(3) = incidence_row(pi_star, acq.us_points[1]);
  return rows;
}

Similarity solve_linear_3d(std::span<const Acquisition3D> acqs, const Point3& anchor) {
  if (acqs.size() < 3) {
    throw Error(ErrorCode::kInsufficientData, "linear 3D solver needs at least 3 acquisitions");
  }
  const detail::Normalizer norm = detail::make_normalizer(acqs, anchor);
  Eigen::MatrixXd system(4 * static_cast<Eigen::Index>(acqs.size()), 13);
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    system.middleRows<4>(4 * static_cast<Eigen::Index>(i)) =
        constraint_rows_3d(norm.apply(acqs[i]), Point3::Zero());
  }
  const poly::NullspaceBasis basis = poly::nullspace(system, 1);
  const Eigen::VectorXd v = basis.element(0);
  if (!(std::abs(v(12)) > poly::kHomTolerance)) {
    throw Error(ErrorCode::kHomogeneousCollapse, "least singular vector has no homogeneous part");
  }
  return norm.denormalize(project_to_similarity_3d(hom_from_vec(v / v(12))));
}

std::vector<HomMatrix4> minimal_candidates(const Eigen::MatrixXd& rows7) {
  const poly::NullspaceBasis basis = poly::nullspace(rows7, 6);
  try {
    return run_action_pipeline(basis);
  } catch (const Error& first) {
    if (first.code() != ErrorCode::kEliminationFailure &&
        first.code() != ErrorCode::kNoRealSolutions && first.code() != ErrorCode::kSingularC) {
      throw;
    }
    // Retry with the fifth coefficient dehomogenized instead of the sixth.
    poly::NullspaceBasis swapped = basis;
    swapped.vectors.col(4).swap(swapped.vectors.col(5));
    try {
      return run_action_pipeline(swapped);
    } catch (const Error&) {
      throw first;
    }
  }
}

Eigen::MatrixXd minimal_rows_3d(std::span<const Acquisition3D> acqs, const Point3& anchor) {
  if (acqs.size() != 2) {
    throw Error(ErrorCode::kInsufficientData, "minimal 3D solver takes exactly 2 acquisitions");
  }
  const detail::Normalizer norm = detail::make_normalizer(acqs, anchor);
  Eigen::MatrixXd rows(8, 13);
  rows.topRows<4>() = constraint_rows_3d(norm.apply(acqs[0]), Point3::Zero());
  rows.bottomRows<4>() = constraint_rows_3d(norm.apply(acqs[1]), Point3::Zero());
  // The (Pi*, X*) row of the second acquisition is left out.
  return rows.topRows(7);
}

SolutionSet solve_minimal_3d(std::span<const Acquisition3D> acqs, const Point3& anchor) {
  const Eigen::MatrixXd rows = minimal_rows_3d(acqs, anchor);
  return finalize(minimal_candidates(rows), detail::make_normalizer(acqs, anchor), acqs);
}

}  // namespace uscal::calib3d
