#include "uscal/calib2d.hpp"

#include <algorithm>
#include <cmath>

#include "normalization.hpp"
#include "uscal/calib3d.hpp"
#include "uscal/error.hpp"
#include "uscal/polyengine.hpp"

namespace uscal::calib2d {

namespace {

Eigen::MatrixXd stacked_rows(std::span<const Acquisition2D> acqs) {
  Eigen::MatrixXd rows(2 * static_cast<Eigen::Index>(acqs.size()), 10);
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    rows.middleRows<2>(2 * static_cast<Eigen::Index>(i)) = constraint_rows_2d(acqs[i], Point3::Zero());
  }
  return rows;
}

std::vector<Acquisition2D> normalized(std::span<const Acquisition2D> acqs,
                                      const detail::Normalizer& norm) {
  std::vector<Acquisition2D> out;
  out.reserve(acqs.size());
  for (const auto& a : acqs) out.push_back(norm.apply(a));
  return out;
}

void require_exactly_four(std::span<const Acquisition2D> acqs) {
  if (acqs.size() != 4) {
    throw Error(ErrorCode::kInsufficientData, "minimal 2D solvers take exactly 4 acquisitions");
  }
}

}  // namespace

Vector10 vec_from_reduced(const ReducedAffine& a) {
  Vector10 v;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v(3 * r + c) = a(r, c);
  }
  v(9) = a(3, 2);
  return v;
}

ReducedAffine reduced_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  ReducedAffine a = ReducedAffine::Zero();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a(r, c) = v(3 * r + c);
  }
  a(3, 2) = v(9);
  return a;
}

ReducedAffine reduced_from_similarity(const Similarity& a) {
  ReducedAffine out = ReducedAffine::Zero();
  const Eigen::Matrix3d s = a.scaled_rotation();
  out.block<3, 1>(0, 0) = s.col(0);
  out.block<3, 1>(0, 1) = s.col(1);
  out.block<3, 1>(0, 2) = a.translation();
  out(3, 2) = 1.0;
  return out;
}

ConstraintRows constraint_rows_2d(const Acquisition2D& acq, const Point3& anchor) {
  const auto [pi, pi_star] = planes_from_line(acq.tracked_line, anchor);
  const double x = acq.us_point.x();
  const double y = acq.us_point.y();
  ConstraintRows rows;
  int i = 0;
  for (const Plane* plane : {&pi, &pi_star}) {
    const Eigen::Vector4d& h = plane->hom();
    for (int r = 0; r < 3; ++r) {
      rows(i, 3 * r + 0) = h(r) * x;
      rows(i, 3 * r + 1) = h(r) * y;
      rows(i, 3 * r + 2) = h(r);
    }
    rows(i, 9) = h(3);
    ++i;
  }
  return rows;
}

Similarity project_to_similarity_2d(const ReducedAffine& a) {
  const double h = a(3, 2);
  if (!(std::abs(h) > 1e-12 * std::max(a.topRows<3>().norm(), 1.0))) {
    throw Error(ErrorCode::kHomogeneousCollapse, "homogeneous entry vanishes");
  }
  const Eigen::Matrix<double, 3, 2> s_bar = a.block<3, 2>(0, 0) / h;
  const Eigen::Vector3d t = a.block<3, 1>(0, 2) / h;

  Eigen::HouseholderQR<Eigen::Matrix<double, 3, 2>> qr(s_bar);
  Eigen::Matrix3d q = qr.householderQ();
  Eigen::Vector2d diag(qr.matrixQR()(0, 0), qr.matrixQR()(1, 1));
  const double dmax = diag.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || diag.cwiseAbs().minCoeff() < 1e-12 * dmax) {
    throw Error(ErrorCode::kSingularBlock, "reduced scaled rotation block is rank deficient");
  }
  for (int i = 0; i < 2; ++i) {
    if (diag(i) < 0.0) {
      q.col(i) *= -1.0;
      diag(i) *= -1.0;
    }
  }
  Eigen::Matrix3d r;
  r.col(0) = q.col(0);
  r.col(1) = q.col(1);
  r.col(2) = q.col(0).cross(q.col(1));
  return Similarity(r, t, diag.mean());
}

Similarity solve_linear_2d(std::span<const Acquisition2D> acqs, const Point3& anchor) {
  if (acqs.size() < 5) {
    throw Error(ErrorCode::kInsufficientData, "linear 2D solver needs at least 5 acquisitions");
  }
  const detail::Normalizer norm = detail::make_normalizer(acqs, anchor);
  const auto local = normalized(acqs, norm);
  const poly::NullspaceBasis basis = poly::nullspace(stacked_rows(local), 1);
  const Eigen::VectorXd v = basis.element(0);
  if (!(std::abs(v(9)) > poly::kHomTolerance)) {
    throw Error(ErrorCode::kHomogeneousCollapse, "least singular vector has no homogeneous part");
  }
  return norm.denormalize(project_to_similarity_2d(reduced_from_vec(v / v(9))));
}

SolutionSet solve_minimal_2d_general(std::span<const Acquisition2D> acqs, const Point3& anchor,
                                     ScanPlane plane) {
  require_exactly_four(acqs);
  if (!(plane.k >= 0.0) || !std::isfinite(plane.k)) {
    throw Error(ErrorCode::kInvariantViolation, "scan plane offset must be non-negative");
  }
  const detail::Normalizer norm = detail::make_normalizer(acqs, anchor);
  const auto local = normalized(acqs, norm);

  Eigen::MatrixXd rows(8, 13);
  for (int i = 0; i < 4; ++i) {
    const auto [pi, pi_star] = planes_from_line(local[i].tracked_line, Point3::Zero());
    const Point3 x(local[i].us_point.x(), local[i].us_point.y(), plane.k);
    rows.row(2 * i) = calib3d::incidence_row(pi, x);
    rows.row(2 * i + 1) = calib3d::incidence_row(pi_star, x);
  }
  // The (Pi*, X) row of the fourth acquisition is left out.
  const std::vector<HomMatrix4> raw = calib3d::minimal_candidates(rows.topRows(7));

  // Re-express each candidate on the z = 0 embedding: A' = A * T(0, 0, k).
  const Similarity lift(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.0, 0.0, plane.k), 1.0);
  std::vector<std::pair<double, Similarity>> scored;
  for (const HomMatrix4& a : raw) {
    try {
      const Similarity s = norm.denormalize(project_to_similarity_3d(a) * lift);
      scored.emplace_back(mean_residual(s, acqs), s);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularBlock) throw;
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

SolutionSet solve_minimal_2d(std::span<const Acquisition2D> acqs, const Point3& anchor) {
  require_exactly_four(acqs);
  const detail::Normalizer norm = detail::make_normalizer(acqs, anchor);
  const auto local = normalized(acqs, norm);
  const Eigen::MatrixXd rows = stacked_rows(local);
  // The (Pi*, X) row of the fourth acquisition is left out.
  const poly::NullspaceBasis basis = poly::nullspace(rows.topRows(7), 3);
  const poly::QuadraticSystem sys = poly::quadratic_constraints_2d(basis);

  struct Scored {
    double algebraic;
    Similarity model;
  };
  std::vector<Scored> scored;
  for (const Eigen::Vector3d& abc : poly::solve_two_conics(sys)) {
    Eigen::VectorXd v = basis.combine(abc);
    if (!(std::abs(v(9)) > poly::kHomTolerance * v.norm())) continue;
    v /= v(9);
    try {
      const Similarity local_model = project_to_similarity_2d(reduced_from_vec(v));
      const Vector10 fitted = vec_from_reduced(reduced_from_similarity(local_model));
      const double algebraic = (rows * fitted).norm() / (rows.norm() * fitted.norm());
      scored.push_back({algebraic, norm.denormalize(local_model)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularBlock) throw;
    }
  }
  if (scored.empty()) throw Error(ErrorCode::kNoRealSolutions, "no candidate survived projection");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& x, const Scored& y) { return x.algebraic < y.algebraic; });
  SolutionSet out;
  for (const Scored& s : scored) {
    out.candidates.push_back(s.model);
    out.residuals.push_back(mean_residual(s.model, acqs));
  }
  return out;
}

}  // namespace uscal::calib2d
