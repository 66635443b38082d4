#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/geometry.hpp"

using namespace uscal;
using uscal::testing::random_rotation;
using uscal::testing::random_unit;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::kInvariantViolation;
}

}  // namespace

TEST_CASE("similarity keeps a unit quaternion and a proper rotation") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond q = random_rotation(rng);
    const Eigen::Quaterniond raw(q.coeffs() * 3.7);
    const Similarity a(raw, Eigen::Vector3d(1, 2, 3), 0.24);
    CHECK(std::abs(a.quaternion().norm() - 1.0) < 1e-12);
    const Eigen::Matrix3d r = a.rotation();
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-10);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(code_of([] { Similarity(Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), 0.0); }) ==
        ErrorCode::kInvariantViolation);
  CHECK(code_of([] { Similarity(Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), -1.0); }) ==
        ErrorCode::kInvariantViolation);
}

TEST_CASE("apply_similarity on hand-checked cases") {
  const Eigen::Quaterniond id = Eigen::Quaterniond::Identity();
  CHECK((apply_similarity(Similarity(id, Eigen::Vector3d::Zero(), 1.0), Point3(1, 2, 3)) - Point3(1, 2, 3)).norm() ==
        0.0);
  CHECK((apply_similarity(Similarity(id, Eigen::Vector3d(1, 0, 0), 2.0), Point3(1, 1, 1)) - Point3(3, 2, 2)).norm() <
        1e-15);
  CHECK((apply_similarity(Similarity(id, Eigen::Vector3d::Zero(), 0.24), Point3(100, 0, 0)) - Point3(24, 0, 0))
            .norm() < 1e-12);
}

TEST_CASE("similarity composition and inverse") {
  std::mt19937_64 rng(2);
  const Similarity a(random_rotation(rng), Eigen::Vector3d(4, -2, 9), 0.24);
  const Similarity b(random_rotation(rng), Eigen::Vector3d(-1, 3, 0.5), 1.7);
  const Point3 x(10, -20, 30);
  CHECK(((a * b).apply(x) - a.apply(b.apply(x))).norm() < 1e-12);
  CHECK((a.inverse().apply(a.apply(x)) - x).norm() < 1e-10);
  const HomMatrix4 h = a.to_homogeneous();
  CHECK((h.topLeftCorner<3, 3>() * x + h.topRightCorner<3, 1>() - a.apply(x)).norm() < 1e-12);
  CHECK(h(3, 3) == 1.0);
}

TEST_CASE("line construction rejects coincident or non-finite points") {
  CHECK(code_of([] { Line3(Point3(1, 2, 3), Point3(1, 2, 3)); }) == ErrorCode::kDegenerateLine);
  CHECK(code_of([] { Line3(Point3(0, 0, 0), Point3(0, 0, 1e-7)); }) == ErrorCode::kDegenerateLine);
  CHECK(code_of([] { Line3(Point3(0, 0, 0), Point3(0, NAN, 1)); }) == ErrorCode::kDegenerateLine);
  const Line3 l(Point3(0, 0, 0), Point3(3, 4, 0));
  CHECK(std::abs(l.direction().norm() - 1.0) < 1e-12);
  CHECK((l.direction() - Eigen::Vector3d(0.6, 0.8, 0)).norm() < 1e-15);
}

TEST_CASE("plane normal is unit and incidence is n.P + d = 0") {
  const Plane p(Eigen::Vector4d(0, 0, 2, -4));
  CHECK(std::abs(p.normal().norm() - 1.0) < 1e-12);
  CHECK(p.signed_distance(Point3(5, -3, 2)) == doctest::Approx(0.0));
  CHECK(p.signed_distance(Point3(0, 0, 5)) == doctest::Approx(3.0));
  CHECK(code_of([] { Plane(Eigen::Vector4d(0, 0, 0, 1)); }) == ErrorCode::kInvariantViolation);
}

TEST_CASE("planes_from_line on the hand-solvable configuration") {
  const Line3 l(Point3(1, 0, 0), Point3(1, 1, 0));
  const auto [pi, pi_star] = planes_from_line(l, Point3::Zero());
  // Planes are defined up to sign.
  const Eigen::Vector4d expect_pi(0, 0, 1, 0);
  const Eigen::Vector4d expect_star(1, 0, 0, -1);
  CHECK(std::min((pi.hom() - expect_pi).norm(), (pi.hom() + expect_pi).norm()) < 1e-12);
  CHECK(std::min((pi_star.hom() - expect_star).norm(), (pi_star.hom() + expect_star).norm()) < 1e-12);
}

TEST_CASE("planes_from_line rejects an anchor on the line") {
  const Line3 l(Point3(0, 0, 0), Point3(0, 0, 1));
  CHECK(code_of([&] { planes_from_line(l, Point3(0, 0, 5)); }) == ErrorCode::kDegenerateAnchor);
  CHECK(code_of([&] { planes_from_line(l, Point3(0, 5e-4, 5)); }) == ErrorCode::kDegenerateAnchor);
}

TEST_CASE("planes_from_line on random lines: both planes hold the line, normals orthogonal") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  for (int i = 0; i < 200; ++i) {
    const Line3 l(Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng)));
    const Point3 anchor(u(rng), u(rng), u(rng));
    const auto [pi, pi_star] = planes_from_line(l, anchor);
    const double scale = 1.0 + l.p0().norm() + l.p1().norm();
    CHECK(std::abs(pi.signed_distance(l.p0())) < 1e-12 * scale);
    CHECK(std::abs(pi.signed_distance(l.p1())) < 1e-12 * scale);
    CHECK(std::abs(pi_star.signed_distance(l.p0())) < 1e-12 * scale);
    CHECK(std::abs(pi_star.signed_distance(l.p1())) < 1e-12 * scale);
    CHECK(std::abs(pi.signed_distance(anchor)) < 1e-12 * (scale + anchor.norm()));
    CHECK(std::abs(pi.normal().dot(pi_star.normal())) < 1e-12);
  }
}

TEST_CASE("line_point_distance") {
  const Line3 z_axis(Point3(0, 0, 0), Point3(0, 0, 1));
  CHECK(line_point_distance(z_axis, Point3(3, 4, 0)) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(line_point_distance(z_axis, Point3(0, 0, -17)) == 0.0);

  // Dense grid search along the line as an independent oracle.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 20; ++i) {
    const Line3 l(Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng)));
    const Point3 p(u(rng), u(rng), u(rng));
    const Eigen::Vector3d d = l.direction();
    const double t0 = d.dot(p - l.p0());
    double best = 1e300;
    for (int k = -20000; k <= 20000; ++k) {
      const double t = t0 + k * 1e-5;
      best = std::min(best, (p - (l.p0() + t * d)).norm());
    }
    CHECK(std::abs(line_point_distance(l, p) - best) < 1e-6);
  }
}

TEST_CASE("project_to_similarity_3d is idempotent on similarities") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Similarity a(random_rotation(rng), 100.0 * random_unit(rng), 0.24);
    const Similarity b = project_to_similarity_3d(a.to_homogeneous());
    CHECK(rotation_error(a.rotation(), b.rotation()) < 1e-10);
    CHECK((a.translation() - b.translation()).norm() < 1e-10);
    CHECK(std::abs(a.scale() - b.scale()) < 1e-10);
    // Homogeneous scaling of the input is irrelevant.
    const Similarity c = project_to_similarity_3d(-3.0 * a.to_homogeneous());
    CHECK(std::abs(a.scale() - c.scale()) < 1e-10);
  }
}

TEST_CASE("project_to_similarity_3d of a diagonal block") {
  HomMatrix4 a = HomMatrix4::Identity();
  a.topLeftCorner<3, 3>() = Eigen::Vector3d(1.1, 0.9, 1.0).asDiagonal();
  const Similarity s = project_to_similarity_3d(a);
  CHECK(s.scale() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rotation_error(s.rotation(), Eigen::Matrix3d::Identity()) < 1e-12);
}

TEST_CASE("project_to_similarity_3d of a perturbed similarity satisfies S^T S = s^2 I") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int i = 0; i < 50; ++i) {
    const Similarity a(random_rotation(rng), 50.0 * random_unit(rng), 0.24);
    HomMatrix4 h = a.to_homogeneous();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) h(r, c) += n(rng);
    }
    const Similarity b = project_to_similarity_3d(h);
    const Eigen::Matrix3d s = b.scaled_rotation();
    CHECK((s.transpose() * s - b.scale() * b.scale() * Eigen::Matrix3d::Identity()).norm() < 1e-10);
  }
}

TEST_CASE("project_to_similarity_3d failure modes") {
  HomMatrix4 a = HomMatrix4::Identity();
  a(3, 3) = 0.0;
  CHECK(code_of([&] { project_to_similarity_3d(a); }) == ErrorCode::kHomogeneousCollapse);
  HomMatrix4 b = HomMatrix4::Identity();
  b(2, 2) = 0.0;
  CHECK(code_of([&] { project_to_similarity_3d(b); }) == ErrorCode::kSingularBlock);
}

TEST_CASE("rotation_error") {
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  CHECK(rotation_error(rz, rz) == doctest::Approx(0.0));
  CHECK(rotation_error(rz, Eigen::Matrix3d::Identity()) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));

  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d r = random_rotation(rng).toRotationMatrix();
    const Eigen::Matrix3d g = random_rotation(rng).toRotationMatrix();
    const Eigen::AngleAxisd aa(Eigen::Matrix3d(r.transpose() * g));
    CHECK(std::abs(rotation_error(r, g) - aa.angle()) < 1e-10);
  }
}
