#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uscal/calib2d.hpp"
#include "uscal/error.hpp"

using namespace uscal;
using namespace uscal::testing;

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

TEST_CASE("reduced layout round trip") {
  calib2d::ReducedAffine a = calib2d::ReducedAffine::Zero();
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 0, 10;
  const calib2d::Vector10 v = calib2d::vec_from_reduced(a);
  for (int i = 0; i < 10; ++i) CHECK(v(i) == i + 1.0);
  CHECK(calib2d::reduced_from_vec(v) == a);
}

TEST_CASE("reduced map of a similarity keeps the first two columns and the translation") {
  std::mt19937_64 rng(41);
  const Similarity truth = random_truth(rng);
  const calib2d::ReducedAffine r = calib2d::reduced_from_similarity(truth);
  const Eigen::Matrix3d s = truth.scaled_rotation();
  CHECK((r.block<3, 1>(0, 0) - s.col(0)).norm() == 0.0);
  CHECK((r.block<3, 1>(0, 1) - s.col(1)).norm() == 0.0);
  CHECK((r.block<3, 1>(0, 2) - truth.translation()).norm() == 0.0);
  CHECK(r(3, 2) == 1.0);
  const Similarity back = calib2d::project_to_similarity_2d(r);
  CHECK(within(pose_errors(back, truth), 1e-12, 1e-10, 1e-14));
}

TEST_CASE("a detection at the image origin only touches translation and offset columns") {
  const Line3 l(Point3(10, -20, 50), Point3(40, 5, 70));
  const calib2d::ConstraintRows rows = calib2d::constraint_rows_2d(Acquisition2D(l, Eigen::Vector2d::Zero()), Point3::Zero());
  for (int c : {0, 1, 3, 4, 6, 7}) CHECK(rows.col(c).norm() == 0.0);
  CHECK(rows.col(2).norm() + rows.col(5).norm() + rows.col(8).norm() > 0.0);
  CHECK(rows.col(9).norm() > 0.0);
}

TEST_CASE("constraint rows vanish at the reduced ground truth") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 20; ++i) {
    const Similarity truth = random_truth(rng);
    const Eigen::VectorXd v = calib2d::vec_from_reduced(calib2d::reduced_from_similarity(truth));
    for (const auto& acq : random_acquisitions_2d(rng, truth, 4)) {
      const calib2d::ConstraintRows rows = calib2d::constraint_rows_2d(acq, Point3::Zero());
      CHECK((rows * v).norm() < 1e-10 * rows.norm() * v.norm());
    }
  }
}

TEST_CASE("linear 2D solver recovers noise-free ground truth") {
  std::mt19937_64 rng(43);
  for (int n : {5, 7, 10}) {
    for (int i = 0; i < 20; ++i) {
      const Similarity truth = random_truth(rng);
      const auto acqs = random_acquisitions_2d(rng, truth, n);
      CHECK(within(pose_errors(calib2d::solve_linear_2d(acqs, Point3::Zero()), truth), 1e-6, 1e-5, 1e-8));
    }
  }
}

TEST_CASE("both minimal 2D routes recover ground truth and agree") {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 50; ++i) {
    const Similarity truth = random_truth(rng);
    const auto acqs = random_acquisitions_2d(rng, truth, 4);
    const SolutionSet dedicated = calib2d::solve_minimal_2d(acqs, Point3::Zero());
    const SolutionSet general = calib2d::solve_minimal_2d_general(acqs, Point3::Zero());
    CHECK(dedicated.size() <= 4);
    CHECK(general.size() <= 8);
    CHECK(within(best_errors(dedicated.candidates, truth), 1e-6, 1e-5, 1e-8));
    CHECK(within(best_errors(general.candidates, truth), 1e-6, 1e-5, 1e-8));
  }
}

TEST_CASE("general minimal 2D route with other scan plane offsets") {
  std::mt19937_64 rng(45);
  const Similarity truth = random_truth(rng);
  const auto acqs = random_acquisitions_2d(rng, truth, 4);
  for (double k : {0.5, 1.0, 2.5}) {
    const SolutionSet s = calib2d::solve_minimal_2d_general(acqs, Point3::Zero(), {k});
    CHECK(within(best_errors(s.candidates, truth), 1e-6, 1e-5, 1e-8));
  }
  CHECK(code_of([&] { calib2d::solve_minimal_2d_general(acqs, Point3::Zero(), {0.0}); }) == ErrorCode::kSingularC);
  CHECK(code_of([&] { calib2d::solve_minimal_2d_general(acqs, Point3::Zero(), {-1.0}); }) ==
        ErrorCode::kInvariantViolation);
}

TEST_CASE("2D solvers reject the wrong number of acquisitions") {
  std::mt19937_64 rng(46);
  const Similarity truth = random_truth(rng);
  const auto acqs = random_acquisitions_2d(rng, truth, 5);
  CHECK(code_of([&] { calib2d::solve_linear_2d(std::span(acqs).first(4), Point3::Zero()); }) ==
        ErrorCode::kInsufficientData);
  CHECK(code_of([&] { calib2d::solve_minimal_2d(acqs, Point3::Zero()); }) == ErrorCode::kInsufficientData);
  CHECK(code_of([&] { calib2d::solve_minimal_2d_general(std::span(acqs).first(3), Point3::Zero()); }) ==
        ErrorCode::kInsufficientData);
}

TEST_CASE("linear 2D solver reports collinear detections and parallel lines") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> depth(100.0, 450.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Similarity truth = random_truth(rng);

    std::vector<Acquisition2D> collinear;
    while (collinear.size() < 6) {
      const Point3 x(25.0, depth(rng), 0.0);
      const Line3 line = needle_through(truth, x, random_unit(rng));
      if (line_point_distance(line, Point3::Zero()) < 20.0) continue;
      collinear.emplace_back(line, x.head<2>());
    }
    CHECK(code_of([&] { calib2d::solve_linear_2d(collinear, Point3::Zero()); }) == ErrorCode::kRankDeficient);

    const Eigen::Vector3d dir = random_unit(rng);
    std::vector<Acquisition2D> parallel;
    while (parallel.size() < 6) {
      const Point3 x = random_us_point(rng, true);
      const Line3 line = needle_through(truth, x, dir);
      if (line_point_distance(line, Point3::Zero()) < 20.0) continue;
      parallel.emplace_back(line, x.head<2>());
    }
    CHECK(code_of([&] { calib2d::solve_linear_2d(parallel, Point3::Zero()); }) == ErrorCode::kRankDeficient);
  }
}
