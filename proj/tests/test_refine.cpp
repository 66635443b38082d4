#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/refine.hpp"

using namespace uscal;
using namespace uscal::testing;

namespace {

Similarity perturb(const Similarity& a, std::mt19937_64& rng, double rot, double trans, double rel_scale) {
  const Eigen::Quaterniond dq(Eigen::AngleAxisd(rot, random_unit(rng)));
  return Similarity(dq * a.quaternion(), a.translation() + trans * random_unit(rng), a.scale() * (1.0 + rel_scale));
}

Eigen::MatrixXd central_differences(std::span<const refine::Observation> obs, const refine::Params& p) {
  Eigen::MatrixXd j(3 * static_cast<Eigen::Index>(obs.size()), 8);
  for (int k = 0; k < 8; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(p(k)));
    refine::Params up = p, down = p;
    up(k) += h;
    down(k) -= h;
    j.col(k) = (refine::residuals(obs, up) - refine::residuals(obs, down)) / (2.0 * h);
  }
  return j;
}

}  // namespace

TEST_CASE("parameter round trip") {
  std::mt19937_64 rng(61);
  const Similarity a = random_truth(rng);
  const Similarity b = refine::from_params(refine::to_params(a));
  CHECK(within(pose_errors(a, b), 1e-14, 1e-12, 1e-15));
  refine::Params p = refine::to_params(a);
  p.head<4>() *= 5.0;
  CHECK(within(pose_errors(refine::from_params(p), a), 1e-14, 1e-12, 1e-15));
}

TEST_CASE("observations per acquisition") {
  std::mt19937_64 rng(62);
  const Similarity truth = random_truth(rng);
  CHECK(refine::observations(random_acquisitions_3d(rng, truth, 4)).size() == 8);
  const auto a2 = random_acquisitions_2d(rng, truth, 5);
  const auto obs = refine::observations(a2);
  CHECK(obs.size() == 5);
  CHECK(obs[2].us == a2[2].embedded());
}

TEST_CASE("residual of a pure perpendicular translation") {
  const Line3 l(Point3(0, 0, 0), Point3(0, 0, 1));
  const std::vector<refine::Observation> obs{{l, Point3(0, 0, 5)}};
  const Eigen::Vector3d delta(1.5, -2.0, 0.0);
  const Similarity a(Eigen::Quaterniond::Identity(), delta, 1.0);
  const Eigen::VectorXd r = refine::residuals(obs, refine::to_params(a));
  CHECK(r.norm() == doctest::Approx(delta.norm()).epsilon(1e-14));
  CHECK(refine::cost(obs, a) == doctest::Approx(delta.squaredNorm()).epsilon(1e-14));
  // Motion along the line is free.
  const Similarity along(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, 40), 1.0);
  CHECK(refine::cost(obs, along) == 0.0);
}

TEST_CASE("analytic Jacobian matches central differences") {
  std::mt19937_64 rng(63);
  for (int i = 0; i < 30; ++i) {
    const Similarity truth = random_truth(rng);
    const auto acqs = random_acquisitions_3d(rng, truth, 5);
    const auto obs = refine::observations(acqs);
    refine::Params p = refine::to_params(perturb(truth, rng, 0.1, 10.0, 0.05));
    // Off the unit sphere too: the residual normalizes the quaternion.
    if (i % 2) p.head<4>() *= 1.3;
    Eigen::MatrixXd jac;
    refine::residuals(obs, p, &jac);
    const Eigen::MatrixXd fd = central_differences(obs, p);
    CHECK((jac - fd).norm() <= 1e-4 * fd.norm());
  }
}

TEST_CASE("refinement converges from a perturbed start on noise-free data") {
  std::mt19937_64 rng(64);
  for (int i = 0; i < 20; ++i) {
    const Similarity truth = random_truth(rng);
    const auto acqs = random_acquisitions_3d(rng, truth, 6);
    const auto obs = refine::observations(acqs);
    const refine::RefineSummary s = refine::refine_detailed(obs, perturb(truth, rng, 0.05, 5.0, 0.02));
    CHECK(s.final_cost < 1e-12);
    CHECK(s.final_cost <= s.initial_cost);
    double prev = s.initial_cost;
    for (double c : s.accepted_costs) {
      CHECK(c <= prev);
      prev = c;
    }
    CHECK(within(pose_errors(s.model, truth), 1e-6, 1e-5, 1e-8));
  }
}

TEST_CASE("2D refinement converges on noise-free data") {
  std::mt19937_64 rng(65);
  const Similarity truth = random_truth(rng);
  const auto acqs = random_acquisitions_2d(rng, truth, 10);
  const Similarity out = refine::refine(acqs, perturb(truth, rng, 0.05, 5.0, 0.02));
  CHECK(refine::cost(refine::observations(acqs), out) < 1e-12);
}

TEST_CASE("refinement at the optimum returns the start") {
  std::mt19937_64 rng(66);
  const Similarity truth = random_truth(rng);
  const auto obs = refine::observations(random_acquisitions_3d(rng, truth, 4));
  const refine::RefineSummary s = refine::refine_detailed(obs, truth);
  CHECK(s.final_cost <= s.initial_cost);
  CHECK(within(pose_errors(s.model, truth), 1e-9, 1e-8, 1e-10));
}

TEST_CASE("refinement failure modes") {
  std::mt19937_64 rng(67);
  const Similarity truth = random_truth(rng);
  const auto a3 = random_acquisitions_3d(rng, truth, 2);
  const auto a2 = random_acquisitions_2d(rng, truth, 4);
  CHECK_THROWS_AS(refine::refine(std::span(a3).first(1), truth), Error);
  CHECK_THROWS_AS(refine::refine(std::span(a2).first(3), truth), Error);
  CHECK_NOTHROW(refine::refine(a2, truth));

  const std::vector<refine::Observation> huge{{Line3(Point3(0, 0, 0), Point3(0, 0, 1)), Point3(1e308, 1e308, 0)}};
  try {
    refine::refine_detailed(huge, Similarity(Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), 10.0));
    FAIL("expected NonFiniteCost");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteCost);
  }

  refine::RefineConfig cfg;
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
