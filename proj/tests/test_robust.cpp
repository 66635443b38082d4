#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/robust.hpp"

using namespace uscal;
using namespace uscal::testing;

namespace {

// Swaps the tracked line of every `every`-th acquisition for an unrelated one.
template <typename Acq>
std::vector<bool> corrupt(std::vector<Acq>& acqs, int every, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  std::vector<bool> truth_mask(acqs.size(), true);
  for (std::size_t i = 0; i < acqs.size(); i += every) {
    acqs[i].tracked_line = Line3(Point3(u(rng), u(rng), u(rng)), Point3(u(rng), u(rng), u(rng)));
    truth_mask[i] = false;
  }
  return truth_mask;
}

}  // namespace

TEST_CASE("ransac config validation") {
  robust::RansacConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.confidence = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.min_inliers = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("solver handles carry their sample sizes") {
  CHECK(robust::linear_3d_solver().sample_size == 3);
  CHECK(robust::minimal_3d_solver().sample_size == 2);
  CHECK(robust::linear_2d_solver().sample_size == 5);
  CHECK(robust::minimal_2d_solver().sample_size == 4);
  CHECK(robust::minimal_2d_general_solver().sample_size == 4);
}

TEST_CASE("ransac on clean data keeps every acquisition") {
  std::mt19937_64 rng(51);
  const Similarity truth = random_truth(rng);
  const auto a3 = random_acquisitions_3d(rng, truth, 12);
  const auto a2 = random_acquisitions_2d(rng, truth, 12);
  robust::RansacConfig cfg;
  cfg.rng_seed = 7;
  for (const auto& h : {robust::linear_3d_solver(), robust::minimal_3d_solver()}) {
    const robust::RansacResult r = robust::ransac(a3, h, cfg);
    CHECK(r.num_inliers() == 12);
    CHECK(within(pose_errors(r.model, truth), 1e-6, 1e-5, 1e-8));
  }
  for (const auto& h : {robust::linear_2d_solver(), robust::minimal_2d_solver(), robust::minimal_2d_general_solver()}) {
    const robust::RansacResult r = robust::ransac(a2, h, cfg);
    CHECK(r.num_inliers() == 12);
    CHECK(within(pose_errors(r.model, truth), 1e-6, 1e-5, 1e-8));
  }
}

TEST_CASE("ransac separates gross outliers") {
  std::mt19937_64 rng(52);
  const Similarity truth = random_truth(rng);
  auto a3 = random_acquisitions_3d(rng, truth, 20);
  const std::vector<bool> expect = corrupt(a3, 4, rng);
  robust::RansacConfig cfg;
  cfg.rng_seed = 3;
  const robust::RansacResult r = robust::ransac(a3, robust::minimal_3d_solver(), cfg);
  CHECK(r.inlier_mask == expect);
  CHECK(within(pose_errors(r.model, truth), 1e-6, 1e-5, 1e-8));

  auto a2 = random_acquisitions_2d(rng, truth, 20);
  const std::vector<bool> expect2 = corrupt(a2, 5, rng);
  const robust::RansacResult r2 = robust::ransac(a2, robust::minimal_2d_solver(), cfg);
  CHECK(r2.inlier_mask == expect2);
}

TEST_CASE("ransac is deterministic for a fixed seed") {
  std::mt19937_64 rng(53);
  const Similarity truth = random_truth(rng);
  auto a3 = random_acquisitions_3d(rng, truth, 15);
  corrupt(a3, 3, rng);
  robust::RansacConfig cfg;
  cfg.rng_seed = 99;
  const robust::RansacResult x = robust::ransac(a3, robust::linear_3d_solver(), cfg);
  const robust::RansacResult y = robust::ransac(a3, robust::linear_3d_solver(), cfg);
  CHECK(x.inlier_mask == y.inlier_mask);
  CHECK(x.iterations_used == y.iterations_used);
  CHECK(x.model.to_homogeneous() == y.model.to_homogeneous());
}

TEST_CASE("ransac with exactly one sample runs once") {
  std::mt19937_64 rng(54);
  const Similarity truth = random_truth(rng);
  const auto a3 = random_acquisitions_3d(rng, truth, 2);
  const robust::RansacResult r = robust::ransac(a3, robust::minimal_3d_solver(), {});
  CHECK(r.iterations_used == 1);
  CHECK(r.num_inliers() == 2);
}

TEST_CASE("ransac failure modes") {
  std::mt19937_64 rng(55);
  const Similarity truth = random_truth(rng);
  const auto a3 = random_acquisitions_3d(rng, truth, 2);
  try {
    robust::ransac(a3, robust::linear_3d_solver(), {});
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
  // Asking for more support than the data can give.
  auto noisy = random_acquisitions_3d(rng, truth, 6);
  corrupt(noisy, 1, rng);
  robust::RansacConfig cfg;
  cfg.min_inliers = 6;
  cfg.max_iterations = 20;
  try {
    robust::ransac(noisy, robust::minimal_3d_solver(), cfg);
    FAIL("expected NoModelFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoModelFound);
  }
}

TEST_CASE("inlier_mask thresholds the residuals") {
  std::mt19937_64 rng(56);
  const Similarity truth = random_truth(rng);
  const auto a2 = random_acquisitions_2d(rng, truth, 8);
  const Similarity shifted(truth.quaternion(), truth.translation() + Eigen::Vector3d(0, 0, 100), truth.scale());
  const std::vector<bool> all = robust::inlier_mask(a2, truth, 1e-6);
  CHECK(std::count(all.begin(), all.end(), true) == 8);
  const std::vector<bool> mask = robust::inlier_mask(a2, shifted, 5.0);
  for (std::size_t i = 0; i < a2.size(); ++i) CHECK(mask[i] == (residual_2d(shifted, a2[i]) <= 5.0));
}

TEST_CASE("degeneracy diagnosis") {
  std::mt19937_64 rng(57);
  const Similarity truth = random_truth(rng);

  SUBCASE("generic lines") {
    const auto acqs = random_acquisitions_3d(rng, truth, 6);
    CHECK(robust::diagnose_degeneracy(acqs) == robust::DegeneracyFlags{});
  }
  SUBCASE("two skew lines") {
    const std::vector<Line3> lines{Line3(Point3(0, 0, 0), Point3(1, 0, 0)),
                                   Line3(Point3(0, 50, 30), Point3(0, 51, 30))};
    CHECK(!robust::diagnose_degeneracy(lines).any());
  }
  SUBCASE("parallel lines") {
    const Eigen::Vector3d d = random_unit(rng);
    std::vector<Line3> lines;
    for (int i = 0; i < 5; ++i) {
      const Point3 p = 100.0 * random_unit(rng);
      lines.emplace_back(p, p + 50.0 * d);
    }
    const robust::DegeneracyFlags f = robust::diagnose_degeneracy(lines);
    CHECK(f.parallel);
  }
  SUBCASE("concurrent lines") {
    const Point3 c(10, 20, 30);
    std::vector<Line3> lines;
    for (int i = 0; i < 5; ++i) lines.emplace_back(c, c + 80.0 * random_unit(rng));
    CHECK(robust::diagnose_degeneracy(lines).concurrent);
  }
  SUBCASE("coplanar pair") {
    const std::vector<Line3> lines{Line3(Point3(0, 0, 5), Point3(10, 3, 5)),
                                   Line3(Point3(-4, 8, 5), Point3(7, -20, 5))};
    CHECK(robust::diagnose_degeneracy(lines).coplanar);
  }
  SUBCASE("2D acquisitions with parallel needles") {
    const Eigen::Vector3d d = random_unit(rng);
    std::vector<Acquisition2D> acqs;
    while (acqs.size() < 5) {
      const Point3 x = random_us_point(rng, true);
      acqs.emplace_back(needle_through(truth, x, d), x.head<2>());
    }
    CHECK(robust::diagnose_degeneracy(acqs).parallel);
  }
}
