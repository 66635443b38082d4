#include "uscal/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "uscal/calib3d.hpp"
#include "uscal/error.hpp"

namespace uscal::robust {

namespace {

std::vector<Similarity> single(const Similarity& s) { return {s}; }

// Adaptive iteration bound for the current best inlier ratio.
int required_iterations(double inlier_ratio, int sample_size, double confidence, int cap) {
  if (inlier_ratio >= 1.0) return 1;
  const double good_sample = std::pow(inlier_ratio, sample_size);
  if (good_sample <= std::numeric_limits<double>::epsilon()) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - good_sample);
  if (!std::isfinite(n) || n >= cap) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

template <typename Acq>
RansacResult ransac_impl(std::span<const Acq> acqs, const SolverHandle<Acq>& solver,
                         const RansacConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(acqs.size());
  const int k = solver.sample_size;
  if (k <= 0 || n < k) {
    throw Error(ErrorCode::kInsufficientData,
                solver.name + " needs " + std::to_string(k) + " acquisitions, got " + std::to_string(n));
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<int> index(n);
  std::iota(index.begin(), index.end(), 0);
  std::vector<Acq> sample;
  sample.reserve(k);
  std::vector<double> residuals(n);

  bool have_best = false;
  int best_count = -1;
  double best_mean = std::numeric_limits<double>::infinity();
  Similarity best_model;
  int needed = cfg.max_iterations;
  int it = 0;
  for (; it < needed; ++it) {
    // Partial Fisher-Yates: the first k entries become the sample.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(index[i], index[pick(rng)]);
    }
    sample.clear();
    for (int i = 0; i < k; ++i) sample.push_back(acqs[index[i]]);

    std::vector<Similarity> candidates;
    try {
      candidates = solver.solve(sample);
    } catch (const Error&) {
      candidates.clear();
    }
    for (const Similarity& cand : candidates) {
      int count = 0;
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = residual(cand, acqs[i]);
        if (r <= cfg.threshold) {
          ++count;
          sum += r;
        }
      }
      const double mean = count > 0 ? sum / count : std::numeric_limits<double>::infinity();
      if (count > best_count || (count == best_count && mean < best_mean)) {
        have_best = true;
        best_count = count;
        best_mean = mean;
        best_model = cand;
      }
    }
    if (have_best) {
      needed = std::min(cfg.max_iterations,
                        required_iterations(static_cast<double>(best_count) / n, k, cfg.confidence,
                                            cfg.max_iterations));
    }
    // Only one distinct sample exists.
    if (n == k) {
      ++it;
      break;
    }
  }
  if (!have_best || best_count < cfg.min_inliers) {
    throw Error(ErrorCode::kNoModelFound, "no model reached " + std::to_string(cfg.min_inliers) + " inliers");
  }
  RansacResult out;
  out.model = best_model;
  out.inlier_mask.resize(n);
  for (int i = 0; i < n; ++i) out.inlier_mask[i] = residual(best_model, acqs[i]) <= cfg.threshold;
  out.iterations_used = it;
  out.mean_inlier_residual = best_count > 0 ? best_mean : std::numeric_limits<double>::quiet_NaN();
  return out;
}

template <typename Acq>
std::vector<bool> mask_impl(std::span<const Acq> acqs, const Similarity& model, double threshold) {
  std::vector<bool> mask(acqs.size());
  for (std::size_t i = 0; i < acqs.size(); ++i) mask[i] = residual(model, acqs[i]) <= threshold;
  return mask;
}

template <typename Acq>
std::vector<Line3> lines_of(std::span<const Acq> acqs) {
  std::vector<Line3> lines;
  lines.reserve(acqs.size());
  for (const auto& a : acqs) lines.push_back(a.tracked_line);
  return lines;
}

}  // namespace

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvariantViolation, "RANSAC threshold must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvariantViolation, "RANSAC confidence must lie in (0, 1)");
  }
  if (max_iterations <= 0) throw Error(ErrorCode::kInvariantViolation, "max_iterations must be positive");
  if (min_inliers < 0) throw Error(ErrorCode::kInvariantViolation, "min_inliers must be non-negative");
}

int RansacResult::num_inliers() const {
  return static_cast<int>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

SolverHandle3D linear_3d_solver(const Point3& anchor) {
  return {"linear3d", 3, [anchor](std::span<const Acquisition3D> s) {
            return single(calib3d::solve_linear_3d(s, anchor));
          }};
}

SolverHandle3D minimal_3d_solver(const Point3& anchor) {
  return {"minimal3d", 2, [anchor](std::span<const Acquisition3D> s) {
            return calib3d::solve_minimal_3d(s, anchor).candidates;
          }};
}

SolverHandle2D linear_2d_solver(const Point3& anchor) {
  return {"linear2d", 5, [anchor](std::span<const Acquisition2D> s) {
            return single(calib2d::solve_linear_2d(s, anchor));
          }};
}

SolverHandle2D minimal_2d_solver(const Point3& anchor) {
  return {"minimal2d", 4, [anchor](std::span<const Acquisition2D> s) {
            return calib2d::solve_minimal_2d(s, anchor).candidates;
          }};
}

SolverHandle2D minimal_2d_general_solver(const Point3& anchor, calib2d::ScanPlane plane) {
  return {"minimal2d_general", 4, [anchor, plane](std::span<const Acquisition2D> s) {
            return calib2d::solve_minimal_2d_general(s, anchor, plane).candidates;
          }};
}

RansacResult ransac(std::span<const Acquisition3D> acqs, const SolverHandle3D& solver,
                    const RansacConfig& cfg) {
  return ransac_impl(acqs, solver, cfg);
}

RansacResult ransac(std::span<const Acquisition2D> acqs, const SolverHandle2D& solver,
                    const RansacConfig& cfg) {
  return ransac_impl(acqs, solver, cfg);
}

std::vector<bool> inlier_mask(std::span<const Acquisition3D> acqs, const Similarity& model,
                              double threshold) {
  return mask_impl(acqs, model, threshold);
}

std::vector<bool> inlier_mask(std::span<const Acquisition2D> acqs, const Similarity& model,
                              double threshold) {
  return mask_impl(acqs, model, threshold);
}

DegeneracyFlags diagnose_degeneracy(std::span<const Line3> lines) {
  DegeneracyFlags flags;
  if (lines.size() < 2) return flags;

  flags.parallel = true;
  for (std::size_t i = 0; i < lines.size() && flags.parallel; ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const Eigen::Vector3d di = lines[i].direction();
      const Eigen::Vector3d dj = lines[j].direction();
      const double angle = std::atan2(di.cross(dj).norm(), std::abs(di.dot(dj)));
      if (angle > kParallelTolerance) {
        flags.parallel = false;
        break;
      }
    }
  }

  // Least-squares point closest to every line.
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const Line3& l : lines) {
    const Eigen::Vector3d d = l.direction();
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
    normal += proj;
    rhs += proj * l.p0();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  // Near-parallel bundles meet only at infinity.
  if (eig.eigenvalues()(0) > 1e-9 * eig.eigenvalues()(2)) {
    const Eigen::Vector3d center = normal.ldlt().solve(rhs);
    double worst = 0.0;
    for (const Line3& l : lines) worst = std::max(worst, line_point_distance(l, center));
    flags.concurrent = worst <= kConcurrentTolerance;
  }

  // Coplanar: one plane normal orthogonal to every direction, and every line
  // at the same offset along it. Tested on the lines, not on where their
  // endpoints happen to sit.
  Eigen::Vector3d n;
  if (flags.parallel) {
    const Eigen::Vector3d d = lines[0].direction();
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
    Point3 mean = Point3::Zero();
    for (const Line3& l : lines) mean += proj * l.p0();
    mean /= static_cast<double>(lines.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const Line3& l : lines) {
      const Eigen::Vector3d q = proj * l.p0() - mean;
      scatter += q * q.transpose();
    }
    scatter += (scatter.trace() + 1.0) * d * d.transpose();
    n = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(scatter).eigenvectors().col(0);
  } else {
    Eigen::Matrix3d dirs = Eigen::Matrix3d::Zero();
    for (const Line3& l : lines) dirs += l.direction() * l.direction().transpose();
    n = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(dirs).eigenvectors().col(0);
  }
  bool in_plane = true;
  double offset = 0.0;
  for (const Line3& l : lines) {
    in_plane = in_plane && std::abs(n.dot(l.direction())) <= std::sin(kParallelTolerance);
    offset += n.dot(l.p0());
  }
  offset /= static_cast<double>(lines.size());
  double worst = 0.0;
  for (const Line3& l : lines) worst = std::max(worst, std::abs(n.dot(l.p0()) - offset));
  flags.coplanar = in_plane && worst <= kCoplanarTolerance;
  return flags;
}

DegeneracyFlags diagnose_degeneracy(std::span<const Acquisition3D> acqs) {
  const auto lines = lines_of(acqs);
  return diagnose_degeneracy(std::span<const Line3>(lines));
}

DegeneracyFlags diagnose_degeneracy(std::span<const Acquisition2D> acqs) {
  const auto lines = lines_of(acqs);
  return diagnose_degeneracy(std::span<const Line3>(lines));
}

}  // namespace uscal::robust
