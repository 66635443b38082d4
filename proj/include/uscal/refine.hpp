#pragma once

#include <span>
#include <vector>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"

namespace uscal::refine {

struct RefineConfig {
  int max_iterations = 100;
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  double initial_damping = 1e-3;

  /// Throws kInvariantViolation unless every field is positive.
  void validate() const;
};

/// One mapped US point paired with the tracked line it should lie on.
struct Observation {
  Line3 line;
  Point3 us;
};

std::vector<Observation> observations(std::span<const Acquisition3D> acqs);
std::vector<Observation> observations(std::span<const Acquisition2D> acqs);

/// Parameter vector [qw qx qy qz tx ty tz log(s)].
using Params = Eigen::Matrix<double, 8, 1>;

Params to_params(const Similarity& a);
/// The quaternion part is normalized; it need not be unit on input.
Similarity from_params(const Params& p);

/// Stacked perpendicular displacements (3 per observation) and, when `jac`
/// is non-null, their analytic Jacobian with respect to the 8 parameters.
Eigen::VectorXd residuals(std::span<const Observation> obs, const Params& p,
                          Eigen::MatrixXd* jac = nullptr);

/// Sum of squared orthogonal distances.
double cost(std::span<const Observation> obs, const Similarity& a);

struct RefineSummary {
  Similarity model;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::vector<double> accepted_costs;  // cost after each accepted step
};

RefineSummary refine_detailed(std::span<const Observation> obs, const Similarity& a0,
                              const RefineConfig& cfg = {});

/// Levenberg-Marquardt on the orthogonal-distance cost. Never returns a
/// model with higher cost than `a0`. Throws kInsufficientData and
/// kNonFiniteCost.
Similarity refine(std::span<const Acquisition3D> acqs, const Similarity& a0, const RefineConfig& cfg = {});
Similarity refine(std::span<const Acquisition2D> acqs, const Similarity& a0, const RefineConfig& cfg = {});

}  // namespace uscal::refine
