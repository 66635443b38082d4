#include "uscal/refine.hpp"

#include <cmath>
#include <string>

#include "uscal/error.hpp"

namespace uscal::refine {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Unnormalized rotation applied to x: Q(q) x = |q|^2 R(q/|q|) x.
Eigen::Vector3d rotate_unnormalized(const Eigen::Vector4d& q, const Eigen::Vector3d& x) {
  const double w = q(0);
  const Eigen::Vector3d v = q.tail<3>();
  return (w * w - v.squaredNorm()) * x + 2.0 * v.dot(x) * v + 2.0 * w * v.cross(x);
}

// d(Q(q) x)/dq, 3x4.
Eigen::Matrix<double, 3, 4> rotate_unnormalized_jacobian(const Eigen::Vector4d& q, const Eigen::Vector3d& x) {
  const double w = q(0);
  const Eigen::Vector3d v = q.tail<3>();
  Eigen::Matrix<double, 3, 4> j;
  j.col(0) = 2.0 * w * x + 2.0 * v.cross(x);
  j.rightCols<3>() = -2.0 * x * v.transpose() + 2.0 * v.dot(x) * Eigen::Matrix3d::Identity() +
                     2.0 * v * x.transpose() - 2.0 * w * skew(x);
  return j;
}

template <typename Acq>
void require_count(std::span<const Acq> acqs, std::size_t minimum) {
  if (acqs.size() < minimum) {
    throw Error(ErrorCode::kInsufficientData,
                "refinement needs at least " + std::to_string(minimum) + " acquisitions");
  }
}

}  // namespace

void RefineConfig::validate() const {
  if (max_iterations <= 0 || !(gradient_tol > 0.0) || !(step_tol > 0.0) || !(initial_damping > 0.0)) {
    throw Error(ErrorCode::kInvariantViolation, "refinement settings must be positive");
  }
}

std::vector<Observation> observations(std::span<const Acquisition3D> acqs) {
  std::vector<Observation> out;
  out.reserve(2 * acqs.size());
  for (const auto& a : acqs) {
    out.push_back({a.tracked_line, a.us_points[0]});
    out.push_back({a.tracked_line, a.us_points[1]});
  }
  return out;
}

std::vector<Observation> observations(std::span<const Acquisition2D> acqs) {
  std::vector<Observation> out;
  out.reserve(acqs.size());
  for (const auto& a : acqs) out.push_back({a.tracked_line, a.embedded()});
  return out;
}

Params to_params(const Similarity& a) {
  Params p;
  const Eigen::Quaterniond& q = a.quaternion();
  p << q.w(), q.x(), q.y(), q.z(), a.translation(), std::log(a.scale());
  return p;
}

Similarity from_params(const Params& p) {
  const Eigen::Quaterniond q(p(0), p(1), p(2), p(3));
  return Similarity(q.normalized(), p.segment<3>(4), std::exp(p(7)));
}

Eigen::VectorXd residuals(std::span<const Observation> obs, const Params& p, Eigen::MatrixXd* jac) {
  const Eigen::Vector4d q = p.head<4>();
  const double n2 = q.squaredNorm();
  const Eigen::Vector3d t = p.segment<3>(4);
  const double s = std::exp(p(7));
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(obs.size());
  Eigen::VectorXd r(m);
  if (jac) jac->resize(m, 8);

  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Eigen::Vector3d d = obs[i].line.direction();
    const Eigen::Matrix3d perp = Eigen::Matrix3d::Identity() - d * d.transpose();
    const Eigen::Vector3d qx = rotate_unnormalized(q, obs[i].us);
    const Eigen::Vector3d rx = qx / n2;
    const Eigen::Index row = 3 * static_cast<Eigen::Index>(i);
    r.segment<3>(row) = perp * (s * rx + t - obs[i].line.p0());
    if (jac) {
      const Eigen::Matrix<double, 3, 4> drx =
          rotate_unnormalized_jacobian(q, obs[i].us) / n2 - 2.0 * qx * q.transpose() / (n2 * n2);
      jac->block<3, 4>(row, 0) = s * perp * drx;
      jac->block<3, 3>(row, 4) = perp;
      jac->block<3, 1>(row, 7) = s * perp * rx;
    }
  }
  return r;
}

double cost(std::span<const Observation> obs, const Similarity& a) {
  return residuals(obs, to_params(a)).squaredNorm();
}

RefineSummary refine_detailed(std::span<const Observation> obs, const Similarity& a0,
                              const RefineConfig& cfg) {
  cfg.validate();
  Params p = to_params(a0);
  Eigen::MatrixXd jac;
  Eigen::VectorXd r = residuals(obs, p, &jac);
  double c = r.squaredNorm();
  if (!std::isfinite(c) || !jac.allFinite()) {
    throw Error(ErrorCode::kNonFiniteCost, "initial cost is not finite");
  }

  RefineSummary out;
  out.initial_cost = c;
  double lambda = cfg.initial_damping;
  bool done = false;
  int it = 0;
  for (; it < cfg.max_iterations && !done; ++it) {
    const Eigen::Matrix<double, 8, 1> g = jac.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < cfg.gradient_tol) break;
    const Eigen::Matrix<double, 8, 8> h = jac.transpose() * jac;
    // The residual ignores the quaternion norm; pin that direction.
    const Eigen::Vector4d qhat = p.head<4>().normalized();
    Eigen::Matrix<double, 8, 8> gauge = Eigen::Matrix<double, 8, 8>::Zero();
    gauge.topLeftCorner<4, 4>() = (h.diagonal().head<4>().mean() + 1.0) * qhat * qhat.transpose();

    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix<double, 8, 8> a = h + gauge;
      a.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      const Params delta = -a.ldlt().solve(g);
      if (!delta.allFinite() || delta.norm() < cfg.step_tol * (p.norm() + cfg.step_tol)) {
        done = true;
        break;
      }
      Params trial = p + delta;
      trial.head<4>().normalize();
      Eigen::MatrixXd trial_jac;
      const Eigen::VectorXd trial_r = residuals(obs, trial, &trial_jac);
      const double trial_c = trial_r.squaredNorm();
      if (std::isfinite(trial_c) && trial_c < c) {
        p = trial;
        r = trial_r;
        jac = std::move(trial_jac);
        c = trial_c;
        out.accepted_costs.push_back(c);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          done = true;
          break;
        }
      }
    }
  }
  out.iterations = it;
  out.final_cost = c;
  out.model = out.accepted_costs.empty() ? a0 : from_params(p);
  return out;
}

Similarity refine(std::span<const Acquisition3D> acqs, const Similarity& a0, const RefineConfig& cfg) {
  require_count(acqs, 2);
  const auto obs = observations(acqs);
  return refine_detailed(obs, a0, cfg).model;
}

Similarity refine(std::span<const Acquisition2D> acqs, const Similarity& a0, const RefineConfig& cfg) {
  require_count(acqs, 4);
  const auto obs = observations(acqs);
  return refine_detailed(obs, a0, cfg).model;
}

}  // namespace uscal::refine
