#include "uscal/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "uscal/error.hpp"
#include "uscal/refine.hpp"
#include "uscal/robust.hpp"

namespace uscal::sim {

namespace {

constexpr double kAnchorClearanceMm = 20.0;
constexpr double kMinSliceSeparation = 20.0;  // US units between the two slice hits
constexpr int kMaxDraws = 1000000;

double deg(double d) { return d * std::numbers::pi / 180.0; }

Eigen::Quaterniond uniform_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-6);
  return q.normalized();
}

Eigen::Vector3d uniform_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d d;
  do {
    d = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (d.norm() < 1e-6);
  return d.normalized();
}

struct Fov {
  double radius;      // US units
  double half_angle;  // rad

  bool contains(const Point3& x) const {
    const double r = x.norm();
    if (r > radius || r < 0.1 * radius) return false;
    return std::acos(std::clamp(x.y() / r, -1.0, 1.0)) <= half_angle;
  }
};

// Point on the scan plane z = 0 inside the sector.
Point3 sector_point(const Fov& fov, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> radial(0.25 * fov.radius, 0.9 * fov.radius);
  std::uniform_real_distribution<double> angle(-0.8 * fov.half_angle, 0.8 * fov.half_angle);
  const double r = radial(rng);
  const double phi = angle(rng);
  return {r * std::sin(phi), r * std::cos(phi), 0.0};
}

Point3 perturb(const Point3& p, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return p;
  std::normal_distribution<double> n(0.0, sigma);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return p + Eigen::Vector3d(x, y, z);
}

std::vector<int> sample_indices(int pool, int n, std::mt19937_64& rng) {
  std::vector<int> idx(pool);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, pool - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

bool method_runs_at(const SimConfig& cfg, Method m, int n) {
  return is_3d(m) ? (n >= cfg.n_min_3d && n <= cfg.n_max_3d) : (n >= cfg.n_min_2d && n <= cfg.n_max_2d);
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kLinear3d: return "linear3d";
    case Method::kMinimal3d: return "minimal3d";
    case Method::kLinear2d: return "linear2d";
    case Method::kMinimal2d: return "minimal2d";
    case Method::kMinimal2dGeneral: return "minimal2d_general";
  }
  return "unknown";
}

Method method_from_string(std::string_view tag) {
  for (Method m : {Method::kLinear3d, Method::kMinimal3d, Method::kLinear2d, Method::kMinimal2d,
                   Method::kMinimal2dGeneral}) {
    if (to_string(m) == tag) return m;
  }
  throw Error(ErrorCode::kParseError, "unknown method '" + std::string(tag) + "'");
}

bool is_3d(Method m) { return m == Method::kLinear3d || m == Method::kMinimal3d; }

int sample_size(Method m) {
  switch (m) {
    case Method::kLinear3d: return 3;
    case Method::kMinimal3d: return 2;
    case Method::kLinear2d: return 5;
    default: return 4;
  }
}

void SimConfig::validate() const {
  const bool counts_ok = n_lines > 0 && trials_per_n > 0 && n_min_3d > 0 && n_min_2d > 0 &&
                         ransac_max_iterations > 0;
  const bool ranges_ok = n_min_3d <= n_max_3d && n_min_2d <= n_max_2d && n_max_3d <= n_lines &&
                         n_max_2d <= n_lines;
  const bool sizes_ok = scale_gt > 0.0 && segment_length_mm > 0.0 && fov_radius_mm > 0.0 &&
                        fov_aperture_deg > 0.0 && fov_aperture_deg < 180.0 && slice_angle_deg > 0.0 &&
                        slice_angle_deg < 90.0 && ransac_threshold_mm > 0.0;
  const bool sigmas_ok = noise_us_sigma >= 0.0 && noise_track_sigma_mm >= 0.0;
  if (!(counts_ok && ranges_ok && sizes_ok && sigmas_ok)) {
    throw Error(ErrorCode::kInvariantViolation, "invalid simulation configuration");
  }
  if (n_min_3d < 2 || n_min_2d < 4) {
    throw Error(ErrorCode::kInvariantViolation, "N ranges must cover at least a minimal sample");
  }
}

Scene generate_scene(const SimConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const double s = cfg.scale_gt;
  const Fov fov{cfg.fov_radius_mm / s, deg(cfg.fov_aperture_deg) / 2.0};

  // Marker origin behind the probe apex, expressed in US units.
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Quaterniond q = uniform_rotation(rng);
  const Eigen::Vector3d marker_in_us(0.4 * fov.radius * u(rng), -1.2 * fov.radius + 0.2 * fov.radius * u(rng),
                                     0.4 * fov.radius * u(rng));
  Scene scene{Similarity(q, -s * (q * marker_in_us), s), {}, {}};
  const Eigen::Matrix3d rot = scene.truth.rotation();

  const double alpha = deg(cfg.slice_angle_deg);
  const double half_len = cfg.segment_length_mm / 2.0;
  std::uniform_real_distribution<double> slide(-half_len / 2.0, half_len / 2.0);
  std::normal_distribution<double> us_noise(0.0, cfg.noise_us_sigma > 0.0 ? cfg.noise_us_sigma : 1.0);

  int draws = 0;
  while (static_cast<int>(scene.pool2d.size()) < cfg.n_lines) {
    if (++draws > kMaxDraws) throw Error(ErrorCode::kInvariantViolation, "field of view admits no needles");
    const Point3 q0 = sector_point(fov, rng);
    const Eigen::Vector3d d = uniform_direction(rng);
    if (std::abs(d.z()) < 0.2) continue;

    // Hits on the two slices tilted in elevation about the lateral axis.
    std::array<Point3, 2> hits;
    std::array<Eigen::Vector3d, 2> axial;
    bool ok = true;
    for (int k = 0; k < 2; ++k) {
      const double th = k == 0 ? -alpha : alpha;
      const Eigen::Vector3d normal(0.0, -std::sin(th), std::cos(th));
      const double denom = normal.dot(d);
      if (std::abs(denom) < 0.1) {
        ok = false;
        break;
      }
      hits[k] = q0 - (normal.dot(q0) / denom) * d;
      axial[k] = Eigen::Vector3d(0.0, std::cos(th), std::sin(th));
      ok = ok && fov.contains(hits[k]);
    }
    if (!ok || (hits[0] - hits[1]).norm() < kMinSliceSeparation) continue;

    const Eigen::Vector3d dir_m = rot * d;
    const Point3 center = scene.truth.apply(q0) + slide(rng) * dir_m;
    const Line3 exact(center - half_len * dir_m, center + half_len * dir_m);
    if (line_point_distance(exact, Point3::Zero()) < kAnchorClearanceMm) continue;

    const Line3 tracked(perturb(exact.p0(), cfg.noise_track_sigma_mm, rng),
                        perturb(exact.p1(), cfg.noise_track_sigma_mm, rng));
    std::array<Point3, 2> x3;
    for (int k = 0; k < 2; ++k) {
      x3[k] = hits[k];
      if (cfg.noise_us_sigma > 0.0) {
        const double a = us_noise(rng);
        const double b = us_noise(rng);
        x3[k] += a * Eigen::Vector3d::UnitX() + b * axial[k];
      }
    }
    Eigen::Vector2d x2 = q0.head<2>();
    if (cfg.noise_us_sigma > 0.0) {
      const double a = us_noise(rng);
      const double b = us_noise(rng);
      x2 += Eigen::Vector2d(a, b);
    }
    scene.pool3d.emplace_back(tracked, x3[0], x3[1]);
    scene.pool2d.emplace_back(tracked, x2);
  }
  return scene;
}

std::mt19937_64 trial_stream(std::uint64_t seed, int n, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

namespace {

// Inliers of the consensus model, or every acquisition when the consensus is
// too small to refine on.
template <typename Acq>
std::vector<Acq> refinement_set(std::span<const Acq> acqs, const std::vector<bool>& mask, std::size_t minimum) {
  std::vector<Acq> inliers;
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    if (mask[i]) inliers.push_back(acqs[i]);
  }
  if (inliers.size() < minimum) return std::vector<Acq>(acqs.begin(), acqs.end());
  return inliers;
}

}  // namespace

Similarity calibrate_once(Method m, std::span<const Acquisition3D> acqs3d,
                          std::span<const Acquisition2D> acqs2d, double threshold_mm,
                          int max_iterations, std::uint64_t seed, bool refine_result) {
  robust::RansacConfig rc;
  rc.threshold = threshold_mm;
  rc.max_iterations = max_iterations;
  rc.rng_seed = seed;
  rc.min_inliers = 0;
  if (is_3d(m)) {
    const robust::SolverHandle3D h =
        m == Method::kLinear3d ? robust::linear_3d_solver() : robust::minimal_3d_solver();
    const robust::RansacResult rr = robust::ransac(acqs3d, h, rc);
    if (!refine_result) return rr.model;
    return refine::refine(refinement_set(acqs3d, rr.inlier_mask, 2), rr.model);
  }
  robust::SolverHandle2D h;
  switch (m) {
    case Method::kLinear2d: h = robust::linear_2d_solver(); break;
    case Method::kMinimal2d: h = robust::minimal_2d_solver(); break;
    default: h = robust::minimal_2d_general_solver(); break;
  }
  const robust::RansacResult rr = robust::ransac(acqs2d, h, rc);
  if (!refine_result) return rr.model;
  return refine::refine(refinement_set(acqs2d, rr.inlier_mask, 4), rr.model);
}

std::vector<TrialReport> run_experiment(const SimConfig& cfg) {
  cfg.validate();
  std::vector<TrialReport> out;
  const int n_lo = std::min(cfg.n_min_3d, cfg.n_min_2d);
  const int n_hi = std::max(cfg.n_max_3d, cfg.n_max_2d);
  for (int n = n_lo; n <= n_hi; ++n) {
    for (int trial = 0; trial < cfg.trials_per_n; ++trial) {
      std::mt19937_64 rng = trial_stream(cfg.rng_seed, n, trial);
      const Scene scene = generate_scene(cfg, rng);
      const std::vector<int> idx = sample_indices(cfg.n_lines, n, rng);
      const std::uint64_t ransac_seed = rng();
      std::vector<Acquisition3D> a3;
      std::vector<Acquisition2D> a2;
      for (int i : idx) {
        a3.push_back(scene.pool3d[i]);
        a2.push_back(scene.pool2d[i]);
      }
      for (Method m : cfg.methods) {
        if (!method_runs_at(cfg, m, n)) continue;
        TrialReport rep;
        rep.method = m;
        rep.n_used = n;
        rep.trial = trial;
        try {
          const Similarity est =
              calibrate_once(m, a3, a2, cfg.ransac_threshold_mm, cfg.ransac_max_iterations, ransac_seed, cfg.refine);
          rep.rot_err_rad = rotation_error(est.rotation(), scene.truth.rotation());
          rep.trans_err_mm = (est.translation() - scene.truth.translation()).norm();
          rep.scale_err = std::abs(est.scale() - scene.truth.scale());
        } catch (const Error&) {
          rep.failed = true;
        }
        out.push_back(rep);
      }
    }
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

Medians medians(std::span<const TrialReport> reports, Method m, int n) {
  std::vector<double> r, t, s;
  Medians out;
  for (const TrialReport& rep : reports) {
    if (rep.method != m || rep.n_used != n) continue;
    if (rep.failed) {
      ++out.failed;
      continue;
    }
    r.push_back(rep.rot_err_rad);
    t.push_back(rep.trans_err_mm);
    s.push_back(rep.scale_err);
  }
  out.used = static_cast<int>(r.size());
  out.rot_err_rad = median(std::move(r));
  out.trans_err_mm = median(std::move(t));
  out.scale_err = median(std::move(s));
  return out;
}

double pra(const Similarity& a, const Point3& us_point, const Point3& tracked_point) {
  return (a.apply(us_point) - tracked_point).norm();
}

std::vector<PhantomPoint> generate_phantom(const Similarity& truth, const SimConfig& cfg, int count,
                                           bool planar, std::mt19937_64& rng) {
  const Fov fov{cfg.fov_radius_mm / cfg.scale_gt, deg(cfg.fov_aperture_deg) / 2.0};
  std::uniform_real_distribution<double> tilt(-deg(cfg.slice_angle_deg), deg(cfg.slice_angle_deg));
  std::vector<PhantomPoint> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Point3 x = sector_point(fov, rng);
    if (!planar) x = Eigen::AngleAxisd(tilt(rng), Eigen::Vector3d::UnitX()) * x;
    const Point3 tracked = perturb(truth.apply(x), cfg.noise_track_sigma_mm, rng);
    Point3 us = perturb(x, cfg.noise_us_sigma, rng);
    if (planar) us.z() = 0.0;
    out.push_back({us, tracked});
  }
  return out;
}

PraStudy phantom_pra_study(const SimConfig& cfg, Method m, int n, int trials, int points_per_trial) {
  cfg.validate();
  PraStudy out;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng = trial_stream(cfg.rng_seed, n, trial);
    const Scene scene = generate_scene(cfg, rng);
    const std::vector<int> idx = sample_indices(cfg.n_lines, n, rng);
    const std::uint64_t ransac_seed = rng();
    std::vector<Acquisition3D> a3;
    std::vector<Acquisition2D> a2;
    for (int i : idx) {
      a3.push_back(scene.pool3d[i]);
      a2.push_back(scene.pool2d[i]);
    }
    const auto phantom = generate_phantom(scene.truth, cfg, points_per_trial, !is_3d(m), rng);
    for (const PhantomPoint& p : phantom) out.noise_floor.push_back(pra(scene.truth, p.us_point, p.tracked_point));
    try {
      const Similarity est =
          calibrate_once(m, a3, a2, cfg.ransac_threshold_mm, cfg.ransac_max_iterations, ransac_seed, cfg.refine);
      for (const PhantomPoint& p : phantom) out.calibrated.push_back(pra(est, p.us_point, p.tracked_point));
    } catch (const Error&) {
      ++out.failed_calibrations;
    }
  }
  return out;
}

}  // namespace uscal::sim
