#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uscal/acquisition.hpp"
#include "uscal/geometry.hpp"
#include "uscal/sim.hpp"

namespace uscal::io {

inline constexpr int kFormatVersion = 1;

/// Pose of the probe marker in the tracker frame, T_{M->O}.
struct TrackingPose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Maps a point measured in O back into M.
  Point3 to_marker(const Point3& p_o) const;
  Point3 to_tracker(const Point3& p_m) const;
};

enum class ProbeKind { k2d, k3d };

std::string_view to_string(ProbeKind k);
/// Throws kParseError for anything but "2d" / "3d".
ProbeKind probe_from_string(std::string_view s);

struct AcquisitionRecord {
  TrackingPose pose;
  std::array<Point3, 2> needle;  // endpoints in O, mm
  std::vector<Point3> us;        // two 3D points (3d) or one point with z = 0 (2d)
};

struct AcquisitionFile {
  int version = kFormatVersion;
  ProbeKind probe = ProbeKind::k3d;
  std::vector<AcquisitionRecord> records;
};

/// Throws kParseError (malformed text or schema, with record context) and
/// kInvariantViolation (record content violating a domain invariant).
AcquisitionFile parse_acquisitions(std::string_view text);
std::string emit_acquisitions(const AcquisitionFile& file);

std::vector<Acquisition3D> ingest_3d(const AcquisitionFile& file);
std::vector<Acquisition2D> ingest_2d(const AcquisitionFile& file);

/// Records with identity poses, so that ingesting gives back `acqs`.
AcquisitionFile make_file(std::span<const Acquisition3D> acqs);
AcquisitionFile make_file(std::span<const Acquisition2D> acqs);

struct ResidualStats {
  int inlier_count = 0;
  double mean_mm = 0.0;
  double rms_mm = 0.0;
  double max_mm = 0.0;
};

struct CalibrationResult {
  ProbeKind probe = ProbeKind::k3d;
  std::string solver;
  std::uint64_t seed = 0;
  double ransac_threshold_mm = 5.0;
  int ransac_iterations = 0;
  Similarity model;
  std::vector<bool> inliers;
  std::vector<double> residuals_mm;  // per record, input order
  ResidualStats stats;               // over inliers
};

std::string emit_calibration(const CalibrationResult& c);
/// Reads back at least the model; optional fields default.
CalibrationResult parse_calibration(std::string_view text);

struct PhantomRecord {
  TrackingPose pose;
  Point3 us;     // US units, z = 0 for 2D probes
  Point3 point;  // target measured by the tracker in O, mm
};

struct PhantomFile {
  ProbeKind probe = ProbeKind::k3d;
  std::vector<PhantomRecord> records;
};

PhantomFile parse_phantom(std::string_view text);
std::string emit_phantom(const PhantomFile& file);

/// Keys mirror SimConfig's fields; missing keys keep their defaults and
/// unknown keys are rejected.
sim::SimConfig parse_sim_config(std::string_view text);
std::string emit_sim_config(const sim::SimConfig& cfg);

/// Columns: method,N,trial,rot_err_rad,trans_err_mm,scale_err,failed.
void write_trial_csv(std::ostream& os, std::span<const sim::TrialReport> reports);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace uscal::io
