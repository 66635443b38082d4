#include "uscal/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "uscal/error.hpp"

namespace uscal::io {

using nlohmann::json;

namespace {

constexpr const char* kAcquisitionFormat = "uscal-acquisitions";
constexpr const char* kCalibrationFormat = "uscal-calibration";
constexpr const char* kPhantomFormat = "uscal-phantom";
constexpr double kUnitTolerance = 1e-6;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kParseError, where.empty() ? what : where + ": " + what);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail("", std::string("malformed JSON (") + e.what() + ")");
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing field '") + key + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

Eigen::VectorXd vector_of(const json& v, int n, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    fail(where, "expected an array of " + std::to_string(n) + " numbers");
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = number(v[i], where);
  return out;
}

json to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json quat_json(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Eigen::Quaterniond quat_of(const json& v, const std::string& where) {
  const Eigen::VectorXd q = vector_of(v, 4, where);
  const Eigen::Quaterniond out(q(0), q(1), q(2), q(3));
  if (!(std::abs(out.norm() - 1.0) <= kUnitTolerance)) {
    throw Error(ErrorCode::kInvariantViolation, where + ": rotation quaternion is not unit norm");
  }
  return out.normalized();
}

json pose_json(const TrackingPose& p) {
  return {{"rotation", quat_json(p.rotation)}, {"translation", to_json(p.translation)}};
}

TrackingPose pose_of(const json& v, const std::string& where) {
  TrackingPose p;
  p.rotation = quat_of(field(v, "rotation", where), where + " pose.rotation");
  p.translation = vector_of(field(v, "translation", where), 3, where + " pose.translation");
  return p;
}

void check_header(const json& doc, const char* format) {
  if (!doc.is_object()) fail("", "top level must be an object");
  const json& f = field(doc, "format", "header");
  if (!f.is_string() || f.get<std::string>() != format) fail("header", std::string("format must be '") + format + "'");
  const json& v = field(doc, "version", "header");
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
    fail("header", "unsupported version (expected " + std::to_string(kFormatVersion) + ")");
  }
}

ProbeKind probe_of(const json& doc) {
  const json& p = field(doc, "probe", "header");
  if (!p.is_string()) fail("header", "probe must be a string");
  return probe_from_string(p.get<std::string>());
}

std::string record_tag(std::size_t i) { return "record " + std::to_string(i); }

template <typename Acq, typename Make>
std::vector<Acq> ingest_impl(const AcquisitionFile& file, ProbeKind expected, Make make) {
  if (file.probe != expected) {
    throw Error(ErrorCode::kInvariantViolation,
                "file holds " + std::string(to_string(file.probe)) + " acquisitions");
  }
  std::vector<Acq> out;
  out.reserve(file.records.size());
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    const AcquisitionRecord& r = file.records[i];
    try {
      const Line3 line(r.pose.to_marker(r.needle[0]), r.pose.to_marker(r.needle[1]));
      out.push_back(make(line, r));
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvariantViolation, record_tag(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Point3 TrackingPose::to_marker(const Point3& p_o) const { return rotation.conjugate() * (p_o - translation); }

Point3 TrackingPose::to_tracker(const Point3& p_m) const { return rotation * p_m + translation; }

std::string_view to_string(ProbeKind k) { return k == ProbeKind::k2d ? "2d" : "3d"; }

ProbeKind probe_from_string(std::string_view s) {
  if (s == "2d") return ProbeKind::k2d;
  if (s == "3d") return ProbeKind::k3d;
  throw Error(ErrorCode::kParseError, "probe must be '2d' or '3d', got '" + std::string(s) + "'");
}

AcquisitionFile parse_acquisitions(std::string_view text) {
  const json doc = parse_json(text);
  check_header(doc, kAcquisitionFormat);
  AcquisitionFile file;
  file.probe = probe_of(doc);
  const json& records = field(doc, "records", "header");
  if (!records.is_array() || records.empty()) fail("header", "records must be a non-empty array");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = record_tag(i);
    const json& rec = records[i];
    AcquisitionRecord r;
    r.pose = pose_of(field(rec, "pose", where), where);
    const json& needle = field(rec, "needle", where);
    if (!needle.is_array() || needle.size() != 2) fail(where, "needle must hold two endpoints");
    r.needle[0] = vector_of(needle[0], 3, where + " needle");
    r.needle[1] = vector_of(needle[1], 3, where + " needle");
    if (!((r.needle[0] - r.needle[1]).norm() > kLineEpsilon)) {
      throw Error(ErrorCode::kInvariantViolation, where + ": needle endpoints coincide");
    }
    const json& us = field(rec, "us", where);
    if (file.probe == ProbeKind::k3d) {
      if (!us.is_array() || us.size() != 2) fail(where, "3d records need two US points");
      r.us = {vector_of(us[0], 3, where + " us"), vector_of(us[1], 3, where + " us")};
    } else {
      const Eigen::VectorXd x = vector_of(us, 2, where + " us");
      r.us = {Point3(x(0), x(1), 0.0)};
    }
    file.records.push_back(std::move(r));
  }
  return file;
}

std::string emit_acquisitions(const AcquisitionFile& file) {
  json records = json::array();
  for (const AcquisitionRecord& r : file.records) {
    json us;
    if (file.probe == ProbeKind::k3d) {
      us = json::array({to_json(r.us.at(0)), to_json(r.us.at(1))});
    } else {
      us = to_json(r.us.at(0).head<2>());
    }
    records.push_back({{"pose", pose_json(r.pose)},
                       {"needle", json::array({to_json(r.needle[0]), to_json(r.needle[1])})},
                       {"us", us}});
  }
  const json doc = {{"format", kAcquisitionFormat},
                    {"version", file.version},
                    {"probe", to_string(file.probe)},
                    {"units", {{"tracked", "mm"}, {"us", "us-units"}}},
                    {"records", records}};
  return doc.dump(2) + "\n";
}

std::vector<Acquisition3D> ingest_3d(const AcquisitionFile& file) {
  return ingest_impl<Acquisition3D>(file, ProbeKind::k3d, [](const Line3& l, const AcquisitionRecord& r) {
    return Acquisition3D(l, r.us.at(0), r.us.at(1));
  });
}

std::vector<Acquisition2D> ingest_2d(const AcquisitionFile& file) {
  return ingest_impl<Acquisition2D>(file, ProbeKind::k2d, [](const Line3& l, const AcquisitionRecord& r) {
    return Acquisition2D(l, r.us.at(0).head<2>());
  });
}

AcquisitionFile make_file(std::span<const Acquisition3D> acqs) {
  AcquisitionFile f;
  f.probe = ProbeKind::k3d;
  for (const auto& a : acqs) {
    f.records.push_back({TrackingPose{}, {a.tracked_line.p0(), a.tracked_line.p1()},
                         {a.us_points[0], a.us_points[1]}});
  }
  return f;
}

AcquisitionFile make_file(std::span<const Acquisition2D> acqs) {
  AcquisitionFile f;
  f.probe = ProbeKind::k2d;
  for (const auto& a : acqs) {
    f.records.push_back({TrackingPose{}, {a.tracked_line.p0(), a.tracked_line.p1()}, {a.embedded()}});
  }
  return f;
}

std::string emit_calibration(const CalibrationResult& c) {
  json inliers = json::array();
  for (bool b : c.inliers) inliers.push_back(b);
  const json doc = {
      {"format", kCalibrationFormat},
      {"version", kFormatVersion},
      {"probe", to_string(c.probe)},
      {"solver", c.solver},
      {"seed", c.seed},
      {"ransac", {{"threshold_mm", c.ransac_threshold_mm}, {"iterations", c.ransac_iterations}}},
      {"rotation", quat_json(c.model.quaternion())},
      {"translation", to_json(c.model.translation())},
      {"scale", c.model.scale()},
      {"inliers", inliers},
      {"residuals_mm", c.residuals_mm},
      {"residual_stats",
       {{"inlier_count", c.stats.inlier_count},
        {"mean_mm", c.stats.mean_mm},
        {"rms_mm", c.stats.rms_mm},
        {"max_mm", c.stats.max_mm}}}};
  return doc.dump(2) + "\n";
}

CalibrationResult parse_calibration(std::string_view text) {
  const json doc = parse_json(text);
  check_header(doc, kCalibrationFormat);
  CalibrationResult c;
  c.probe = probe_of(doc);
  const Eigen::Quaterniond q = quat_of(field(doc, "rotation", "calibration"), "calibration rotation");
  const Eigen::Vector3d t = vector_of(field(doc, "translation", "calibration"), 3, "calibration translation");
  const double s = number(field(doc, "scale", "calibration"), "calibration scale");
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::kInvariantViolation, "calibration scale must be positive");
  c.model = Similarity(q, t, s);
  if (doc.contains("solver") && doc["solver"].is_string()) c.solver = doc["solver"].get<std::string>();
  if (doc.contains("seed") && doc["seed"].is_number_unsigned()) c.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("inliers") && doc["inliers"].is_array()) {
    for (const json& b : doc["inliers"]) c.inliers.push_back(b.is_boolean() && b.get<bool>());
  }
  return c;
}

PhantomFile parse_phantom(std::string_view text) {
  const json doc = parse_json(text);
  check_header(doc, kPhantomFormat);
  PhantomFile f;
  f.probe = probe_of(doc);
  const json& records = field(doc, "records", "header");
  if (!records.is_array() || records.empty()) fail("header", "records must be a non-empty array");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = record_tag(i);
    const json& rec = records[i];
    PhantomRecord r;
    r.pose = pose_of(field(rec, "pose", where), where);
    if (f.probe == ProbeKind::k3d) {
      r.us = vector_of(field(rec, "us", where), 3, where + " us");
    } else {
      const Eigen::VectorXd x = vector_of(field(rec, "us", where), 2, where + " us");
      r.us = Point3(x(0), x(1), 0.0);
    }
    r.point = vector_of(field(rec, "point", where), 3, where + " point");
    f.records.push_back(r);
  }
  return f;
}

std::string emit_phantom(const PhantomFile& file) {
  json records = json::array();
  for (const PhantomRecord& r : file.records) {
    const json us = file.probe == ProbeKind::k3d ? to_json(r.us) : to_json(r.us.head<2>());
    records.push_back({{"pose", pose_json(r.pose)}, {"us", us}, {"point", to_json(r.point)}});
  }
  const json doc = {{"format", kPhantomFormat},
                    {"version", kFormatVersion},
                    {"probe", to_string(file.probe)},
                    {"units", {{"tracked", "mm"}, {"us", "us-units"}}},
                    {"records", records}};
  return doc.dump(2) + "\n";
}

sim::SimConfig parse_sim_config(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) fail("config", "top level must be an object");
  sim::SimConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    const std::string where = "config key '" + key + "'";
    auto integer = [&]() {
      if (!v.is_number_integer()) fail(where, "expected an integer");
      return v.get<long long>();
    };
    auto range = [&](int& lo, int& hi) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        fail(where, "expected [min, max]");
      }
      lo = v[0].get<int>();
      hi = v[1].get<int>();
    };
    if (key == "scale_gt") cfg.scale_gt = number(v, where);
    else if (key == "n_lines") cfg.n_lines = static_cast<int>(integer());
    else if (key == "segment_length_mm") cfg.segment_length_mm = number(v, where);
    else if (key == "noise_us_sigma") cfg.noise_us_sigma = number(v, where);
    else if (key == "noise_track_sigma_mm") cfg.noise_track_sigma_mm = number(v, where);
    else if (key == "trials_per_n") cfg.trials_per_n = static_cast<int>(integer());
    else if (key == "n_range_3d") range(cfg.n_min_3d, cfg.n_max_3d);
    else if (key == "n_range_2d") range(cfg.n_min_2d, cfg.n_max_2d);
    else if (key == "rng_seed") {
      if (!v.is_number_unsigned()) fail(where, "expected a non-negative integer");
      cfg.rng_seed = v.get<std::uint64_t>();
    } else if (key == "fov_radius_mm") cfg.fov_radius_mm = number(v, where);
    else if (key == "fov_aperture_deg") cfg.fov_aperture_deg = number(v, where);
    else if (key == "slice_angle_deg") cfg.slice_angle_deg = number(v, where);
    else if (key == "ransac_threshold_mm") cfg.ransac_threshold_mm = number(v, where);
    else if (key == "ransac_max_iterations") cfg.ransac_max_iterations = static_cast<int>(integer());
    else if (key == "refine") {
      if (!v.is_boolean()) fail(where, "expected true or false");
      cfg.refine = v.get<bool>();
    }
    else if (key == "methods") {
      if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of method tags");
      cfg.methods.clear();
      for (const json& m : v) {
        if (!m.is_string()) fail(where, "method tags are strings");
        cfg.methods.push_back(sim::method_from_string(m.get<std::string>()));
      }
    } else {
      fail(where, "unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

std::string emit_sim_config(const sim::SimConfig& cfg) {
  json methods = json::array();
  for (sim::Method m : cfg.methods) methods.push_back(sim::to_string(m));
  const json doc = {{"scale_gt", cfg.scale_gt},
                    {"n_lines", cfg.n_lines},
                    {"segment_length_mm", cfg.segment_length_mm},
                    {"noise_us_sigma", cfg.noise_us_sigma},
                    {"noise_track_sigma_mm", cfg.noise_track_sigma_mm},
                    {"trials_per_n", cfg.trials_per_n},
                    {"n_range_3d", {cfg.n_min_3d, cfg.n_max_3d}},
                    {"n_range_2d", {cfg.n_min_2d, cfg.n_max_2d}},
                    {"rng_seed", cfg.rng_seed},
                    {"fov_radius_mm", cfg.fov_radius_mm},
                    {"fov_aperture_deg", cfg.fov_aperture_deg},
                    {"slice_angle_deg", cfg.slice_angle_deg},
                    {"ransac_threshold_mm", cfg.ransac_threshold_mm},
                    {"ransac_max_iterations", cfg.ransac_max_iterations},
                    {"refine", cfg.refine},
                    {"methods", methods}};
  return doc.dump(2) + "\n";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trial_csv(std::ostream& os, std::span<const sim::TrialReport> reports) {
  os << "method,N,trial,rot_err_rad,trans_err_mm,scale_err,failed\n";
  for (const sim::TrialReport& r : reports) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    os << sim::to_string(r.method) << ',' << r.n_used << ',' << r.trial << ','
       << format_double(r.failed ? nan : r.rot_err_rad) << ',' << format_double(r.failed ? nan : r.trans_err_mm)
       << ',' << format_double(r.failed ? nan : r.scale_err) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvariantViolation, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kInvariantViolation, "write to '" + path.string() + "' failed");
}

}  // namespace uscal::io
