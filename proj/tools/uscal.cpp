// uscal: command-line front end for probe calibration, simulation and
// phantom validation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "uscal/error.hpp"
#include "uscal/io.hpp"
#include "uscal/refine.hpp"
#include "uscal/robust.hpp"
#include "uscal/sim.hpp"

namespace {

using namespace uscal;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitSolver = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("USCAL_SEED");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const char* end = env + std::strlen(env);
  const auto res = std::from_chars(env, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw UsageError("USCAL_SEED must be a non-negative integer");
  return v;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text_file(path, text);
  }
}

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

void print_model(const Similarity& a) {
  const Eigen::AngleAxisd aa(a.quaternion());
  std::cout << "scale        " << io::format_double(a.scale()) << "\n"
            << "translation  " << io::format_double(a.translation().x()) << " "
            << io::format_double(a.translation().y()) << " " << io::format_double(a.translation().z()) << " mm\n"
            << "rotation     " << io::format_double(degrees(aa.angle())) << " deg about "
            << io::format_double(aa.axis().x()) << " " << io::format_double(aa.axis().y()) << " "
            << io::format_double(aa.axis().z()) << "\n";
}

// ---- calibrate -----------------------------------------------------------

struct CalibrateArgs {
  std::string input;
  std::string mode;
  std::string solver = "minimal";
  double threshold = 5.0;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  std::string output;
};

template <typename Acq>
io::CalibrationResult calibrate_with(std::span<const Acq> acqs, const robust::SolverHandle<Acq>& handle,
                                     const CalibrateArgs& args, int min_inliers) {
  robust::RansacConfig rc;
  rc.threshold = args.threshold;
  rc.rng_seed = args.seed;
  rc.max_iterations = args.max_iterations;
  rc.min_inliers = min_inliers;
  const robust::RansacResult rr = robust::ransac(acqs, handle, rc);
  std::vector<Acq> inliers;
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    if (rr.inlier_mask[i]) inliers.push_back(acqs[i]);
  }
  io::CalibrationResult out;
  out.solver = args.solver;
  out.seed = args.seed;
  out.ransac_threshold_mm = args.threshold;
  out.ransac_iterations = rr.iterations_used;
  out.model = refine::refine(std::span<const Acq>(inliers), rr.model);
  out.inliers = rr.inlier_mask;
  double sum = 0.0, sq = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    const double r = residual(out.model, acqs[i]);
    out.residuals_mm.push_back(r);
    if (!rr.inlier_mask[i]) continue;
    ++out.stats.inlier_count;
    sum += r;
    sq += r * r;
    mx = std::max(mx, r);
  }
  const double n = std::max(out.stats.inlier_count, 1);
  out.stats.mean_mm = sum / n;
  out.stats.rms_mm = std::sqrt(sq / n);
  out.stats.max_mm = mx;
  return out;
}

int run_calibrate(const CalibrateArgs& args) {
  const io::AcquisitionFile file = io::parse_acquisitions(io::read_text_file(args.input));
  const io::ProbeKind mode = io::probe_from_string(args.mode);
  if (file.probe != mode) {
    throw Error(ErrorCode::kInvariantViolation, "input holds " + std::string(io::to_string(file.probe)) +
                                                    " acquisitions but --mode is " + args.mode);
  }
  io::CalibrationResult result;
  if (mode == io::ProbeKind::k3d) {
    if (args.solver == "minimal-general") throw UsageError("minimal-general applies to 2d probes only");
    const auto acqs = io::ingest_3d(file);
    const auto handle = args.solver == "linear" ? robust::linear_3d_solver() : robust::minimal_3d_solver();
    result = calibrate_with<Acquisition3D>(acqs, handle, args, 2);
  } else {
    const auto acqs = io::ingest_2d(file);
    const auto handle = args.solver == "linear"    ? robust::linear_2d_solver()
                        : args.solver == "minimal" ? robust::minimal_2d_solver()
                                                   : robust::minimal_2d_general_solver();
    result = calibrate_with<Acquisition2D>(acqs, handle, args, 4);
  }
  result.probe = mode;
  if (!args.output.empty() && args.output != "-") {
    io::write_text_file(args.output, io::emit_calibration(result));
    print_model(result.model);
    std::cout << "inliers      " << result.stats.inlier_count << "/" << result.inliers.size() << "\n"
              << "residual     mean " << io::format_double(result.stats.mean_mm) << " mm, rms "
              << io::format_double(result.stats.rms_mm) << " mm, max " << io::format_double(result.stats.max_mm)
              << " mm\n";
  } else {
    std::cout << io::emit_calibration(result);
  }
  return kExitOk;
}

// ---- simulate ------------------------------------------------------------

int run_simulate(const std::string& config, const std::string& output, const std::optional<std::uint64_t>& seed) {
  sim::SimConfig cfg = config.empty() ? sim::SimConfig{} : io::parse_sim_config(io::read_text_file(config));
  if (seed) cfg.rng_seed = *seed;
  const auto reports = sim::run_experiment(cfg);
  std::ostringstream csv;
  io::write_trial_csv(csv, reports);
  emit(output, csv.str());
  return kExitOk;
}

// ---- validate ------------------------------------------------------------

int run_validate(const std::string& calibration, const std::string& phantom, const std::string& output) {
  const io::CalibrationResult cal = io::parse_calibration(io::read_text_file(calibration));
  const io::PhantomFile ph = io::parse_phantom(io::read_text_file(phantom));
  std::ostringstream csv;
  csv << "record,pra_mm\n";
  std::vector<double> values;
  for (std::size_t i = 0; i < ph.records.size(); ++i) {
    const io::PhantomRecord& r = ph.records[i];
    const double v = sim::pra(cal.model, r.us, r.pose.to_marker(r.point));
    values.push_back(v);
    csv << i << ',' << io::format_double(v) << '\n';
  }
  emit(output, csv.str());
  if (!output.empty() && output != "-") {
    std::cout << "records " << values.size() << ", median PRA " << io::format_double(sim::median(values))
              << " mm, max " << io::format_double(*std::max_element(values.begin(), values.end())) << " mm\n";
  }
  return kExitOk;
}

// ---- selftest ------------------------------------------------------------

int run_selftest(std::uint64_t seed, int instances) {
  sim::SimConfig cfg;
  cfg.noise_us_sigma = 0.0;
  cfg.noise_track_sigma_mm = 0.0;
  cfg.n_lines = 10;
  bool all_ok = true;
  for (sim::Method m : cfg.methods) {
    int ok = 0;
    for (int i = 0; i < instances; ++i) {
      std::mt19937_64 rng = sim::trial_stream(seed, sim::sample_size(m), i);
      const sim::Scene scene = sim::generate_scene(cfg, rng);
      const int k = sim::sample_size(m);
      const std::span<const Acquisition3D> a3(scene.pool3d.data(), k);
      const std::span<const Acquisition2D> a2(scene.pool2d.data(), k);
      std::vector<Similarity> cands;
      try {
        switch (m) {
          case sim::Method::kLinear3d: cands = robust::linear_3d_solver().solve(a3); break;
          case sim::Method::kMinimal3d: cands = robust::minimal_3d_solver().solve(a3); break;
          case sim::Method::kLinear2d: cands = robust::linear_2d_solver().solve(a2); break;
          case sim::Method::kMinimal2d: cands = robust::minimal_2d_solver().solve(a2); break;
          case sim::Method::kMinimal2dGeneral: cands = robust::minimal_2d_general_solver().solve(a2); break;
        }
      } catch (const Error&) {
      }
      const bool found = std::any_of(cands.begin(), cands.end(), [&](const Similarity& c) {
        return rotation_error(c.rotation(), scene.truth.rotation()) < 1e-6 &&
               (c.translation() - scene.truth.translation()).norm() < 1e-5 &&
               std::abs(c.scale() - scene.truth.scale()) < 1e-8;
      });
      ok += found ? 1 : 0;
    }
    const bool pass = ok == instances;
    all_ok = all_ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << sim::to_string(m) << " noise-free recovery " << ok << "/"
              << instances << "\n";
  }
  return all_ok ? kExitOk : kExitSolver;
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  std::string probe = "3d";
  int count = 20;
  std::uint64_t seed = 0;
  double noise_us = 0.0;
  double noise_track = 0.0;
  std::string output;
  std::string truth;
  std::string phantom;
  int phantom_count = 10;
};

io::TrackingPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  io::TrackingPose p;
  p.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
  p.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return p;
}

int run_generate(const GenerateArgs& args) {
  const io::ProbeKind probe = io::probe_from_string(args.probe);
  sim::SimConfig cfg;
  cfg.n_lines = args.count;
  cfg.noise_us_sigma = args.noise_us;
  cfg.noise_track_sigma_mm = args.noise_track;
  cfg.n_max_3d = std::min(cfg.n_max_3d, args.count);
  cfg.n_max_2d = std::min(cfg.n_max_2d, args.count);
  cfg.n_min_3d = std::min(cfg.n_min_3d, cfg.n_max_3d);
  cfg.n_min_2d = std::min(cfg.n_min_2d, cfg.n_max_2d);
  if (args.count < (probe == io::ProbeKind::k3d ? 2 : 4)) throw UsageError("--count below the minimal sample size");
  std::mt19937_64 rng(args.seed);
  const sim::Scene scene = sim::generate_scene(cfg, rng);

  io::AcquisitionFile file;
  file.probe = probe;
  for (int i = 0; i < args.count; ++i) {
    const io::TrackingPose pose = random_pose(rng);
    io::AcquisitionRecord r;
    r.pose = pose;
    const Line3& line = scene.pool3d[i].tracked_line;
    r.needle = {pose.to_tracker(line.p0()), pose.to_tracker(line.p1())};
    if (probe == io::ProbeKind::k3d) {
      r.us = {scene.pool3d[i].us_points[0], scene.pool3d[i].us_points[1]};
    } else {
      r.us = {scene.pool2d[i].embedded()};
    }
    file.records.push_back(r);
  }
  emit(args.output, io::emit_acquisitions(file));

  if (!args.truth.empty()) {
    io::CalibrationResult truth;
    truth.probe = probe;
    truth.solver = "ground-truth";
    truth.seed = args.seed;
    truth.model = scene.truth;
    io::write_text_file(args.truth, io::emit_calibration(truth));
  }
  if (!args.phantom.empty()) {
    io::PhantomFile ph;
    ph.probe = probe;
    const auto pts =
        sim::generate_phantom(scene.truth, cfg, args.phantom_count, probe == io::ProbeKind::k2d, rng);
    for (const sim::PhantomPoint& p : pts) {
      const io::TrackingPose pose = random_pose(rng);
      ph.records.push_back({pose, p.us_point, pose.to_tracker(p.tracked_point)});
    }
    io::write_text_file(args.phantom, io::emit_phantom(ph));
  }
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (category_of(e.code())) {
    case ErrorCategory::kSolver: return kExitSolver;
    default: return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity calibration of tracked 2D/3D ultrasound probes from needle scans"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "RANSAC + refinement on an acquisition file");
  calibrate->add_option("--input", cal.input, "acquisition file")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--mode", cal.mode, "probe kind")->required()->check(CLI::IsMember({"2d", "3d"}));
  calibrate->add_option("--solver", cal.solver, "sample solver")
      ->check(CLI::IsMember({"linear", "minimal", "minimal-general"}))
      ->capture_default_str();
  calibrate->add_option("--ransac-threshold-mm", cal.threshold, "inlier threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* cal_seed = calibrate->add_option("--seed", cal.seed, "RANSAC seed (default: $USCAL_SEED or 0)");
  calibrate->add_option("--max-iterations", cal.max_iterations, "RANSAC iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  calibrate->add_option("--output", cal.output, "calibration file (default: stdout)");

  std::string sim_config, sim_output;
  std::uint64_t sim_seed_value = 0;
  auto* simulate = app.add_subcommand("simulate", "synthetic accuracy experiment to CSV");
  simulate->add_option("--config", sim_config, "JSON simulation config")->check(CLI::ExistingFile);
  simulate->add_option("--output", sim_output, "CSV file (default: stdout)");
  auto* sim_seed = simulate->add_option("--seed", sim_seed_value, "override the config seed");

  std::string val_cal, val_phantom, val_output;
  auto* validate = app.add_subcommand("validate", "PRA of a calibration on phantom targets");
  validate->add_option("--calibration", val_cal, "calibration file")->required()->check(CLI::ExistingFile);
  validate->add_option("--phantom", val_phantom, "phantom file")->required()->check(CLI::ExistingFile);
  validate->add_option("--output", val_output, "CSV file (default: stdout)");

  std::uint64_t st_seed = 1;
  int st_instances = 20;
  auto* selftest = app.add_subcommand("selftest", "noise-free recovery check of every solver");
  selftest->add_option("--seed", st_seed)->capture_default_str();
  selftest->add_option("--instances", st_instances)->check(CLI::PositiveNumber)->capture_default_str();

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic acquisition file");
  generate->add_option("--probe", gen.probe)->check(CLI::IsMember({"2d", "3d"}))->capture_default_str();
  generate->add_option("--count", gen.count)->check(CLI::PositiveNumber)->capture_default_str();
  auto* gen_seed = generate->add_option("--seed", gen.seed, "scene seed (default: $USCAL_SEED or 0)");
  generate->add_option("--noise-us", gen.noise_us, "US detection sigma, US units")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  generate->add_option("--noise-track-mm", gen.noise_track, "needle endpoint sigma, mm")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  generate->add_option("--output", gen.output, "acquisition file (default: stdout)");
  generate->add_option("--truth", gen.truth, "write the ground truth as a calibration file");
  generate->add_option("--phantom", gen.phantom, "write a phantom file");
  generate->add_option("--phantom-count", gen.phantom_count)->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*calibrate) {
      if (!*cal_seed) cal.seed = default_seed();
      return run_calibrate(cal);
    }
    if (*simulate) {
      std::optional<std::uint64_t> seed;
      if (*sim_seed) seed = sim_seed_value;
      return run_simulate(sim_config, sim_output, seed);
    }
    if (*validate) return run_validate(val_cal, val_phantom, val_output);
    if (*selftest) return run_selftest(st_seed, st_instances);
    if (*generate) {
      if (!*gen_seed) gen.seed = default_seed();
      return run_generate(gen);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitUsage;
}
