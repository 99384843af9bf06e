#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "depman/config.hpp"
#include "depman/simulator.hpp"

namespace depman {

/// Per-target statistics over the final window (default 3 s) before the target
/// changes, from the true pose.
struct TargetMetrics {
  int index = 0;
  TargetPose target;
  double settle_time = -1;     // s from issue to the switch thresholds; < 0 never
  bool timeout = false;
  int samples = 0;             // ticks in the window
  double accuracy_pos = 0;     // |mean position - target|, m
  double accuracy_yaw = 0;     // |mean yaw error|, rad
  double precision_pos = 0;    // var(x) + var(y), m^2
  double precision_yaw = 0;    // rad^2
  double mean_error_pos = 0;   // mean |position - target| over the window, m
  double mean_error_yaw = 0;   // mean |yaw error|, rad
  double path_length = 0;      // m travelled until settled
  double mean_speed = 0;       // path_length / settle_time, m/s
};

struct MetricsReport {
  std::vector<TargetMetrics> targets;
  int converged() const;
};

MetricsReport compute_metrics(const EpisodeLog& log, int symmetry_order, double window_s = 3.0);

/// Uniform targets in the disc with uniform yaw, from the config seed.
std::vector<ScriptStep> waypoint_script(const ExperimentConfig& cfg);

struct SuiteResult {
  MetricsReport report;
  EpisodeLog log;
};

SuiteResult waypoint_suite(const ExperimentConfig& cfg);

struct CircleResult {
  SuiteResult run;
  double max_cross_track = 0;   // m, over the tracking phase
  double mean_cross_track = 0;
  double max_tangent_dev = 0;   // rad, commanded yaw vs path tangent (mod symmetry)
  int tracking_ticks = 0;
};

/// Approach the first point, then step around the circle at the configured speed.
std::vector<ScriptStep> circle_script(const CircleSpec& spec, double z, double approach_dwell = 1.0);
CircleResult circle_suite(const ExperimentConfig& cfg);

struct GridCell {
  double x = 0, y = 0, orientation = 0;
  TargetMetrics metrics;
  std::string outcome;
  int ticks = 0;      // control ticks of the episode
  int dropouts = 0;   // of those, ticks without a valid blob
};

/// Quarter-disc grid x, y >= 0; each cell one episode from the centre. Cells run in
/// parallel and are reported in index order.
std::vector<GridCell> precision_grid(const ExperimentConfig& cfg);

struct FeasibilityPoint {
  std::vector<int> phases;
  Vec3 F, T;
  double deviation_pct = 0;  // |F - (-F_sed)| / |F_sed|
};

struct FeasibilityResult {
  std::vector<FeasibilityPoint> cloud;  // in-band points only
  long sampled = 0;
  int positive_tz = 0, negative_tz = 0;
  double conjugation_defect = 0;  // worst |T(u) + T(conj u) - 2 T_sym(u)| / scale
  double band_closure = 0;        // in-band points whose reversed phases are in band
  double reversed_tz_mean = 0;    // mean T_z of the reversed set over mean |T_z|
};

FeasibilityResult feasibility_map(const ExperimentConfig& cfg, const Pose& pose, double band_pct);

struct PerfRow {
  int n = 0;
  double assembly_ms = 0;           // element path
  double multipole_ms = 0;          // order-5 multipole path
  int nodes = 0;
};

struct PerfResult {
  std::vector<PerfRow> rows;
  double slope = 0, intercept = 0, r2 = 0;  // assembly_ms = slope n + intercept
  double mp_slope = 0, mp_intercept = 0, mp_r2 = 0;
  double sa_ms = 0;              // mean, at the configured budget
  double vision_ms = 0;          // mean per frame
  double assembly4_ms = 0;       // element path at n = 4
  double tick_ms() const { return assembly4_ms + sa_ms + vision_ms; }
  double eval_ms_small = 0, eval_ms_large = 0;  // eval_wrench, 1 vs 27 elements per cell
  double assembly_ratio_8x = 0;  // assembly time ratio for 8x the elements
};

PerfResult perf_suite(const ExperimentConfig& cfg);

/// Least-squares line y = a x + b and its R^2.
void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b, double& r2);

// CSV result files (header row first, SI units).
void write_metrics_csv(std::ostream& out, const MetricsReport& rep);
void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);
void write_feasibility_csv(std::ostream& out, const FeasibilityResult& res);
void write_perf_csv(std::ostream& out, const PerfResult& res);

}  // namespace depman
