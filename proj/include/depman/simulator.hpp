#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "depman/controller.hpp"
#include "depman/inverter.hpp"
#include "depman/vision.hpp"

namespace depman {

struct NoiseConfig {
  bool enabled = true;
  double sigma_xy = 1e-6;     // m
  double sigma_phi = 0.005;   // rad
};

struct SimConfig {
  double control_dt = 0.02;  // 50 Hz
  int substeps = 10;
  double z_assumed = 100e-6;
  double z_floor = -1;       // < 0: half the object thickness (lying on the chip)
  double warmup_s = 2.0;
  double drag_multiplier = 1.0;
  bool vision_bypass = false;
  bool inverter_enabled = true;
  NoiseConfig noise;
  ControlGains gains;
  AnnealSchedule schedule;
  ErrorTolerances tolerances;
  std::uint64_t seed = 1;
  // waypoint switch rule
  double switch_position = 20e-6;
  double switch_yaw = kPi / 16;
  double timeout_s = 20.0;

  void validate() const;
};

struct SimState {
  Pose true_pose;
  double time = 0;
  long tick = 0;
  PhasorVector applied;
  bool failed = false;
  std::string failure;
};

/// One control period.
struct TickRecord {
  long tick = 0;
  double time = 0;           // start of the period
  bool warmup = false;
  Pose true_pose;            // at the start of the period
  PoseEstimate measured;
  int target_index = -1;
  TargetPose target;
  PhasorVector phases;       // applied during this period
  Wrench reference;
  Wrench achieved;           // model wrench of `phases` at the measured pose
  ErrorVector error;
  int evals = 0;
  double solve_ms = 0, assembly_ms = 0, vision_ms = 0;
};

/// Quasi-static step: forms at the true pose, gDEP + sedimentation through the planar
/// mobility, explicit Euler, floor projection. Throws FieldDomainError.
void physics_step(SimState& state, const ObjectModel& obj, const ElectrodeBasis& basis,
                  const MaterialProperties& m, double dt, double drag_multiplier = 1.0,
                  double z_floor = 25e-6);

class Simulator {
 public:
  Simulator(ObjectModel obj, ElectrodeBasis basis, MaterialProperties m, SimConfig cfg,
            FrameGeometry frame = {}, RenderConfig render = {}, EdgeParams edges = {});
  Simulator(const Simulator&) = delete;  // the estimator points at obj_
  Simulator& operator=(const Simulator&) = delete;

  void reset(const Pose& initial);
  /// Electrorotation warm-up period: phases i * 360/n, no measurement used.
  TickRecord warmup_tick();
  TickRecord control_tick(const TargetPose& target, int target_index = 0);

  const SimState& state() const { return state_; }
  const SimConfig& config() const { return cfg_; }
  SimConfig& config() { return cfg_; }
  const ObjectModel& object() const { return obj_; }
  const ElectrodeBasis& basis() const { return basis_; }
  const MaterialProperties& material() const { return m_; }
  double z_floor() const;

 private:
  void advance(TickRecord& rec);
  PoseEstimate measure(TickRecord& rec);

  ObjectModel obj_;
  ElectrodeBasis basis_;
  MaterialProperties m_;
  SimConfig cfg_;
  VisionEstimator vision_;
  SimState state_;
  std::mt19937_64 noise_rng_;
};

/// One scripted target. With wait_settle the next target follows `dwell` seconds after
/// the switch thresholds are first met (or on timeout); otherwise after `dwell` seconds.
struct ScriptStep {
  TargetPose target;
  double dwell = 3.0;
  bool wait_settle = true;
};

struct TargetOutcome {
  int index = 0;
  TargetPose target;
  double issued_at = 0;
  double settled_at = -1;  // < 0: never met the thresholds
  double finished_at = 0;
  bool timeout = false;
};

struct EpisodeLog {
  std::vector<TickRecord> ticks;
  std::vector<TargetOutcome> targets;
  std::string outcome = "ok";  // or "field_domain"
  int warmup_ticks = 0;
};

/// Steps a script one control tick at a time (the episode runner and the live service
/// share it). After the last step, `hover_s` seconds hold `hold`.
class ScriptRunner {
 public:
  ScriptRunner(std::vector<ScriptStep> script, TargetPose hold, double hover_s = 0.0);

  /// Next tick, or nothing once the script and hover are over or the simulator failed.
  std::optional<TickRecord> step(Simulator& sim);
  const std::vector<TargetOutcome>& outcomes() const { return outcomes_; }
  int current_index() const { return static_cast<int>(k_); }
  const TargetPose& current_target() const;

 private:
  void finish(const Simulator& sim);

  std::vector<ScriptStep> script_;
  TargetPose hold_;
  long hover_ticks_ = -1;
  double hover_s_ = 0;
  long hovered_ = 0;
  std::size_t k_ = 0;
  bool active_ = false;
  TargetOutcome out_;
  long end_tick_ = -1, timeout_tick_ = 0;
  std::vector<TargetOutcome> outcomes_;
};

/// Warm-up, then the script; `hover_s` extra seconds hold the last target (or the
/// initial pose for an empty script).
EpisodeLog run_episode(Simulator& sim, const Pose& initial, const std::vector<ScriptStep>& script,
                       double hover_s = 0.0);

}  // namespace depman
