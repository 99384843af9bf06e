#include "depman/simulator.hpp"

#include <chrono>
#include <cmath>

#include "depman/errors.hpp"

namespace depman {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

PhasorVector rotating_phases(int n, double amplitude) {
  std::vector<int> ph(n);
  for (int i = 0; i < n; ++i) ph[i] = i * 360 / n;
  return PhasorVector(ph, amplitude);
}

}  // namespace

void SimConfig::validate() const {
  if (!(control_dt > 0) || substeps < 1) throw ConfigError("control_dt must be > 0 and substeps >= 1");
  if (control_dt / substeps > 2e-3 + 1e-12) throw ConfigError("physics substep must be <= 2 ms");
  if (!(z_assumed > 0)) throw ConfigError("z_assumed must be > 0");
  if (warmup_s < 0) throw ConfigError("warmup_s must be >= 0");
  if (!(drag_multiplier > 0)) throw ConfigError("drag_multiplier must be > 0");
  if (noise.sigma_xy < 0 || noise.sigma_phi < 0) throw ConfigError("noise sigmas must be >= 0");
  if (!(switch_position > 0) || !(switch_yaw > 0) || !(timeout_s > 0))
    throw ConfigError("switch thresholds and timeout must be > 0");
  gains.validate();
  schedule.validate();
}

void physics_step(SimState& state, const ObjectModel& obj, const ElectrodeBasis& basis,
                  const MaterialProperties& m, double dt, double drag_multiplier, double z_floor) {
  const WrenchFormSet forms = assemble_forms(obj, state.true_pose, basis, m);
  const Wrench w = eval_wrench(forms, state.applied.phasors()) + sedimentation(obj, m);
  MaterialProperties drag = m;
  drag.mu *= drag_multiplier;
  const Twist t = mobility_solve_planar(world_resistance(obj.body_resistance, state.true_pose), drag, w);
  Pose next = rotate_pose(state.true_pose, t.w * dt);
  next.r = state.true_pose.r + t.v * dt;
  next.r.z() = std::max(next.r.z(), z_floor);
  state.true_pose = next;
  state.time += dt;
}

Simulator::Simulator(ObjectModel obj, ElectrodeBasis basis, MaterialProperties m, SimConfig cfg,
                     FrameGeometry frame, RenderConfig render, EdgeParams edges)
    : obj_(std::move(obj)),
      basis_(std::move(basis)),
      m_(m),
      cfg_(cfg),
      vision_(obj_, frame, render, edges) {
  cfg_.validate();
  m_.validate();
  basis_.validate();
  reset(Pose::planar(0, 0, cfg_.z_assumed, 0));
}

double Simulator::z_floor() const { return cfg_.z_floor >= 0 ? cfg_.z_floor : 0.5 * obj_.shape.thickness; }

void Simulator::reset(const Pose& initial) {
  state_ = {};
  state_.true_pose = initial;
  state_.applied = PhasorVector(std::vector<int>(basis_.n_electrodes(), 0), 38.0);
  noise_rng_.seed(cfg_.seed);
  vision_.reset();
}

void Simulator::advance(TickRecord& rec) {
  rec.phases = state_.applied;
  const double dt = cfg_.control_dt / cfg_.substeps;
  try {
    for (int s = 0; s < cfg_.substeps; ++s)
      physics_step(state_, obj_, basis_, m_, dt, cfg_.drag_multiplier, z_floor());
  } catch (const FieldDomainError& e) {
    state_.failed = true;
    state_.failure = e.what();
  }
  ++state_.tick;
}

PoseEstimate Simulator::measure(TickRecord& rec) {
  const Pose& p = state_.true_pose;
  PoseEstimate est;
  const auto t0 = Clock::now();
  if (cfg_.vision_bypass) {
    est.x = p.r.x();
    est.y = p.r.y();
    est.phi = p.yaw();
    est.valid = true;
  } else {
    est = vision_.observe(p, mix(cfg_.seed, static_cast<std::uint64_t>(state_.tick)));
  }
  rec.vision_ms = ms_since(t0);
  if (cfg_.noise.enabled) {
    std::normal_distribution<double> n01(0.0, 1.0);
    est.x += cfg_.noise.sigma_xy * n01(noise_rng_);
    est.y += cfg_.noise.sigma_xy * n01(noise_rng_);
    est.phi = std::remainder(est.phi + cfg_.noise.sigma_phi * n01(noise_rng_), 2 * kPi);
  }
  return est;
}

TickRecord Simulator::warmup_tick() {
  TickRecord rec;
  rec.tick = state_.tick;
  rec.time = state_.time;
  rec.warmup = true;
  rec.true_pose = state_.true_pose;
  state_.applied = rotating_phases(basis_.n_electrodes(), state_.applied.amplitude);
  advance(rec);
  return rec;
}

TickRecord Simulator::control_tick(const TargetPose& target, int target_index) {
  TickRecord rec;
  rec.tick = state_.tick;
  rec.time = state_.time;
  rec.true_pose = state_.true_pose;
  rec.target = target;
  rec.target_index = target_index;
  rec.measured = measure(rec);

  const Pose est = Pose::planar(rec.measured.x, rec.measured.y, cfg_.z_assumed, rec.measured.phi);
  const Twist t = velocity_refs(cfg_.gains, est, target, obj_.shape.symmetry_order, cfg_.z_assumed);
  rec.reference = reference_wrench(world_resistance(obj_.body_resistance, est), m_, sedimentation(obj_, m_), t);

  auto t0 = Clock::now();
  const WrenchFormSet forms = assemble_forms(obj_, est, basis_, m_);
  rec.assembly_ms = ms_since(t0);
  if (cfg_.inverter_enabled) {
    AnnealSchedule sched = cfg_.schedule;
    sched.seed = mix(cfg_.schedule.seed ^ cfg_.seed, static_cast<std::uint64_t>(state_.tick));
    t0 = Clock::now();
    const InverseSolution sol = sa_solve(forms, rec.reference, sched, state_.applied, cfg_.tolerances);
    rec.solve_ms = ms_since(t0);
    state_.applied = sol.phases;
    rec.achieved = sol.wrench;
    rec.error = sol.error;
    rec.evals = sol.evals;
  } else {
    rec.achieved = eval_wrench(forms, state_.applied.phasors());
    rec.error = error_vector(rec.achieved, rec.reference, cfg_.tolerances);
  }
  advance(rec);
  return rec;
}

ScriptRunner::ScriptRunner(std::vector<ScriptStep> script, TargetPose hold, double hover_s)
    : script_(std::move(script)), hold_(hold), hover_s_(hover_s) {}

const TargetPose& ScriptRunner::current_target() const {
  return k_ < script_.size() ? script_[k_].target : hold_;
}

void ScriptRunner::finish(const Simulator& sim) {
  out_.finished_at = sim.state().time;
  outcomes_.push_back(out_);
  active_ = false;
  ++k_;
}

std::optional<TickRecord> ScriptRunner::step(Simulator& sim) {
  const SimConfig& cfg = sim.config();
  auto ticks_for = [&](double s) { return std::lround(s / cfg.control_dt); };
  if (sim.state().failed) {
    if (active_) finish(sim);
    k_ = script_.size();
    return std::nullopt;
  }
  const int sym = sim.object().shape.symmetry_order;
  while (k_ < script_.size()) {
    const ScriptStep& step = script_[k_];
    if (!active_) {
      out_ = TargetOutcome{};
      out_.index = static_cast<int>(k_);
      out_.target = step.target;
      out_.issued_at = sim.state().time;
      const long issued = sim.state().tick;
      end_tick_ = step.wait_settle ? -1 : issued + ticks_for(step.dwell);
      timeout_tick_ = issued + ticks_for(cfg.timeout_s);
      active_ = true;
    }
    const long now = sim.state().tick;
    if (end_tick_ >= 0 && now >= end_tick_) {
      finish(sim);
      continue;
    }
    if (end_tick_ < 0 && now >= timeout_tick_) {
      out_.timeout = true;
      finish(sim);
      continue;
    }
    TickRecord rec = sim.control_tick(step.target, out_.index);
    if (step.wait_settle && out_.settled_at < 0) {
      const PoseEstimate& m = rec.measured;
      const double dpos = std::hypot(m.x - step.target.r_ref.x(), m.y - step.target.r_ref.y());
      const double dyaw = std::abs(wrap_angle(step.target.phi_ref, m.phi, sym));
      if (dpos < cfg.switch_position && dyaw < cfg.switch_yaw) {
        out_.settled_at = rec.time;
        end_tick_ = rec.tick + ticks_for(step.dwell);
      }
    }
    if (sim.state().failed) finish(sim);
    return rec;
  }
  if (hover_ticks_ < 0) hover_ticks_ = ticks_for(hover_s_);
  if (hovered_ >= hover_ticks_) return std::nullopt;
  ++hovered_;
  const int hold_index = script_.empty() ? -1 : static_cast<int>(script_.size()) - 1;
  return sim.control_tick(hold_, hold_index);
}

EpisodeLog run_episode(Simulator& sim, const Pose& initial, const std::vector<ScriptStep>& script,
                       double hover_s) {
  const SimConfig& cfg = sim.config();
  sim.reset(initial);
  EpisodeLog log;
  const long warm = std::lround(cfg.warmup_s / cfg.control_dt);
  for (long i = 0; i < warm && !sim.state().failed; ++i) log.ticks.push_back(sim.warmup_tick());
  log.warmup_ticks = static_cast<int>(log.ticks.size());

  TargetPose hold;
  hold.r_ref = Vec3(initial.r.x(), initial.r.y(), cfg.z_assumed);
  hold.phi_ref = initial.yaw();
  if (!script.empty()) hold = script.back().target;
  ScriptRunner runner(script, hold, hover_s);
  while (auto rec = runner.step(sim)) log.ticks.push_back(std::move(*rec));
  log.targets = runner.outcomes();
  if (sim.state().failed) log.outcome = "field_domain";
  return log;
}

}  // namespace depman
