#include <gtest/gtest.h>

#include "depman/config.hpp"
#include "depman/errors.hpp"
#include "depman/simulator.hpp"

using namespace depman;

namespace {

const ElectrodeBasis& pads() {
  static const ElectrodeBasis b = quadrupole_basis();
  return b;
}

SimConfig quiet() {
  SimConfig c;
  c.vision_bypass = true;
  c.noise.enabled = false;
  return c;
}

}  // namespace

TEST(Physics, SedimentationOnly) {
  const ObjectModel obj = build_object(shape_sz(), 1);
  const MaterialProperties m;
  SimState s;
  s.true_pose = Pose::planar(10e-6, -5e-6, 100e-6, 0.3);
  s.applied = PhasorVector({0, 0, 0, 0}, 0.0);
  const double dt = 1e-3;
  physics_step(s, obj, pads(), m, dt, 1.0, 25e-6);
  // independent spheres: vertical drag sum 6 pi mu a over elements, no coupling into yaw
  double k = 0;
  for (const auto& e : obj.elements) k += 6 * kPi * e.radius;
  const double vz = (m.rho_m - m.rho_o) * obj.volume * kGravity / (m.mu * k);
  EXPECT_NEAR(s.true_pose.r.z(), 100e-6 + vz * dt, 1e-18);
  EXPECT_NEAR(s.true_pose.r.x(), 10e-6, 1e-18);
  EXPECT_NEAR(s.true_pose.r.y(), -5e-6, 1e-18);
  EXPECT_NEAR(s.true_pose.yaw(), 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(s.time, dt);
  // doubled drag halves the step
  SimState d;
  d.true_pose = Pose::planar(0, 0, 100e-6, 0);
  d.applied = s.applied;
  physics_step(d, obj, pads(), m, dt, 2.0, 25e-6);
  EXPECT_NEAR(d.true_pose.r.z(), 100e-6 + 0.5 * vz * dt, 1e-18);
}

TEST(Physics, FloorHoldsTheObject) {
  const ObjectModel obj = build_object(shape_sz(), 1);
  SimState s;
  s.true_pose = Pose::planar(0, 0, 25e-6, 0);
  s.applied = PhasorVector({0, 0, 0, 0}, 0.0);
  for (int i = 0; i < 10; ++i) physics_step(s, obj, pads(), MaterialProperties{}, 1e-3, 1.0, 25e-6);
  EXPECT_EQ(s.true_pose.r.z(), 25e-6);
}

TEST(Physics, SourceContactThrows) {
  const ObjectModel obj = build_object(shape_sz(), 1);
  SimState s;
  const Vec3 at = pads().nodes[pads().nodes.size() / 2].position - obj.elements[0].center;
  s.true_pose = Pose::planar(at.x(), at.y(), at.z(), 0);  // an element on a source
  s.applied = PhasorVector({0, 90, 180, 270});
  EXPECT_THROW(physics_step(s, obj, pads(), MaterialProperties{}, 1e-3), FieldDomainError);
}

TEST(Simulator, FailureEndsTheEpisode) {
  Simulator sim(build_object(shape_sz(), 1), pads(), {}, quiet());
  const Vec3 at = pads().nodes[pads().nodes.size() / 2].position - sim.object().elements[0].center;
  const EpisodeLog log = run_episode(sim, Pose::planar(at.x(), at.y(), at.z(), 0), {ScriptStep{}});
  EXPECT_EQ(log.outcome, "field_domain");
  EXPECT_TRUE(sim.state().failed);
  EXPECT_FALSE(sim.state().failure.empty());
}

TEST(Simulator, DeterministicWithVisionAndNoise) {
  SimConfig c;
  c.warmup_s = 0.1;
  auto run = [&] {
    Simulator sim(build_object(shape_sz(), 1), pads(), {}, c);
    return run_episode(sim, Pose::planar(0, 0, 100e-6, 0), {ScriptStep{TargetPose{Vec3(30e-6, 0, 100e-6), 0.2}, 0.2, false}});
  };
  const EpisodeLog a = run(), b = run();
  ASSERT_EQ(a.ticks.size(), b.ticks.size());
  for (std::size_t i = 0; i < a.ticks.size(); ++i) {
    EXPECT_EQ(a.ticks[i].true_pose.r, b.ticks[i].true_pose.r);
    EXPECT_EQ(a.ticks[i].phases.phase_deg, b.ticks[i].phases.phase_deg);
    EXPECT_EQ(a.ticks[i].measured.x, b.ticks[i].measured.x);
  }
}

TEST(Simulator, WarmupRotatesAndScriptTiming) {
  SimConfig c = quiet();
  c.warmup_s = 0.1;
  Simulator sim(build_object(shape_sz(), 1), pads(), {}, c);
  const std::vector<ScriptStep> script{{TargetPose{Vec3(0, 0, 100e-6), 0}, 0.2, false},
                                       {TargetPose{Vec3(10e-6, 0, 100e-6), 0}, 0.1, false}};
  const EpisodeLog log = run_episode(sim, Pose::planar(0, 0, 100e-6, 0), script, 0.04);
  EXPECT_EQ(log.warmup_ticks, 5);
  ASSERT_EQ(log.ticks.size(), 5u + 10 + 5 + 2);
  EXPECT_EQ(log.ticks[0].phases.phase_deg, (std::vector<int>{0, 90, 180, 270}));
  EXPECT_TRUE(log.ticks[4].warmup);
  EXPECT_FALSE(log.ticks[5].warmup);
  EXPECT_EQ(log.ticks[5].target_index, 0);
  EXPECT_EQ(log.ticks[15].target_index, 1);
  EXPECT_EQ(log.ticks.back().target_index, 1);  // hover holds the last target
  ASSERT_EQ(log.targets.size(), 2u);
  EXPECT_NEAR(log.targets[1].issued_at, 0.3, 1e-12);
  EXPECT_NEAR(log.targets[1].finished_at, 0.4, 1e-12);
  for (std::size_t i = 1; i < log.ticks.size(); ++i) EXPECT_EQ(log.ticks[i].tick, log.ticks[i - 1].tick + 1);
  for (const auto& t : log.ticks)
    if (!t.warmup) EXPECT_LE(t.evals, 2500);
}

TEST(Physics, SubstepRefinementAgrees) {
  // fixed drive, first-order Euler: halving dt roughly halves the gap
  const ObjectModel obj = build_object(shape_sz(), 1);
  auto run = [&](double dt) {
    SimState s;
    s.true_pose = Pose::planar(60e-6, -30e-6, 40e-6, 0.2);
    s.applied = PhasorVector({0, 60, 200, 300});
    const int steps = static_cast<int>(std::lround(0.2 / dt));
    for (int i = 0; i < steps; ++i) physics_step(s, obj, pads(), MaterialProperties{}, dt, 1.0, 25e-6);
    return s.true_pose;
  };
  const Pose a = run(2e-3), b = run(1e-3), c = run(0.5e-3);
  const double ab = (a.r - b.r).norm(), bc = (b.r - c.r).norm();
  EXPECT_GT((a.r - Vec3(60e-6, -30e-6, 40e-6)).norm(), 20 * ab);  // the drive moved it
  EXPECT_LT(bc, 0.7 * ab);
  EXPECT_LT(std::abs(wrap_angle(b.yaw(), c.yaw())), 1e-3);
}

TEST(Simulator, InverterOffNeverSettles) {
  SimConfig c = quiet();
  c.warmup_s = 0;
  c.inverter_enabled = false;
  c.timeout_s = 1.0;
  Simulator sim(build_object(shape_sz(), 1), pads(), {}, c);
  const EpisodeLog log = run_episode(sim, Pose::planar(0, 0, 100e-6, 0),
                                     {ScriptStep{TargetPose{Vec3(100e-6, 0, 100e-6), 1.0}, 1.0, true}});
  ASSERT_EQ(log.targets.size(), 1u);
  EXPECT_TRUE(log.targets[0].timeout);
  EXPECT_LT(log.targets[0].settled_at, 0);
  EXPECT_EQ(log.ticks.size(), 50u);
  for (const auto& t : log.ticks) EXPECT_EQ(t.evals, 0);
}

TEST(Simulator, ShortMoveConverges) {
  SimConfig c = quiet();
  c.warmup_s = 0.5;
  Simulator sim(build_object(shape_sz(), 1), pads(), {}, c);
  const TargetPose target{Vec3(60e-6, -40e-6, 100e-6), 0.5};
  const EpisodeLog log = run_episode(sim, Pose::planar(0, 0, 100e-6, 0), {ScriptStep{target, 1.0, true}});
  ASSERT_EQ(log.targets.size(), 1u);
  EXPECT_FALSE(log.targets[0].timeout);
  EXPECT_GT(log.targets[0].settled_at, 0);
  const Pose& end = log.ticks.back().true_pose;
  EXPECT_LT(std::hypot(end.r.x() - 60e-6, end.r.y() + 40e-6), 20e-6);
}

TEST(SimConfig, Validation) {
  SimConfig c;
  c.substeps = 5;  // 4 ms substeps
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.noise.sigma_xy = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SimConfig{};
  c.schedule.max_evals = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
