#include <gtest/gtest.h>

#include <sstream>

#include "depman/harness.hpp"

using namespace depman;

namespace {

TickRecord at(double t, double x_um, double y_um, double yaw, int index = 0) {
  TickRecord r;
  r.tick = std::lround(t / 0.5);
  r.time = t;
  r.target_index = index;
  r.true_pose = Pose::planar(x_um * 1e-6, y_um * 1e-6, 25e-6, yaw);
  return r;
}

}  // namespace

TEST(Metrics, SyntheticEpisode) {
  EpisodeLog log;
  TickRecord w = at(-0.5, 50, 50, 2.0, -1);
  w.warmup = true;
  log.ticks.push_back(w);
  log.ticks.push_back(at(0.0, 0, 0, 0.0));
  log.ticks.push_back(at(0.5, 5, 0, 0.0));
  log.ticks.push_back(at(1.0, 10, 0, 0.0));
  for (int i = 0; i < 7; ++i) log.ticks.push_back(at(1.5 + 0.5 * i, 10, i % 2 ? -1 : 1, 0.01));
  log.ticks.push_back(at(5.0, 99, 99, 1.0, 1));  // next target, ignored
  TargetOutcome o;
  o.index = 0;
  o.target = TargetPose{Vec3(10e-6, 0, 1e-4), 0.0};
  o.issued_at = 0;
  o.settled_at = 1.0;
  o.finished_at = 5.0;
  log.targets.push_back(o);
  TargetOutcome t2 = o;
  t2.index = 1;
  t2.issued_at = 5.0;
  t2.settled_at = -1;
  t2.finished_at = 25.0;
  t2.timeout = true;
  log.targets.push_back(t2);

  const MetricsReport rep = compute_metrics(log, 1, 3.0);
  ASSERT_EQ(rep.targets.size(), 2u);
  EXPECT_EQ(rep.converged(), 1);
  const TargetMetrics& m = rep.targets[0];
  EXPECT_EQ(m.samples, 6);  // t = 2.0 ... 4.5
  EXPECT_NEAR(m.settle_time, 1.0, 1e-12);
  EXPECT_NEAR(m.accuracy_pos, 0.0, 1e-18);
  EXPECT_NEAR(m.mean_error_pos, 1e-6, 1e-15);
  EXPECT_NEAR(m.precision_pos, 1e-12, 1e-21);
  EXPECT_NEAR(m.accuracy_yaw, 0.01, 1e-12);
  EXPECT_NEAR(m.precision_yaw, 0.0, 1e-18);
  EXPECT_NEAR(m.path_length, 10e-6, 1e-15);
  EXPECT_NEAR(m.mean_speed, 10e-6, 1e-15);
  const TargetMetrics& n = rep.targets[1];
  EXPECT_TRUE(n.timeout);
  EXPECT_EQ(n.settle_time, -1);
  EXPECT_EQ(n.samples, 0);  // its only tick is outside the final window
  EXPECT_EQ(n.mean_speed, 0.0);
}

TEST(Metrics, YawErrorUsesSymmetry) {
  EpisodeLog log;
  log.ticks.push_back(at(0.0, 0, 0, kPi - 0.01));
  TargetOutcome o;
  o.target = TargetPose{Vec3(0, 0, 1e-4), 0.0};
  o.finished_at = 1.0;
  log.targets.push_back(o);
  EXPECT_NEAR(compute_metrics(log, 2).targets[0].mean_error_yaw, 0.01, 1e-12);
  EXPECT_NEAR(compute_metrics(log, 1).targets[0].mean_error_yaw, kPi - 0.01, 1e-12);
}

TEST(Waypoints, InsideDiscAndSeeded) {
  ExperimentConfig c;
  const auto a = waypoint_script(c), b = waypoint_script(c);
  ASSERT_EQ(a.size(), 40u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(a[i].target.r_ref.head<2>().norm(), 150e-6);
    EXPECT_EQ(a[i].target.r_ref.z(), c.sim.z_assumed);
    EXPECT_GT(a[i].target.phi_ref, -kPi - 1e-12);
    EXPECT_LE(a[i].target.phi_ref, kPi);
    EXPECT_TRUE(a[i].wait_settle);
    EXPECT_EQ(a[i].target.r_ref, b[i].target.r_ref);
  }
  c.sim.seed = 2;
  EXPECT_NE(waypoint_script(c)[0].target.r_ref, a[0].target.r_ref);
}

TEST(Circle, ScriptGeometry) {
  CircleSpec s;
  s.radius = 100e-6;
  s.points = 8;
  s.speed = 20e-6;
  const auto ccw = circle_script(s, 1e-4);
  ASSERT_EQ(ccw.size(), 9u);
  EXPECT_TRUE(ccw[0].wait_settle);
  EXPECT_EQ(ccw[0].dwell, 1.0);
  EXPECT_NEAR(ccw[0].target.r_ref.x(), 100e-6, 1e-18);
  EXPECT_NEAR(ccw[0].target.phi_ref, kPi / 2, 1e-12);
  EXPECT_NEAR(ccw[2].target.r_ref.y(), 100e-6, 1e-18);
  EXPECT_NEAR(ccw[2].target.phi_ref, kPi, 1e-12);
  for (std::size_t k = 1; k < ccw.size(); ++k) {
    EXPECT_FALSE(ccw[k].wait_settle);
    EXPECT_NEAR(ccw[k].dwell, 2 * kPi * 100e-6 / 8 / 20e-6, 1e-12);
  }
  EXPECT_LT((ccw.back().target.r_ref - ccw[0].target.r_ref).norm(), 1e-18);

  s.direction = -1;
  const auto cw = circle_script(s, 1e-4);
  EXPECT_NEAR(cw[2].target.r_ref.y(), -100e-6, 1e-18);
  EXPECT_NEAR(cw[0].target.phi_ref, -kPi / 2, 1e-12);

  s.radius = 0;
  for (const auto& st : circle_script(s, 1e-4)) {
    EXPECT_EQ(st.target.r_ref.head<2>().norm(), 0.0);
    EXPECT_EQ(st.target.phi_ref, 0.0);
  }
  EXPECT_EQ(circle_script(s, 1e-4)[3].dwell, 0.02);
}

TEST(LinearFit, ExactAndNoisy) {
  double a, b, r2;
  linear_fit({2, 4, 8, 16, 32}, {1, 2, 4, 8, 16}, a, b, r2);
  EXPECT_NEAR(a, 0.5, 1e-12);
  EXPECT_NEAR(b, 0.0, 1e-12);
  EXPECT_NEAR(r2, 1.0, 1e-12);
  linear_fit({1, 2, 3, 4}, {1, 3, 2, 4}, a, b, r2);
  EXPECT_NEAR(a, 0.8, 1e-12);
  EXPECT_NEAR(b, 0.5, 1e-12);
  EXPECT_NEAR(r2, 0.64, 1e-12);
}

TEST(Feasibility, CentreCloud) {
  const ExperimentConfig c;
  const Pose centre = Pose::planar(0, 0, c.sim.z_assumed, 0);
  const FeasibilityResult none = feasibility_map(c, centre, 0.0);
  EXPECT_TRUE(none.cloud.empty());
  EXPECT_EQ(none.sampled, 36L * 36 * 36);
  const FeasibilityResult f = feasibility_map(c, centre, 20.0);
  EXPECT_FALSE(f.cloud.empty());
  EXPECT_GT(f.positive_tz, 0);
  EXPECT_GT(f.negative_tz, 0);
  EXPECT_LT(f.conjugation_defect, 1e-12);
  for (const auto& p : f.cloud) {
    EXPECT_LE(p.deviation_pct, 20.0);
    EXPECT_EQ(p.phases[0], 0);
  }
  std::stringstream ss;
  write_feasibility_csv(ss, f);
  EXPECT_EQ(std::count(std::istreambuf_iterator<char>(ss), {}, '\n'), static_cast<long>(f.cloud.size()) + 1);
}

TEST(Grid, InverterOffTimesOut) {
  ExperimentConfig c;
  c.grid.spacing = 150e-6;
  c.grid.orientations = {1.0};
  c.sim.inverter_enabled = false;
  c.sim.warmup_s = 0;
  c.sim.timeout_s = 0.2;
  c.sim.vision_bypass = true;
  const auto cells = precision_grid(c);
  ASSERT_EQ(cells.size(), 3u);  // (0,0), (150,0), (0,150) um
  EXPECT_EQ(cells[1].x, 150e-6);
  EXPECT_EQ(cells[2].y, 150e-6);
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.outcome, "ok");
    EXPECT_TRUE(cell.metrics.timeout);
    EXPECT_EQ(cell.ticks, 10);  // 0.2 s at 20 ms
    EXPECT_EQ(cell.dropouts, 0);
  }
  std::stringstream ss;
  write_grid_csv(ss, cells);
  EXPECT_EQ(std::count(std::istreambuf_iterator<char>(ss), {}, '\n'), 4);
}
