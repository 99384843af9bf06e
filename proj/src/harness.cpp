#include "depman/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "depman/errors.hpp"

namespace depman {

namespace {

using Clock = std::chrono::steady_clock;

template <class F> double mean_ms(int repeats, F&& f) {
  const auto t0 = Clock::now();
  for (int i = 0; i < repeats; ++i) f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / repeats;
}

// Median of individually timed calls: one descheduling on a shared core should not bend the fit.
template <class F> double median_ms(int repeats, F&& f) {
  std::vector<double> t(static_cast<std::size_t>(repeats));
  for (double& x : t) {
    const auto t0 = Clock::now();
    f();
    x = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }
  std::nth_element(t.begin(), t.begin() + repeats / 2, t.end());
  return t[static_cast<std::size_t>(repeats / 2)];
}

TargetPose make_target(double x, double y, double z, double phi) {
  TargetPose t;
  t.r_ref = Vec3(x, y, z);
  t.phi_ref = phi;
  return t;
}

}  // namespace

int MetricsReport::converged() const {
  return static_cast<int>(std::count_if(targets.begin(), targets.end(), [](const auto& t) { return !t.timeout; }));
}

MetricsReport compute_metrics(const EpisodeLog& log, int symmetry_order, double window_s) {
  MetricsReport rep;
  for (const auto& out : log.targets) {
    TargetMetrics m;
    m.index = out.index;
    m.target = out.target;
    m.timeout = out.timeout;
    m.settle_time = out.settled_at < 0 ? -1 : out.settled_at - out.issued_at;
    const Vec3& ref = out.target.r_ref;
    std::vector<const TickRecord*> win;
    const TickRecord* prev = nullptr;
    for (const auto& r : log.ticks) {
      if (r.warmup || r.target_index != out.index || r.time >= out.finished_at - 1e-9) continue;
      if (out.settled_at >= 0 && r.time <= out.settled_at + 1e-9 && prev)
        m.path_length += (r.true_pose.r - prev->true_pose.r).head<2>().norm();
      prev = &r;
      if (r.time >= out.finished_at - window_s - 1e-9) win.push_back(&r);
    }
    m.samples = static_cast<int>(win.size());
    if (!win.empty()) {
      Eigen::Vector2d mean = Eigen::Vector2d::Zero();
      double yaw_mean = 0;
      for (const auto* r : win) {
        const Eigen::Vector2d d = r->true_pose.r.head<2>() - ref.head<2>();
        const double dy = wrap_angle(r->true_pose.yaw(), out.target.phi_ref, symmetry_order);
        mean += d;
        yaw_mean += dy;
        m.mean_error_pos += d.norm();
        m.mean_error_yaw += std::abs(dy);
      }
      const double n = static_cast<double>(win.size());
      mean /= n;
      yaw_mean /= n;
      m.mean_error_pos /= n;
      m.mean_error_yaw /= n;
      m.accuracy_pos = mean.norm();
      m.accuracy_yaw = std::abs(yaw_mean);
      for (const auto* r : win) {
        const Eigen::Vector2d d = r->true_pose.r.head<2>() - ref.head<2>() - mean;
        const double dy = wrap_angle(r->true_pose.yaw(), out.target.phi_ref, symmetry_order) - yaw_mean;
        m.precision_pos += d.squaredNorm() / n;
        m.precision_yaw += dy * dy / n;
      }
    }
    m.mean_speed = m.settle_time > 0 ? m.path_length / m.settle_time : 0.0;
    rep.targets.push_back(m);
  }
  return rep;
}

std::vector<ScriptStep> waypoint_script(const ExperimentConfig& cfg) {
  std::mt19937_64 rng(cfg.sim.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScriptStep> script;
  for (int i = 0; i < cfg.waypoints.count; ++i) {
    const double r = cfg.waypoints.radius * std::sqrt(u(rng));
    const double th = 2 * kPi * u(rng);
    const double phi = kPi * (2 * u(rng) - 1);
    script.push_back({make_target(r * std::cos(th), r * std::sin(th), cfg.sim.z_assumed, phi), cfg.waypoints.dwell, true});
  }
  return script;
}

SuiteResult waypoint_suite(const ExperimentConfig& cfg) {
  Simulator sim(make_object(cfg), make_basis(cfg), cfg.material, cfg.sim, cfg.frame, cfg.render, cfg.edges);
  SuiteResult res;
  res.log = run_episode(sim, Pose::planar(0, 0, cfg.sim.z_assumed, 0), waypoint_script(cfg));
  res.report = compute_metrics(res.log, sim.object().shape.symmetry_order);
  return res;
}

std::vector<ScriptStep> circle_script(const CircleSpec& spec, double z, double approach_dwell) {
  std::vector<ScriptStep> script;
  const double arc = 2 * kPi * spec.radius / spec.points;
  const double dwell = spec.radius > 0 ? arc / spec.speed : 0.02;
  for (int k = 0; k <= spec.points; ++k) {
    const double th = spec.direction * 2 * kPi * k / spec.points;
    const double yaw = spec.radius > 0 ? std::remainder(th + spec.direction * kPi / 2, 2 * kPi) : 0.0;
    ScriptStep s{make_target(spec.radius * std::cos(th), spec.radius * std::sin(th), z, yaw), dwell, false};
    if (k == 0) {
      s.wait_settle = true;
      s.dwell = approach_dwell;
    }
    script.push_back(s);
  }
  return script;
}

CircleResult circle_suite(const ExperimentConfig& cfg) {
  Simulator sim(make_object(cfg), make_basis(cfg), cfg.material, cfg.sim, cfg.frame, cfg.render, cfg.edges);
  const int sym = sim.object().shape.symmetry_order;
  CircleResult res;
  res.run.log = run_episode(sim, Pose::planar(0, 0, cfg.sim.z_assumed, 0), circle_script(cfg.circle, cfg.sim.z_assumed));
  res.run.report = compute_metrics(res.run.log, sym);
  const double R = cfg.circle.radius;
  double sum = 0;
  for (const auto& r : res.run.log.ticks) {
    if (r.warmup || r.target_index < 1) continue;
    const double ct = std::abs(r.true_pose.r.head<2>().norm() - R);
    res.max_cross_track = std::max(res.max_cross_track, ct);
    sum += ct;
    ++res.tracking_ticks;
    if (R > 0) {
      const double tangent = std::atan2(r.target.r_ref.y(), r.target.r_ref.x()) + cfg.circle.direction * kPi / 2;
      res.max_tangent_dev = std::max(res.max_tangent_dev, std::abs(wrap_angle(r.target.phi_ref, tangent, sym)));
    }
  }
  res.mean_cross_track = res.tracking_ticks ? sum / res.tracking_ticks : 0.0;
  return res;
}

std::vector<GridCell> precision_grid(const ExperimentConfig& cfg) {
  std::vector<GridCell> cells;
  const int steps = static_cast<int>(std::floor(cfg.grid.radius / cfg.grid.spacing + 1e-9));
  for (double phi : cfg.grid.orientations)
    for (int j = 0; j <= steps; ++j)
      for (int i = 0; i <= steps; ++i) {
        const double x = i * cfg.grid.spacing, y = j * cfg.grid.spacing;
        if (std::hypot(x, y) <= cfg.grid.radius + 1e-12) cells.push_back({x, y, phi, {}, ""});
      }
  const ObjectModel obj = make_object(cfg);
  const ElectrodeBasis basis = make_basis(cfg);
  const int n = static_cast<int>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n; ++c) {
    SimConfig sc = cfg.sim;
    sc.seed = cfg.sim.seed + static_cast<std::uint64_t>(c);
    Simulator sim(obj, basis, cfg.material, sc, cfg.frame, cfg.render, cfg.edges);
    const std::vector<ScriptStep> script{
        {make_target(cells[c].x, cells[c].y, cfg.sim.z_assumed, cells[c].orientation), cfg.waypoints.dwell, true}};
    const EpisodeLog log = run_episode(sim, Pose::planar(0, 0, cfg.sim.z_assumed, 0), script);
    const MetricsReport rep = compute_metrics(log, obj.shape.symmetry_order);
    if (!rep.targets.empty()) cells[c].metrics = rep.targets.front();
    cells[c].outcome = log.outcome;
    for (const auto& r : log.ticks) {
      if (r.warmup) continue;
      ++cells[c].ticks;
      cells[c].dropouts += !r.measured.valid;
    }
  }
  return cells;
}

FeasibilityResult feasibility_map(const ExperimentConfig& cfg, const Pose& pose, double band_pct) {
  const ObjectModel obj = make_object(cfg);
  const ElectrodeBasis basis = make_basis(cfg);
  const WrenchFormSet forms = assemble_forms(obj, pose, basis, cfg.material);
  WrenchFormSet sym = forms;  // real (electro-orientation) part only
  for (int a = 0; a < 3; ++a) {
    sym.P[a] = forms.P[a].real().cast<cplx>();
    sym.Q[a] = forms.Q[a].real().cast<cplx>();
  }
  const Vec3 target = -sedimentation(obj, cfg.material).F;
  const int n = forms.n();
  const double amp = 38.0;

  std::vector<std::vector<int>> samples;
  if (cfg.feasibility.random_samples > 0) {
    std::mt19937_64 rng(cfg.sim.seed);
    std::uniform_int_distribution<int> d(0, 359);
    for (int s = 0; s < cfg.feasibility.random_samples; ++s) {
      std::vector<int> ph(n, 0);
      for (int i = 1; i < n; ++i) ph[i] = d(rng);
      samples.push_back(ph);
    }
  } else {
    const int step = cfg.feasibility.step_deg, levels = 360 / step;
    long total = 1;
    for (int i = 1; i < n; ++i) {
      total *= levels;
      if (total > 10'000'000) throw ConfigError("feasibility grid exceeds 1e7 states");
    }
    for (long idx = 0; idx < total; ++idx) {
      std::vector<int> ph(n, 0);
      long rest = idx;
      for (int i = n - 1; i >= 1; --i) {
        ph[i] = static_cast<int>(rest % levels) * step;
        rest /= levels;
      }
      samples.push_back(std::move(ph));
    }
  }

  FeasibilityResult res;
  res.sampled = static_cast<long>(samples.size());
  auto in_band = [&](const Wrench& w, double& dev) {
    dev = 100 * (w.F - target).norm() / target.norm();
    return dev <= band_pct;
  };
  double tz_abs = 0, tz_rev = 0;
  int closed = 0;
  double defect = 0, tscale = 0;
  for (const auto& ph : samples) {
    const PhasorVector u(ph, amp);
    const Wrench w = eval_wrench(forms, u.phasors());
    double dev = 0;
    if (!in_band(w, dev)) continue;
    res.cloud.push_back({ph, w.F, w.T, dev});
    (w.T.z() > 0 ? res.positive_tz : res.negative_tz) += w.T.z() != 0;
    std::vector<int> rev(ph);
    for (int& p : rev) p = (360 - p) % 360;
    const Wrench wr = eval_wrench(forms, PhasorVector(rev, amp).phasors());
    const Wrench ws = eval_wrench(sym, u.phasors());
    defect = std::max(defect, (w.T + wr.T - 2 * ws.T).norm());
    tscale = std::max(tscale, w.T.norm());
    double dev_r = 0;
    if (in_band(wr, dev_r)) ++closed;
    tz_abs += std::abs(w.T.z());
    tz_rev += wr.T.z();
  }
  if (!res.cloud.empty()) {
    res.band_closure = static_cast<double>(closed) / res.cloud.size();
    res.conjugation_defect = tscale > 0 ? defect / tscale : 0.0;
    res.reversed_tz_mean = tz_abs > 0 ? tz_rev / tz_abs : 0.0;
  }
  return res;
}

void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b, double& r2) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  b = (sy - a * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += std::pow(y[i] - (a * x[i] + b), 2);
    ss_tot += std::pow(y[i] - sy / n, 2);
  }
  r2 = ss_tot > 0 ? 1 - ss_res / ss_tot : 1.0;
}

PerfResult perf_suite(const ExperimentConfig& cfg) {
  PerfResult res;
  const ObjectModel obj = make_object(cfg);
  const Pose pose = Pose::planar(50e-6, 30e-6, cfg.sim.z_assumed, 0.3);
  const int reps = cfg.perf.assembly_repeats;
  std::vector<double> xs, ys, ms;
  for (int n : cfg.perf.electrode_counts) {
    ExperimentConfig c = cfg;
    c.electrodes.pads.n_electrodes = n;
    c.electrodes.pads.gap = cfg.electrodes.pads.gap * 4.0 / n;  // same metal fraction as n = 4
    c.electrodes.ring.n_electrodes = n;
    const ElectrodeBasis basis = make_basis(c);
    PerfRow row;
    row.n = n;
    row.nodes = static_cast<int>(basis.nodes.size());
    assemble_forms(obj, pose, basis, cfg.material);  // warm caches
    row.assembly_ms = median_ms(reps, [&] { assemble_forms(obj, pose, basis, cfg.material); });
    row.multipole_ms = median_ms(reps, [&] { assemble_forms_multipole(obj, pose, basis, cfg.material, 5); });
    res.rows.push_back(row);
    xs.push_back(n);
    ys.push_back(row.assembly_ms);
    ms.push_back(row.multipole_ms);
  }
  linear_fit(xs, ys, res.slope, res.intercept, res.r2);
  linear_fit(xs, ms, res.mp_slope, res.mp_intercept, res.mp_r2);

  const ElectrodeBasis basis = make_basis(cfg);
  res.assembly4_ms = mean_ms(reps, [&] { assemble_forms(obj, pose, basis, cfg.material); });
  const WrenchFormSet forms = assemble_forms(obj, pose, basis, cfg.material);

  // SA at the configured budget against hover-like references with random tilts
  std::mt19937_64 rng(cfg.sim.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const Wrench sed = sedimentation(obj, cfg.material);
  PhasorVector warm(std::vector<int>(basis.n_electrodes(), 0));
  AnnealSchedule sched = cfg.sim.schedule;
  double total = 0;
  for (int i = 0; i < cfg.perf.solve_calls; ++i) {
    Wrench ref;
    ref.F = -sed.F + 0.3 * sed.F.norm() * Vec3(g(rng), g(rng), 0);
    ref.T = Vec3(0, 0, 1e-15 * g(rng));
    sched.seed = cfg.sim.schedule.seed + i;
    const auto t0 = Clock::now();
    warm = sa_solve(forms, ref, sched, warm, cfg.sim.tolerances).phases;
    total += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }
  res.sa_ms = total / cfg.perf.solve_calls;

  VisionEstimator ve(obj, cfg.frame, cfg.render, cfg.edges);
  std::vector<Frame> frames;
  for (int i = 0; i < cfg.perf.frames; ++i) {
    const Pose p = Pose::planar(100e-6 * std::cos(0.05 * i), 100e-6 * std::sin(0.05 * i), cfg.sim.z_assumed, 0.05 * i);
    if (i == 0) ve.observe(p, 0);  // acquire, so later frames use the crop
    frames.push_back(rasterize(obj, p, cfg.frame, cfg.render, static_cast<std::uint64_t>(i), ve.next_window()));
    ve.process(frames.back());
  }
  res.vision_ms = mean_ms(1, [&] {
    for (const auto& f : frames) ve.process(f);
  }) / cfg.perf.frames;

  // eval_wrench cost depends on the electrode count only; assembly on the elements
  const ObjectModel fine = build_object(obj.shape, 8, cfg.material);
  const WrenchFormSet fine_forms = assemble_forms(fine, pose, basis, cfg.material);
  const auto u = PhasorVector({0, 90, 180, 270}).phasors();
  res.eval_ms_small = mean_ms(20000, [&] { (void)eval_wrench(forms, u); });
  res.eval_ms_large = mean_ms(20000, [&] { (void)eval_wrench(fine_forms, u); });
  const double fine_ms = mean_ms(std::max(1, reps / 4), [&] { assemble_forms(fine, pose, basis, cfg.material); });
  res.assembly_ratio_8x = fine_ms / res.assembly4_ms;
  return res;
}

namespace {

void metrics_row(std::ostream& out, const TargetMetrics& m) {
  out << m.settle_time << ',' << (m.timeout ? 1 : 0) << ',' << m.samples << ',' << m.accuracy_pos << ','
      << m.accuracy_yaw << ',' << m.precision_pos << ',' << m.precision_yaw << ',' << m.mean_error_pos << ','
      << m.mean_error_yaw << ',' << m.path_length << ',' << m.mean_speed;
}

constexpr const char* kMetricsHeader =
    "settle_time,timeout,samples,accuracy_pos,accuracy_yaw,precision_pos,precision_yaw,mean_error_pos,"
    "mean_error_yaw,path_length,mean_speed";

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsReport& rep) {
  out << "index,x_ref,y_ref,phi_ref," << kMetricsHeader << '\n';
  for (const auto& m : rep.targets) {
    out << m.index << ',' << m.target.r_ref.x() << ',' << m.target.r_ref.y() << ',' << m.target.phi_ref << ',';
    metrics_row(out, m);
    out << '\n';
  }
}

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
  out << "x,y,orientation,outcome,ticks,dropouts," << kMetricsHeader << '\n';
  for (const auto& c : cells) {
    out << c.x << ',' << c.y << ',' << c.orientation << ',' << c.outcome << ',' << c.ticks << ',' << c.dropouts << ',';
    metrics_row(out, c.metrics);
    out << '\n';
  }
}

void write_feasibility_csv(std::ostream& out, const FeasibilityResult& res) {
  out << "phases,Fx,Fy,Fz,Tx,Ty,Tz,deviation_pct\n";
  for (const auto& p : res.cloud) {
    for (std::size_t i = 0; i < p.phases.size(); ++i) out << (i ? ";" : "") << p.phases[i];
    out << ',' << p.F.x() << ',' << p.F.y() << ',' << p.F.z() << ',' << p.T.x() << ',' << p.T.y() << ','
        << p.T.z() << ',' << p.deviation_pct << '\n';
  }
}

void write_perf_csv(std::ostream& out, const PerfResult& res) {
  out << "n,nodes,assembly_ms,multipole_ms\n";
  for (const auto& r : res.rows) out << r.n << ',' << r.nodes << ',' << r.assembly_ms << ',' << r.multipole_ms << '\n';
}

}  // namespace depman
