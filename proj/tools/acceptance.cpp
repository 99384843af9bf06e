// Acceptance suite: one PASS/FAIL line per primary criterion, with its measured values
// and runtime. Exit status 0 only when every line passes.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depman/config.hpp"
#include "depman/harness.hpp"

using namespace depman;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Pose random_pose(std::mt19937_64& rng, double radius = 150e-6) {
  std::uniform_real_distribution<double> u(0, 1);
  const double r = radius * std::sqrt(u(rng)), th = 2 * kPi * u(rng);
  return Pose::planar(r * std::cos(th), r * std::sin(th), 60e-6 + 80e-6 * u(rng), 2 * kPi * u(rng));
}

std::vector<cplx> random_u(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> d(0, 359);
  std::vector<int> ph(n);
  for (auto& p : ph) p = d(rng);
  return PhasorVector(ph).phasors();
}

// Dipole wrench on one element from the superposed total field, no quadratic forms.
Wrench dipole_on_total_field(const ElectrodeBasis& basis, const Vec3& x, const std::vector<cplx>& u, cplx alpha) {
  const FieldDerivatives f = superpose(basis_derivatives(basis, x, 2), u);
  Eigen::Vector3cd E;
  Eigen::Matrix3cd dE;
  for (int i = 0; i < 3; ++i) {
    E[i] = -f.order(1)[i];
    for (int j = 0; j < 3; ++j) dE(i, j) = -f.order(2)[3 * i + j];
  }
  Wrench w;
  for (int i = 0; i < 3; ++i) {
    cplx s = 0;
    for (int j = 0; j < 3; ++j) s += E[j] * std::conj(dE(i, j));
    w.F[i] = 0.5 * (alpha * s).real();
  }
  const Eigen::Vector3cd c = E.conjugate();
  const Eigen::Vector3cd exc(E[1] * c[2] - E[2] * c[1], E[2] * c[0] - E[0] * c[2], E[0] * c[1] - E[1] * c[0]);
  w.T = 0.5 * (alpha * exc).real();
  return w;
}

double rel6(const Wrench& a, const Wrench& b, double L) {
  Vec6 x, y;
  x << a.F, a.T / L;
  y << b.F, b.T / L;
  return (x - y).norm() / y.norm();
}

Outcome oracle_equivalence(const ExperimentConfig& cfg) {
  const ElectrodeBasis basis = make_basis(cfg);
  const ObjectModel one = build_object(ShapeSpec{"ONE", {{0, 0}}, 20e-6, 20e-6, {}, 4}, 1, cfg.material);
  const cplx alpha = element_polarizability(cfg.material, one.elements[0].volume);
  std::mt19937_64 rng(1);
  double worst_single = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    const auto u = random_u(rng, basis.n_electrodes());
    const Wrench f = eval_wrench(assemble_forms(one, p, basis, cfg.material), u);
    worst_single = std::max(worst_single, rel6(f, dipole_on_total_field(basis, p.r, u, alpha), 20e-6));
  }
  const ObjectModel sz = make_object(cfg);
  double worst_sz = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    const auto u = random_u(rng, basis.n_electrodes());
    const Wrench f = eval_wrench(assemble_forms(sz, p, basis, cfg.material), u);
    const Wrench d = direct_wrench(sz, p, basis, cfg.material, u);
    worst_sz = std::max({worst_sz, (f.F - d.F).norm() / d.F.norm(), (f.T - d.T).norm() / d.T.norm()});
  }
  return {worst_single < 1e-10 && worst_sz < 1e-12,
          fmt("single element worst %.1e (< 1e-10), %s forms vs direct worst %.1e (< 1e-12)", worst_single,
              cfg.shape.c_str(), worst_sz)};
}

Outcome multipole_convergence(const ExperimentConfig& cfg) {
  const ElectrodeBasis basis = make_basis(cfg);
  const ObjectModel obj = make_object(cfg);
  const double L = obj.footprint_radius();
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng, cfg.manipulation_radius);
    const auto u = random_u(rng, basis.n_electrodes());
    const Wrench d = eval_wrench(assemble_forms(obj, p, basis, cfg.material), u);
    worst = std::max(worst, rel6(eval_wrench(assemble_forms_multipole(obj, p, basis, cfg.material, 5), u), d, L));
  }
  return {worst < 0.02, fmt("order 5 worst relative error %.3f %% over 100 poses (< 2 %%)", 100 * worst)};
}

Outcome invariants(const ExperimentConfig& cfg) {
  const ElectrodeBasis basis = make_basis(cfg);
  const ObjectModel obj = make_object(cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(0, 2 * kPi);
  double gauge = 0, herm = 0, trace = 0;
  bool spd = true;
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng);
    const WrenchFormSet f = assemble_forms(obj, p, basis, cfg.material);
    herm = std::max(herm, f.hermitian_defect());
    const auto u = random_u(rng, basis.n_electrodes());
    auto v = u;
    const cplx g = std::polar(1.0, th(rng));
    for (auto& x : v) x *= g;
    const Wrench a = eval_wrench(f, u), b = eval_wrench(f, v);
    gauge = std::max(gauge, rel6(b, a, obj.footprint_radius()));
    for (const auto& fd : basis_derivatives(basis, p.r, 6))
      for (int k = 2; k <= 6; ++k) {
        const Tensor& t = fd.order(k);
        const std::size_t stride = Tensor::size_for(k - 2);
        for (std::size_t rest = 0; rest < stride; ++rest) {
          cplx s = 0;
          for (int d = 0; d < 3; ++d) s += t[(3 * d + d) * stride + rest];
          trace = std::max(trace, std::abs(s) / t.norm());
        }
      }
    const Mat6 G = world_resistance(obj.body_resistance, p).grand();
    Eigen::SelfAdjointEigenSolver<Mat6> eig(G);
    spd = spd && (G - G.transpose()).norm() <= 1e-12 * G.norm() && eig.eigenvalues().minCoeff() > 0;
  }
  return {gauge < 1e-12 && herm < 1e-12 && trace < 1e-9 && spd,
          fmt("1000 cases: gauge %.1e, hermitian %.1e (< 1e-12), harmonic trace %.1e (< 1e-9), grand matrix %s",
              gauge, herm, trace, spd ? "SPD" : "NOT SPD")};
}

Outcome inverter_optimality(const ExperimentConfig& cfg) {
  const ElectrodeBasis basis = make_basis(cfg);
  const ObjectModel obj = make_object(cfg);
  const WrenchFormSet f = assemble_forms(obj, Pose::planar(50e-6, -30e-6, cfg.sim.z_assumed, 0.4), basis, cfg.material);
  Wrench ref;
  ref.F = Vec3(2e-11, -1e-11, -sedimentation(obj, cfg.material).F.z());
  ref.T = Vec3(0, 0, 2e-15);
  const double bf = brute_force(f, ref, 45, 38.0, 0, cfg.sim.tolerances).error.cost;
  const PhasorVector warm(std::vector<int>(basis.n_electrodes(), 0));
  const double warm_cost = error_vector(eval_wrench(f, warm.phasors()), ref, cfg.sim.tolerances).cost;
  int ok = 0, worse = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    AnnealSchedule s = cfg.sim.schedule;
    s.phase_step_deg = 45;
    s.seed = static_cast<std::uint64_t>(seed);
    const double c = sa_solve(f, ref, s, warm, cfg.sim.tolerances).error.cost;
    ok += c <= 1.1 * bf + 1e-12;
    worse += c > warm_cost;
  }
  return {ok >= 90 && worse == 0,
          fmt("SA within 1.1x of brute force (cost %.2f) in %d/100 seeds (>= 90), worse than warm start in %d", bf,
              ok, worse)};
}

Outcome closed_loop(ExperimentConfig cfg) {
  cfg.sim.noise.enabled = false;
  cfg.sim.vision_bypass = true;
  const SuiteResult r = waypoint_suite(cfg);
  const int n = static_cast<int>(r.report.targets.size());
  const int conv = r.report.converged();
  double pos = 0, yaw = 0;
  for (const auto& t : r.report.targets)
    if (!t.timeout) {
      pos += t.mean_error_pos;
      yaw += t.mean_error_yaw;
    }
  pos /= std::max(1, conv);
  yaw /= std::max(1, conv);
  const bool pass = r.log.outcome == "ok" && conv >= 0.95 * n && pos <= 15e-6 && yaw <= 0.03;
  return {pass, fmt("%d/%d waypoints converged (>= 95 %%), steady-state %.2f um (<= 15), %.4f rad (<= 0.03)", conv, n,
                    pos * 1e6, yaw)};
}

Outcome circle(ExperimentConfig cfg) {
  cfg.sim.noise.enabled = false;
  cfg.sim.vision_bypass = true;
  const CircleResult r = circle_suite(cfg);
  const bool pass = r.run.log.outcome == "ok" && r.max_cross_track < 15e-6 && r.max_tangent_dev < 1e-9;
  return {pass, fmt("max cross-track %.2f um (< 15), mean %.2f um, max commanded tangent deviation %.1e rad",
                    r.max_cross_track * 1e6, r.mean_cross_track * 1e6, r.max_tangent_dev)};
}

Outcome vision(const ExperimentConfig& cfg) {
  const ObjectModel obj = make_object(cfg);
  RenderConfig clean = cfg.render;
  clean.noise_sigma = 0;
  VisionEstimator est(obj, cfg.frame, clean, cfg.edges);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_pos = 0, worst_yaw = 0;
  int invalid = 0;
  for (int i = 0; i < 500; ++i) {
    est.reset();
    const double r = cfg.manipulation_radius * std::sqrt(u(rng)), th = 2 * kPi * u(rng);
    const Pose p = Pose::planar(r * std::cos(th), r * std::sin(th), cfg.sim.z_assumed, kPi * (2 * u(rng) - 1));
    const PoseEstimate e = est.observe(p, 0);
    if (!e.valid) {
      ++invalid;
      continue;
    }
    worst_pos = std::max(worst_pos, std::hypot(e.x - p.r.x(), e.y - p.r.y()));
    worst_yaw = std::max(worst_yaw, std::abs(wrap_angle(e.phi, p.yaw(), obj.shape.symmetry_order)));
  }
  const auto cells = precision_grid(cfg);
  long ticks = 0, drops = 0;
  for (const auto& c : cells) {
    ticks += c.ticks;
    drops += c.dropouts;
  }
  const double drop_pct = ticks ? 100.0 * drops / ticks : 100.0;
  const bool pass = invalid == 0 && worst_pos < cfg.frame.pitch && worst_yaw < 0.02 && drop_pct <= 1.0;
  return {pass, fmt("500 noise-free poses: worst %.2f um (< %.2f), %.4f rad (< 0.02), %d invalid; "
                    "grid %zu cells, dropouts %.2f %% of %ld ticks (<= 1 %%)",
                    worst_pos * 1e6, cfg.frame.pitch * 1e6, worst_yaw, invalid, cells.size(), drop_pct, ticks)};
}

Outcome performance(const ExperimentConfig& cfg) {
  const PerfResult r = perf_suite(cfg);
  return {r.tick_ms() <= 20.0 && r.r2 > 0.95,
          fmt("tick %.2f ms (assembly %.2f + SA %.2f + vision %.2f; <= 20), assembly vs n R^2 %.3f (> 0.95)",
              r.tick_ms(), r.assembly4_ms, r.sa_ms, r.vision_ms, r.r2)};
}

Outcome feasibility(const ExperimentConfig& cfg) {
  const FeasibilityResult r =
      feasibility_map(cfg, Pose::planar(0, 0, cfg.sim.z_assumed, 0), cfg.feasibility.band_pct);
  const bool pass = !r.cloud.empty() && r.positive_tz > 0 && r.negative_tz > 0 && r.conjugation_defect < 1e-12 &&
                    r.band_closure >= 0.9;
  return {pass, fmt("%zu/%ld states in band: %d with +Tz, %d with -Tz; conjugation defect %.1e, "
                    "reversed-phase band closure %.3f (>= 0.9)",
                    r.cloud.size(), r.sampled, r.positive_tz, r.negative_tz, r.conjugation_defect, r.band_closure)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string config_path;
  std::string only;
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--only", only, "Run the criteria whose name contains this text");
  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle-equivalence", [&] { return oracle_equivalence(cfg); }},
      {"multipole-convergence", [&] { return multipole_convergence(cfg); }},
      {"invariants", [&] { return invariants(cfg); }},
      {"inverter-optimality", [&] { return inverter_optimality(cfg); }},
      {"closed-loop-convergence", [&] { return closed_loop(cfg); }},
      {"circle-trajectory", [&] { return circle(cfg); }},
      {"vision-pipeline", [&] { return vision(cfg); }},
      {"performance-budget", [&] { return performance(cfg); }},
      {"feasibility-map", [&] { return feasibility(cfg); }},
  };
  std::printf("config %s\n", config_hash(cfg).c_str());
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %-24s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
