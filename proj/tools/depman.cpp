// depman: command-line front end for the experiment suites, the inverse solver and the
// live service. Positions on the command line are in micrometres, angles in radians.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "depman/config.hpp"
#include "depman/errors.hpp"
#include "depman/gdep.hpp"
#include "depman/harness.hpp"
#include "depman/inverter.hpp"
#include "depman/logio.hpp"
#include "depman/service.hpp"

using namespace depman;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitEpisode = 3;

struct Globals {
  std::string config_path;
  long long seed = -1;
  std::string out = "out";
  bool vision_bypass = false;
  std::string noise = "on";
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed >= 0) cfg.sim.seed = static_cast<std::uint64_t>(g.seed);
  if (g.vision_bypass) cfg.sim.vision_bypass = true;
  if (g.noise == "off") cfg.sim.noise.enabled = false;
  cfg.validate();
  return cfg;
}

std::filesystem::path out_file(const Globals& g, const std::string& name) {
  std::filesystem::create_directories(g.out);
  return std::filesystem::path(g.out) / name;
}

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << std::setprecision(10);
  return f;
}

Pose pose_um(const std::vector<double>& v, double z) {
  return Pose::planar(v.at(0) * 1e-6, v.at(1) * 1e-6, z, v.size() > 2 ? v[2] : 0.0);
}

void print_summary(const MetricsReport& rep) {
  double err = 0, yaw = 0;
  int n = 0;
  for (const auto& t : rep.targets)
    if (!t.timeout) {
      err += t.mean_error_pos;
      yaw += t.mean_error_yaw;
      ++n;
    }
  std::printf("targets %zu  converged %d", rep.targets.size(), rep.converged());
  if (n) std::printf("  steady-state error %.2f um  %.4f rad", err / n * 1e6, yaw / n);
  std::printf("\n");
}

int save_episode(const Globals& g, const std::string& stem, const EpisodeLog& log, const MetricsReport& rep) {
  write_jsonl(out_file(g, stem + ".jsonl").string(), log);
  write_csv(out_file(g, stem + ".csv").string(), log);
  auto f = open(out_file(g, stem + "_metrics.csv"));
  write_metrics_csv(f, rep);
  print_summary(rep);
  if (log.outcome != "ok") {
    std::fprintf(stderr, "episode failed: %s\n", log.outcome.c_str());
    return kExitEpisode;
  }
  return kExitOk;
}

json wrench_json(const Wrench& w) {
  return {{"F", {w.F.x(), w.F.y(), w.F.z()}}, {"T", {w.T.x(), w.T.y(), w.T.z()}}};
}

json cmat_json(const CMat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Software twin of a planar-electrode DEP micromanipulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON experiment config");
  app.add_option("--seed", g.seed, "Override the simulation seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--vision-bypass", g.vision_bypass, "Feed the true pose to the controller");
  app.add_option("--noise", g.noise, "Measurement noise")->check(CLI::IsMember({"on", "off"}));

  std::function<int()> action;

  auto* config_cmd = app.add_subcommand("config", "Print the effective config as JSON");
  config_cmd->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      std::cout << config_to_json(cfg).dump(2) << "\n";
      std::cerr << "hash " << config_hash(cfg) << "\n";
      return kExitOk;
    };
  });

  std::vector<double> target{0, 0, 0};
  double hold = 3.0;
  auto* simulate = app.add_subcommand("simulate", "Drive from the centre to one target pose");
  simulate->add_option("--target", target, "x,y[,phi] (um, um, rad)")->delimiter(',')->expected(2, 3);
  simulate->add_option("--hold", hold, "Seconds to hold after settling");
  simulate->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      Simulator sim(make_object(cfg), make_basis(cfg), cfg.material, cfg.sim, cfg.frame, cfg.render, cfg.edges);
      TargetPose t;
      t.r_ref = Vec3(target.at(0) * 1e-6, target.at(1) * 1e-6, cfg.sim.z_assumed);
      t.phi_ref = target.size() > 2 ? target[2] : 0.0;
      if (std::hypot(t.r_ref.x(), t.r_ref.y()) > cfg.manipulation_radius + 1e-12)
        throw ConfigError("target outside the manipulation radius");
      const EpisodeLog log = run_episode(sim, Pose::planar(0, 0, cfg.sim.z_assumed, 0), {{t, hold, true}});
      return save_episode(g, "simulate", log, compute_metrics(log, sim.object().shape.symmetry_order));
    };
  });

  app.add_subcommand("waypoints", "Random targets in the manipulation disc")->callback([&] {
    action = [&] {
      const SuiteResult r = waypoint_suite(load(g));
      return save_episode(g, "waypoints", r.log, r.report);
    };
  });

  app.add_subcommand("circle", "Follow a circle with tangent yaw")->callback([&] {
    action = [&] {
      const CircleResult r = circle_suite(load(g));
      std::printf("cross-track max %.2f um  mean %.2f um  tangent deviation %.2e rad\n", r.max_cross_track * 1e6,
                  r.mean_cross_track * 1e6, r.max_tangent_dev);
      return save_episode(g, "circle", r.run.log, r.run.report);
    };
  });

  app.add_subcommand("grid", "Accuracy/precision map over a quarter disc")->callback([&] {
    action = [&] {
      const auto cells = precision_grid(load(g));
      auto f = open(out_file(g, "grid.csv"));
      write_grid_csv(f, cells);
      int timeouts = 0, failed = 0;
      for (const auto& c : cells) {
        timeouts += c.metrics.timeout;
        failed += c.outcome != "ok";
      }
      std::printf("cells %zu  timeouts %d  failed %d\n", cells.size(), timeouts, failed);
      return failed ? kExitEpisode : kExitOk;
    };
  });

  double band = -1;
  auto* feas = app.add_subcommand("feasibility", "Torques reachable with the force near -F_sed");
  feas->add_option("--band", band, "Force band in percent (default from config)");
  feas->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      const FeasibilityResult r = feasibility_map(cfg, Pose::planar(0, 0, cfg.sim.z_assumed, 0),
                                                  band >= 0 ? band : cfg.feasibility.band_pct);
      auto f = open(out_file(g, "feasibility.csv"));
      write_feasibility_csv(f, r);
      std::printf("sampled %ld  in band %zu  Tz>0 %d  Tz<0 %d  conjugation defect %.2e  band closure %.3f\n",
                  r.sampled, r.cloud.size(), r.positive_tz, r.negative_tz, r.conjugation_defect, r.band_closure);
      return kExitOk;
    };
  });

  app.add_subcommand("perf", "Timing of assembly, solve and vision")->callback([&] {
    action = [&] {
      const PerfResult r = perf_suite(load(g));
      auto f = open(out_file(g, "perf.csv"));
      write_perf_csv(f, r);
      for (const auto& row : r.rows)
        std::printf("n %2d  nodes %5d  assembly %.3f ms  multipole %.3f ms\n", row.n, row.nodes, row.assembly_ms,
                    row.multipole_ms);
      std::printf("assembly fit %.4f ms/electrode + %.4f ms, R^2 %.4f\n", r.slope, r.intercept, r.r2);
      std::printf("tick at n=4: assembly %.3f + solve %.3f + vision %.3f = %.3f ms\n", r.assembly4_ms, r.sa_ms,
                  r.vision_ms, r.tick_ms());
      return kExitOk;
    };
  });

  std::vector<double> pose{0, 0, 0}, force, torque, phases;
  int bf_step = 0;
  auto* invert = app.add_subcommand("invert", "Solve phases for a reference wrench (default: hover)");
  invert->add_option("--pose", pose, "x,y[,phi]")->delimiter(',')->expected(2, 3);
  invert->add_option("--force", force, "Fx,Fy,Fz in N")->delimiter(',')->expected(3);
  invert->add_option("--torque", torque, "Tx,Ty,Tz in N m")->delimiter(',')->expected(3);
  invert->add_option("--brute-force", bf_step, "Also search the exhaustive grid at this step (deg)");
  invert->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      const ObjectModel obj = make_object(cfg);
      const ElectrodeBasis basis = make_basis(cfg);
      const WrenchFormSet forms = assemble_forms(obj, pose_um(pose, cfg.sim.z_assumed), basis, cfg.material);
      Wrench ref;
      ref.F = force.empty() ? Vec3(-sedimentation(obj, cfg.material).F) : Vec3(force[0], force[1], force[2]);
      ref.T = torque.empty() ? Vec3::Zero() : Vec3(torque[0], torque[1], torque[2]);
      AnnealSchedule sched = cfg.sim.schedule;
      sched.seed = cfg.sim.seed;
      const PhasorVector warm(std::vector<int>(basis.n_electrodes(), 0));
      const InverseSolution s = sa_solve(forms, ref, sched, warm, cfg.sim.tolerances);
      json j = {{"phases", s.phases.phase_deg}, {"cost", s.error.cost},
                {"e", {s.error.e1, s.error.e2, s.error.e3, s.error.e4}}, {"evals", s.evals},
                {"achieved", wrench_json(s.wrench)}, {"reference", wrench_json(ref)}};
      if (bf_step > 0) {
        const InverseSolution b = brute_force(forms, ref, bf_step, 38.0, 0, cfg.sim.tolerances);
        j["brute_force"] = {{"phases", b.phases.phase_deg}, {"cost", b.error.cost}, {"evals", b.evals}};
      }
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    };
  });

  auto* gdep = app.add_subcommand("gdep", "Wrench or quadratic forms at a pose");
  gdep->require_subcommand(1);
  auto* gw = gdep->add_subcommand("wrench", "Wrench for given phases");
  gw->add_option("--pose", pose, "x,y[,phi]")->delimiter(',')->expected(2, 3);
  gw->add_option("--phases", phases, "Phase per electrode, degrees")->delimiter(',')->required();
  gw->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      const ObjectModel obj = make_object(cfg);
      const WrenchFormSet forms = assemble_forms(obj, pose_um(pose, cfg.sim.z_assumed), make_basis(cfg), cfg.material);
      if (static_cast<int>(phases.size()) != forms.n()) throw ConfigError("need one phase per electrode");
      std::vector<int> deg;
      for (double p : phases) deg.push_back(static_cast<int>(std::lround(p)));
      std::cout << wrench_json(eval_wrench(forms, PhasorVector(deg).phasors())).dump(2) << "\n";
      return kExitOk;
    };
  });
  auto* gf = gdep->add_subcommand("forms", "Hermitian force/torque matrices as [re, im] pairs");
  gf->add_option("--pose", pose, "x,y[,phi]")->delimiter(',')->expected(2, 3);
  gf->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      const WrenchFormSet forms =
          assemble_forms(make_object(cfg), pose_um(pose, cfg.sim.z_assumed), make_basis(cfg), cfg.material);
      json j;
      for (int a = 0; a < 3; ++a) {
        j["P"].push_back(cmat_json(forms.P[a]));
        j["Q"].push_back(cmat_json(forms.Q[a]));
      }
      std::cout << j.dump() << "\n";
      return kExitOk;
    };
  });

  double fz = 100, extent = 300, fstep = 10;
  auto* field = app.add_subcommand("field", "Dump the potential and |E|^2 on a horizontal plane");
  field->add_option("--z", fz, "Plane height (um)");
  field->add_option("--extent", extent, "Half width (um)");
  field->add_option("--step", fstep, "Grid step (um)");
  field->add_option("--phases", phases, "Phase per electrode, degrees (default: rotating)")->delimiter(',');
  field->callback([&] {
    action = [&] {
      const ExperimentConfig cfg = load(g);
      const ElectrodeBasis basis = make_basis(cfg);
      const int n = basis.n_electrodes();
      std::vector<int> deg;
      for (int i = 0; i < n; ++i) deg.push_back(phases.empty() ? i * 360 / n : static_cast<int>(std::lround(phases.at(i))));
      const auto u = PhasorVector(deg).phasors();
      auto f = open(out_file(g, "field.csv"));
      f << "x,y,z,phi_re,phi_im,E2\n";
      const int m = static_cast<int>(std::floor(extent / fstep));
      for (int j = -m; j <= m; ++j)
        for (int i = -m; i <= m; ++i) {
          const Vec3 x(i * fstep * 1e-6, j * fstep * 1e-6, fz * 1e-6);
          const auto d = basis_derivatives(basis, x, 1);
          const FieldDerivatives tot = superpose(d, u);
          double e2 = 0;
          for (int k = 0; k < 3; ++k) e2 += std::norm(tot.order(1)[k]);
          f << x.x() << ',' << x.y() << ',' << x.z() << ',' << tot.potential.real() << ',' << tot.potential.imag()
            << ',' << e2 << '\n';
        }
      std::printf("wrote %s\n", out_file(g, "field.csv").string().c_str());
      return kExitOk;
    };
  });

  ServiceOptions sopt;
  bool no_true = false;
  auto* serve = app.add_subcommand("serve", "Websocket service for operator clients");
  serve->add_option("--port", sopt.port, "TCP port (0 picks one)");
  serve->add_option("--address", sopt.address, "Bind address");
  serve->add_option("--speed", sopt.speed, "Time scale, > 1 is faster than real time")->check(CLI::PositiveNumber);
  serve->add_option("--record", sopt.record_path, "Record live ticks to a JSON-lines log");
  serve->add_option("--replay", sopt.replay_path, "Stream a recorded log instead of simulating");
  serve->add_flag("--no-true-pose", no_true, "Omit the true pose from snapshots");
  serve->callback([&] {
    action = [&] {
      sopt.include_true_pose = !no_true;
      Server server(load(g), sopt);
      std::printf("listening on %s:%u (%s)\n", sopt.address.c_str(), server.port(),
                  sopt.replay_path.empty() ? "live" : "replay");
      std::fflush(stdout);
      server.run();
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  try {
    return action ? action() : kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const FieldDomainError& e) {
    std::fprintf(stderr, "episode failed: %s\n", e.what());
    return kExitEpisode;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
