#pragma once

#include <cstdint>
#include <vector>

#include "depman/gdep.hpp"

namespace depman {

/// Fixed-amplitude electrode signals with phases on the integer-degree grid.
struct PhasorVector {
  double amplitude = 38.0;     // V peak
  std::vector<int> phase_deg;  // each in [0, 360)

  PhasorVector() = default;
  PhasorVector(std::vector<int> phases, double u = 38.0);

  int n() const { return static_cast<int>(phase_deg.size()); }
  std::vector<cplx> phasors() const;
  /// Same phases shifted by a common offset (gauge transformation).
  PhasorVector shifted(int deg) const;
};

/// Thresholds for references where the error ratios are undefined.
struct ErrorTolerances {
  double torque_min = 1e-16;    // N m
  double torque_scale = 1e-14;  // N m
  double force_min = 1e-12;     // N
  double force_scale = 1e-10;   // N
};

struct ErrorVector {
  double e1 = 0;  // torque direction, %
  double e2 = 0;  // torque magnitude, %
  double e3 = 0;  // in-plane force direction, %
  double e4 = 0;  // vertical force, %
  double cost = 0;

  static constexpr double kWeights[4] = {10, 1, 10, 1};
};

ErrorVector error_vector(const Wrench& achieved, const Wrench& ref, const ErrorTolerances& tol = {});

struct AnnealSchedule {
  double T0 = 0;  // cost units; <= 0 calibrates from the first proposals
  double alpha = 0.95;
  int max_evals = 2500;
  int moves_per_temp = 20;
  std::uint64_t seed = 1;
  int phase_step_deg = 1;
  double sigma_start_deg = 60;
  double sigma_end_deg = 2;
  int calibration_proposals = 50;
  double calibration_acceptance = 0.8;
  int restarts = 1;  // > 1 splits the budget over parallel chains
  // Levels without a new best before the chain reheats to T0 from the best state; 0 never.
  int reheat_levels = 25;

  void validate() const;
};

struct InverseSolution {
  PhasorVector phases;
  ErrorVector error;
  Wrench wrench;  // model wrench of `phases`
  int evals = 0;
  double T0 = 0;
};

/// Simulated annealing over single-electrode phase moves. Electrode 0 keeps its warm
/// start phase (gauge fixing); the best state seen, warm start included, is returned.
InverseSolution sa_solve(const WrenchFormSet& forms, const Wrench& ref, const AnnealSchedule& sched,
                         const PhasorVector& warm_start, const ErrorTolerances& tol = {});

/// Exhaustive minimum over the grid with `gauge_electrode` fixed at phase 0. Ties go
/// to the lexicographically smallest phases. Throws ConfigError past 1e7 states.
InverseSolution brute_force(const WrenchFormSet& forms, const Wrench& ref, int phase_step_deg,
                            double amplitude = 38.0, int gauge_electrode = 0,
                            const ErrorTolerances& tol = {});

/// Single-threaded reference of brute_force.
InverseSolution brute_force_serial(const WrenchFormSet& forms, const Wrench& ref, int phase_step_deg,
                                   double amplitude = 38.0, int gauge_electrode = 0,
                                   const ErrorTolerances& tol = {});

}  // namespace depman
