#pragma once

#include <span>

#include <Eigen/Dense>

#include "depman/geometry.hpp"
#include "depman/materials.hpp"

namespace depman {

struct Element;
struct ObjectModel;

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Resistance tensors multiplying mu*v and mu*omega:
///   F = mu (K v + C^T w),  T = mu (C v + Omega w),  torques about the body origin.
struct ResistanceSet {
  Mat3 K = Mat3::Zero();      // m
  Mat3 C = Mat3::Zero();      // m^2
  Mat3 Omega = Mat3::Zero();  // m^3

  Mat6 grand() const;
};

struct Wrench {
  Vec3 F = Vec3::Zero();
  Vec3 T = Vec3::Zero();

  Wrench operator+(const Wrench& o) const { return {F + o.F, T + o.T}; }
  Vec6 stacked() const;
};

struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

/// Body-frame tensors from independent Stokes spheres (no hydrodynamic interaction).
ResistanceSet resistance_tensors(std::span<const Element> elements);
ResistanceSet resistance_tensors(const ObjectModel& obj);

ResistanceSet world_resistance(const ResistanceSet& body, const Pose& pose);

/// [0, 0, (rho_m - rho_o) V g]; zero torque.
Wrench sedimentation(const ObjectModel& obj, const MaterialProperties& m);

/// Solves mu G [v; w] = [F; T]. Throws NumericalError when cond(G) > 1e12.
Twist mobility_solve(const ResistanceSet& world, const MaterialProperties& m, const Wrench& w);

/// Same balance restricted to {v_x, v_y, v_z, w_z}: the body stays lying flat and the
/// constraint absorbs the remaining torque components.
Twist mobility_solve_planar(const ResistanceSet& world, const MaterialProperties& m,
                            const Wrench& w);

/// Forward map mu G [v; w].
Wrench resistance_wrench(const ResistanceSet& world, const MaterialProperties& m, const Twist& t);

}  // namespace depman
