#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "depman/field.hpp"
#include "depman/hydro.hpp"
#include "depman/object.hpp"

namespace depman {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Hermitian forms: F_a = u^H P_a u, T_a = u^H Q_a u (torque about the body origin).
struct WrenchFormSet {
  Pose pose;
  std::array<CMat, 3> P;  // N/V^2
  std::array<CMat, 3> Q;  // N m/V^2

  int n() const { return static_cast<int>(P[0].rows()); }
  /// Largest ||M - M^H|| / ||M|| over the six matrices.
  double hermitian_defect() const;
};

/// Time-averaged dipole kernels of every element, OpenMP over fixed element blocks so
/// the reduction order (and the result) does not depend on the thread count.
WrenchFormSet assemble_forms(const ObjectModel& obj, const Pose& pose,
                             const ElectrodeBasis& basis, const MaterialProperties& m);

/// Single-threaded reference of assemble_forms.
WrenchFormSet assemble_forms_serial(const ObjectModel& obj, const Pose& pose,
                                    const ElectrodeBasis& basis, const MaterialProperties& m);

Wrench eval_wrench(const WrenchFormSet& forms, std::span<const cplx> u);

/// Per-element summation with the superposed total field, no forms.
Wrench direct_wrench(const ObjectModel& obj, const Pose& pose, const ElectrodeBasis& basis,
                     const MaterialProperties& m, std::span<const cplx> u);

/// Element dipoles moved to the body origin, per basis excitation, in the body frame.
/// moments[i][k-1] has the field index first and k-1 symmetric lever-arm indices.
struct MultipoleSet {
  int order = 0;
  std::vector<std::vector<Tensor>> moments;  // [electrode][k-1], C m^k per volt
};

/// Body-frame multipoles from basis fields given at the body origin (world frame).
/// Element fields are Taylor-expanded from the origin with every available order.
MultipoleSet multipole_moments(const ObjectModel& obj, const Pose& pose,
                               std::span<const FieldDerivatives> basis_fields,
                               const MaterialProperties& m, int order);

/// Wrench from a multipole set and the total field derivatives at the body origin
/// (world frame, max_order >= order + 1). The phasors u weight the moments.
Wrench eval_wrench_multipole(const MultipoleSet& mp, const FieldDerivatives& total_field,
                             const Pose& pose, std::span<const cplx> u);

/// Forms assembled through the multipole expansion: basis derivatives to order+1 at the
/// origin, rotation into the body frame, moment contraction per electrode pair.
WrenchFormSet assemble_forms_multipole(const ObjectModel& obj, const Pose& pose,
                                       const ElectrodeBasis& basis,
                                       const MaterialProperties& m, int order = 5);

}  // namespace depman
