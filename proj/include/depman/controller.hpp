#pragma once

#include "depman/geometry.hpp"
#include "depman/hydro.hpp"
#include "depman/materials.hpp"

namespace depman {

struct ControlGains {
  double k_v = 50.0;      // 1/s
  double k_omega = 10.0;  // 1/s
  // Reference saturation keeps the inversion inside its feasible regime.
  double v_max = 500e-6;  // m/s, on ||v||
  double w_max = 3.0;     // rad/s, on |w_z|

  void validate() const;
};

/// Planar target: position (z is the configured levitation height) and yaw.
struct TargetPose {
  Vec3 r_ref = Vec3(0, 0, 100e-6);
  double phi_ref = 0.0;
};

/// Proportional regulator. The measured pose supplies x, y and yaw; z is replaced by
/// z_assumed, so v_z = k_v (z_ref - z_assumed). Yaw error is wrapped by the shape's
/// symmetry order. Outputs are saturated.
Twist velocity_refs(const ControlGains& gains, const Pose& measured, const TargetPose& target,
                    int symmetry_order, double z_assumed);

/// F_ref = mu K v + mu C^T w - F_sed,  T_ref = mu C v + mu Omega w  (world tensors).
Wrench reference_wrench(const ResistanceSet& world, const MaterialProperties& m,
                        const Wrench& sed, const Twist& t);

}  // namespace depman
