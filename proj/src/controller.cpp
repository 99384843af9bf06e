#include "depman/controller.hpp"

#include <algorithm>
#include <cmath>

#include "depman/errors.hpp"

namespace depman {

void ControlGains::validate() const {
  if (!(k_v > 0) || !(k_omega > 0)) throw ConfigError("controller gains must be > 0");
  if (!(v_max > 0) || !(w_max > 0)) throw ConfigError("controller saturation limits must be > 0");
}

Twist velocity_refs(const ControlGains& gains, const Pose& measured, const TargetPose& target,
                    int symmetry_order, double z_assumed) {
  const Vec3 r(measured.r.x(), measured.r.y(), z_assumed);
  Twist t;
  t.v = gains.k_v * (target.r_ref - r);
  const double speed = t.v.norm();
  if (speed > gains.v_max) t.v *= gains.v_max / speed;
  const double wz = gains.k_omega * wrap_angle(target.phi_ref, measured.yaw(), symmetry_order);
  t.w = Vec3(0, 0, std::clamp(wz, -gains.w_max, gains.w_max));
  return t;
}

Wrench reference_wrench(const ResistanceSet& world, const MaterialProperties& m,
                        const Wrench& sed, const Twist& t) {
  Wrench w = resistance_wrench(world, m, t);
  w.F -= sed.F;
  w.T -= sed.T;
  return w;
}

}  // namespace depman
