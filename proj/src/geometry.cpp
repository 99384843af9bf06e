#include "depman/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

namespace depman {

Pose Pose::planar(double x, double y, double z, double yaw) {
  return Pose(Vec3(x, y, z), rot_z(yaw));
}

double Pose::yaw() const {
  double phi = std::atan2(R(1, 0), R(0, 0));
  return phi <= -kPi ? phi + 2 * kPi : phi;
}

double Pose::pitch() const { return -std::asin(std::clamp(R(2, 0), -1.0, 1.0)); }

double Pose::roll() const { return std::atan2(R(2, 1), R(2, 2)); }

std::pair<double, double> ShapeSpec::centroid() const {
  double sx = 0, sy = 0;
  for (auto [i, j] : cells) {
    sx += i + 0.5;
    sy += j + 0.5;
  }
  const double n = static_cast<double>(cells.size());
  return {sx / n, sy / n};
}

ShapeSpec shape_sz() {
  return ShapeSpec{"SZ", {{0, 0}, {1, 0}, {1, 1}, {2, 1}}, 50e-6, 50e-6, {}, 2};
}

ShapeSpec shape_t() {
  return ShapeSpec{"T", {{0, 0}, {1, 0}, {2, 0}, {1, 1}}, 50e-6, 50e-6, {}, 1};
}

ShapeSpec builtin_shape(const std::string& name) {
  if (name == "SZ") return shape_sz();
  if (name == "T") return shape_t();
  if (name == "SQUARE") return ShapeSpec{"SQUARE", {{0, 0}, {1, 0}, {0, 1}, {1, 1}}, 50e-6, 50e-6, {}, 4};
  if (name == "BAR") return ShapeSpec{"BAR", {{0, 0}, {1, 0}, {2, 0}}, 50e-6, 50e-6, {}, 2};
  throw std::invalid_argument("unknown built-in shape '" + name + "'");
}

double wrap_angle(double target, double current, int symmetry_order) {
  const double period = 2 * kPi / std::max(1, symmetry_order);
  const double half = period / 2;
  double m = std::fmod(half - (target - current), period);
  if (m < 0) m += period;
  return half - m;
}

Pose rotate_pose(const Pose& pose, const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  Mat3 step = Mat3::Identity();
  if (angle > 0) step = Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
  Eigen::Quaterniond q(step * pose.R);
  q.normalize();
  return Pose(pose.r, q.toRotationMatrix());
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return s;
}

Mat3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace depman
