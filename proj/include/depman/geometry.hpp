#pragma once

#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace depman {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

/// Rigid-body pose: position of the body origin and world<-body rotation.
struct Pose {
  Vec3 r = Vec3::Zero();
  Mat3 R = Mat3::Identity();

  Pose() = default;
  Pose(const Vec3& position, const Mat3& rotation) : r(position), R(rotation) {}

  /// Planar pose helper: position plus yaw about +z.
  static Pose planar(double x, double y, double z, double yaw);

  // Z-Y-X Euler angles, reporting only. Yaw is in (-pi, pi].
  double yaw() const;
  double pitch() const;
  double roll() const;
};

/// Extruded footprint of orthogonal cells; (i, j) cell covers [i, i+1] x [j, j+1]
/// in units of cell_size.
struct ShapeSpec {
  std::string name;
  std::vector<std::pair<int, int>> cells;
  double cell_size = 50e-6;
  double thickness = 50e-6;
  // Footprint coordinates (cell units). Empty means area centroid.
  std::vector<double> reference_point;
  int symmetry_order = 1;

  std::pair<double, double> centroid() const;
};

ShapeSpec shape_sz();
ShapeSpec shape_t();
/// Built-in shapes by name ("SZ", "T", "SQUARE", "BAR"); throws std::invalid_argument.
ShapeSpec builtin_shape(const std::string& name);

/// Signed shortest difference target - current in (-pi/n, pi/n], n = symmetry order.
double wrap_angle(double target, double current, int symmetry_order = 1);

/// R' = exp([axis_angle]x) R, re-orthonormalized.
Pose rotate_pose(const Pose& pose, const Vec3& axis_angle);

Mat3 skew(const Vec3& v);
Mat3 rot_z(double angle);

}  // namespace depman
