#pragma once

#include <vector>

#include "depman/geometry.hpp"
#include "depman/hydro.hpp"
#include "depman/materials.hpp"

namespace depman {

struct Element {
  Vec3 center;    // body frame, m
  double volume;  // m^3
  double radius;  // volume-equivalent sphere radius, m
};

struct ObjectModel {
  ShapeSpec shape;
  std::vector<Element> elements;
  double volume = 0.0;
  MaterialProperties material;
  ResistanceSet body_resistance;

  /// Outer boundary of the footprint as body-frame segments (z = 0 plane).
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> outline() const;
  bool footprint_contains(const Eigen::Vector2d& body_xy) const;
  /// Largest in-plane distance of any footprint corner from the origin.
  double footprint_radius() const;
};

/// Tiles the extruded footprint with k^3 sub-boxes per cell (elements_per_cell = k^3).
/// Throws std::invalid_argument for a bad element count, a disconnected or empty
/// footprint, or a reference point away from the footprint centroid.
ObjectModel build_object(const ShapeSpec& shape, int elements_per_cell,
                         const MaterialProperties& material = {});

}  // namespace depman
