#include "depman/object.hpp"

#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

namespace depman {

namespace {

void check_footprint(const ShapeSpec& shape) {
  if (shape.cells.empty()) throw std::invalid_argument("shape '" + shape.name + "': no cells");
  if (!(shape.cell_size > 0) || !(shape.thickness > 0))
    throw std::invalid_argument("shape '" + shape.name + "': cell_size and thickness must be > 0");
  std::set<std::pair<int, int>> cells(shape.cells.begin(), shape.cells.end());
  if (cells.size() != shape.cells.size())
    throw std::invalid_argument("shape '" + shape.name + "': duplicate cells");

  std::set<std::pair<int, int>> seen{shape.cells.front()};
  std::queue<std::pair<int, int>> todo;
  todo.push(shape.cells.front());
  while (!todo.empty()) {
    auto [i, j] = todo.front();
    todo.pop();
    for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      std::pair<int, int> nb{i + di, j + dj};
      if (cells.count(nb) && seen.insert(nb).second) todo.push(nb);
    }
  }
  if (seen.size() != cells.size())
    throw std::invalid_argument("shape '" + shape.name + "': footprint is not 4-connected (" +
                                std::to_string(seen.size()) + " of " +
                                std::to_string(cells.size()) + " cells reachable)");
}

int cube_root_exact(int n) {
  for (int k = 1; k * k * k <= n; ++k)
    if (k * k * k == n) return k;
  return 0;
}

}  // namespace

ObjectModel build_object(const ShapeSpec& shape, int elements_per_cell,
                         const MaterialProperties& material) {
  check_footprint(shape);
  const int k = elements_per_cell > 0 ? cube_root_exact(elements_per_cell) : 0;
  if (k == 0)
    throw std::invalid_argument("elements_per_cell must be a perfect cube (1, 8, 27, ...), got " +
                                std::to_string(elements_per_cell));

  const auto [cx, cy] = shape.centroid();
  if (!shape.reference_point.empty()) {
    if (shape.reference_point.size() != 2 ||
        std::hypot(shape.reference_point[0] - cx, shape.reference_point[1] - cy) > 1e-9)
      throw std::invalid_argument("shape '" + shape.name +
                                  "': reference point must be the footprint centroid");
  }

  ObjectModel obj;
  obj.shape = shape;
  obj.material = material;
  const double h = shape.cell_size / k;
  const double hz = shape.thickness / k;
  const double v = h * h * hz;
  const double radius = std::cbrt(3.0 * v / (4.0 * kPi));
  obj.elements.reserve(shape.cells.size() * k * k * k);
  for (auto [ci, cj] : shape.cells) {
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        for (int c = 0; c < k; ++c) {
          Vec3 center((ci - cx) * shape.cell_size + (a + 0.5) * h,
                      (cj - cy) * shape.cell_size + (b + 0.5) * h,
                      -0.5 * shape.thickness + (c + 0.5) * hz);
          obj.elements.push_back({center, v, radius});
        }
  }
  obj.volume = static_cast<double>(shape.cells.size()) * shape.cell_size * shape.cell_size *
               shape.thickness;
  obj.body_resistance = resistance_tensors(obj);
  return obj;
}

std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> ObjectModel::outline() const {
  const auto [cx, cy] = shape.centroid();
  const double s = shape.cell_size;
  std::set<std::pair<int, int>> cells(shape.cells.begin(), shape.cells.end());
  auto pt = [&](int i, int j) { return Eigen::Vector2d((i - cx) * s, (j - cy) * s); };
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> segs;
  for (auto [i, j] : shape.cells) {
    if (!cells.count({i, j - 1})) segs.emplace_back(pt(i, j), pt(i + 1, j));
    if (!cells.count({i + 1, j})) segs.emplace_back(pt(i + 1, j), pt(i + 1, j + 1));
    if (!cells.count({i, j + 1})) segs.emplace_back(pt(i + 1, j + 1), pt(i, j + 1));
    if (!cells.count({i - 1, j})) segs.emplace_back(pt(i, j + 1), pt(i, j));
  }
  return segs;
}

bool ObjectModel::footprint_contains(const Eigen::Vector2d& p) const {
  const auto [cx, cy] = shape.centroid();
  const double fx = p.x() / shape.cell_size + cx;
  const double fy = p.y() / shape.cell_size + cy;
  const int i = static_cast<int>(std::floor(fx));
  const int j = static_cast<int>(std::floor(fy));
  for (auto [ci, cj] : shape.cells)
    if (ci == i && cj == j) return true;
  return false;
}

double ObjectModel::footprint_radius() const {
  double r = 0;
  for (const auto& [a, b] : outline()) r = std::max({r, a.norm(), b.norm()});
  return r;
}

}  // namespace depman
