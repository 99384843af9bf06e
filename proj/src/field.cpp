#include "depman/field.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "depman/errors.hpp"

namespace depman {

namespace {

constexpr int kMaxOrder = 6;

std::size_t pow3(int k) {
  std::size_t p = 1;
  for (int i = 0; i < k; ++i) p *= 3;
  return p;
}

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Per order k: for each flat index, the position of its count triple in the
// (m+1)^3 coefficient table and the factor a1! a2! a3!.
struct DenseMap {
  std::vector<int> slot;
  std::vector<double> fact;
};

const DenseMap& dense_map(int k) {
  static const auto maps = [] {
    std::array<DenseMap, kMaxOrder + 1> out;
    constexpr int m = kMaxOrder + 1;
    for (int order = 0; order <= kMaxOrder; ++order) {
      const std::size_t n = pow3(order);
      out[order].slot.resize(n);
      out[order].fact.resize(n);
      for (std::size_t f = 0; f < n; ++f) {
        const auto a = index_counts(f, order);
        out[order].slot[f] = (a[0] * m + a[1]) * m + a[2];
        out[order].fact[f] = factorial(a[0]) * factorial(a[1]) * factorial(a[2]);
      }
    }
    return out;
  }();
  return maps[k];
}

}  // namespace

Tensor::Tensor(int k) : order(k), data(size_for(k)) {}

std::size_t Tensor::size_for(int k) { return pow3(k); }

double Tensor::norm() const {
  double s = 0;
  for (const auto& v : data) s += std::norm(v);
  return std::sqrt(s);
}

std::array<int, 3> index_counts(std::size_t flat, int order) {
  std::array<int, 3> a{0, 0, 0};
  for (int p = 0; p < order; ++p) {
    ++a[flat % 3];
    flat /= 3;
  }
  return a;
}

std::vector<PointSource> ElectrodeBasis::sources(int electrode) const {
  std::vector<PointSource> out;
  for (const auto& node : nodes)
    for (const auto& [e, w] : node.weights)
      if (e == electrode) out.push_back({node.position, w});
  return out;
}

void ElectrodeBasis::validate() const {
  if (n < 2) throw ConfigError("electrode basis needs at least 2 electrodes");
  std::vector<int> count(n, 0);
  for (const auto& node : nodes)
    for (const auto& [e, w] : node.weights) {
      if (e < 0 || e >= n) throw ConfigError("electrode basis node refers to electrode " + std::to_string(e));
      if (w != 0) ++count[e];
    }
  for (int e = 0; e < n; ++e)
    if (count[e] == 0) throw ConfigError("electrode " + std::to_string(e) + " has no sources");
  if (!(scale > 0)) throw ConfigError("electrode basis scale must be > 0");
}

ElectrodeBasis ring_array(const RingArrayGeometry& g) {
  if (g.n_electrodes < 2) throw ConfigError("ring array needs at least 2 electrodes");
  ElectrodeBasis basis;
  basis.n = g.n_electrodes;
  const int ns = std::max(1, g.sources_per_electrode);
  for (int e = 0; e < g.n_electrodes; ++e) {
    const double ang = g.first_angle + 2 * kPi * e / g.n_electrodes;
    const Vec3 radial(std::cos(ang), std::sin(ang), 0);
    const Vec3 tangent(-std::sin(ang), std::cos(ang), 0);
    for (int s = 0; s < ns; ++s) {
      const double t = (s - 0.5 * (ns - 1)) * g.source_spacing;
      basis.nodes.push_back({g.ring_radius * radial + t * tangent, {{e, 1.0}}});
    }
  }
  // potential of electrode 0's own sources at the probe point, per unit scale
  const Vec3 tip = basis.nodes[ns / 2].position;
  const Vec3 probe = tip - g.probe_offset * Vec3(std::cos(g.first_angle), std::sin(g.first_angle), 0);
  double raw = 0;
  for (int s = 0; s < ns; ++s) raw += 1.0 / (4 * kPi * (probe - basis.nodes[s].position).norm());
  basis.scale = 1.0 / raw;
  return basis;
}

namespace {

// Electrode owning the planar point p, or -1 for gaps and outside the annulus.
int pad_owner(const PadArrayGeometry& g, double x, double y) {
  const double rho = std::hypot(x, y);
  if (rho < g.tip_radius || rho > g.outer_radius) return -1;
  const double half = kPi / g.n_electrodes;
  for (int e = 0; e < g.n_electrodes; ++e) {
    const double axis = g.first_angle + 2 * kPi * e / g.n_electrodes;
    const double phi = std::remainder(std::atan2(y, x) - axis, 2 * kPi);
    if (std::abs(phi) >= half) continue;
    return rho * std::sin(half - std::abs(phi)) >= 0.5 * g.gap ? e : -1;
  }
  return -1;
}

}  // namespace

ElectrodeBasis pad_array(const PadArrayGeometry& g) {
  if (g.n_electrodes < 2) throw ConfigError("pad array needs at least 2 electrodes");
  if (!(g.panel > 0) || !(g.tip_radius > 0) || !(g.outer_radius > g.tip_radius) || g.gap < 0)
    throw ConfigError("pad array: need panel > 0, 0 < tip_radius < outer_radius, gap >= 0");
  struct Panel {
    double x, y, side;
    int owner;
  };
  std::vector<Panel> panels;
  // quadtree of square panels: side h inside fine_radius, 2h out to fine_radius + 300 um, 4h beyond
  auto side_for = [&](double x, double y) {
    const double rho = std::hypot(x, y);
    return rho < g.fine_radius ? g.panel : rho < g.fine_radius + 300e-6 ? 2 * g.panel : 4 * g.panel;
  };
  std::function<void(double, double, double)> place = [&](double cx, double cy, double side) {
    if (side > 1.5 * side_for(cx, cy)) {
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) place(cx + (a - 0.5) * side / 2, cy + (b - 0.5) * side / 2, side / 2);
    } else if (int o = pad_owner(g, cx, cy); o >= 0) {
      panels.push_back({cx, cy, side, o});
    }
  };
  const double top = 4 * g.panel;
  const int cells = static_cast<int>(std::ceil(g.outer_radius / top));
  for (int i = -cells; i < cells; ++i)
    for (int j = -cells; j < cells; ++j) place((i + 0.5) * top, (j + 0.5) * top, top);
  const int np = static_cast<int>(panels.size());
  // collocation at panel centres; self term is the centre potential of a uniform square
  const double self = 4 * std::log(1 + std::sqrt(2.0)) / (4 * kPi);
  Eigen::MatrixXd A(np, np);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(np, g.n_electrodes);
  for (int p = 0; p < np; ++p) {
    rhs(p, panels[p].owner) = 1.0;
    for (int q = 0; q < np; ++q)
      A(p, q) = p == q ? self / panels[p].side
                       : 1.0 / (4 * kPi * std::hypot(panels[p].x - panels[q].x, panels[p].y - panels[q].y));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalError("pad array collocation matrix is not positive definite");
  const Eigen::MatrixXd w = llt.solve(rhs);

  ElectrodeBasis basis;
  basis.n = g.n_electrodes;
  basis.nodes.reserve(np);
  for (int p = 0; p < np; ++p) {
    ElectrodeBasis::Node node{Vec3(panels[p].x, panels[p].y, 0), {}};
    for (int e = 0; e < g.n_electrodes; ++e) node.weights.emplace_back(e, w(p, e));
    basis.nodes.push_back(std::move(node));
  }
  return basis;
}

ElectrodeBasis quadrupole_basis() { return pad_array(PadArrayGeometry{}); }

void basis_grad_hess(const ElectrodeBasis& basis, const Vec3& x, BasisGradHess& out) {
  const int n = basis.n_electrodes();
  // per electrode: sum w d / r^3 (3), sum w d d^T / r^5 (6), sum w / r^3
  thread_local std::vector<double> acc;
  acc.assign(10 * n, 0.0);
  const double clear2 = basis.min_clearance * basis.min_clearance;
  for (const auto& node : basis.nodes) {
    const Vec3 d = x - node.position;
    const double r2 = d.squaredNorm();
    if (r2 < clear2) throw FieldDomainError("evaluation point within clearance of an electrode source");
    const double inv_r = 1.0 / std::sqrt(r2);
    const double inv_r3 = inv_r * inv_r * inv_r;
    const double inv_r5 = inv_r3 * inv_r * inv_r;
    const double t[10] = {inv_r3 * d.x(), inv_r3 * d.y(), inv_r3 * d.z(),
                          inv_r5 * d.x() * d.x(), inv_r5 * d.x() * d.y(), inv_r5 * d.x() * d.z(),
                          inv_r5 * d.y() * d.y(), inv_r5 * d.y() * d.z(), inv_r5 * d.z() * d.z(),
                          inv_r3};
    for (const auto& [e, w] : node.weights) {
      double* a = &acc[10 * e];
      for (int k = 0; k < 10; ++k) a[k] += w * t[k];
    }
  }
  out.grad.resize(n);
  out.hess.resize(n);
  const double c = basis.scale / (4 * kPi);
  for (int e = 0; e < n; ++e) {
    const double* a = &acc[10 * e];
    out.grad[e] = -c * Vec3(a[0], a[1], a[2]);
    Mat3 h;
    h << 3 * a[3] - a[9], 3 * a[4], 3 * a[5],
         3 * a[4], 3 * a[6] - a[9], 3 * a[7],
         3 * a[5], 3 * a[7], 3 * a[8] - a[9];
    out.hess[e] = c * h;
  }
}

std::vector<FieldDerivatives> basis_derivatives(const ElectrodeBasis& basis, const Vec3& x,
                                                int max_order) {
  if (max_order < 1 || max_order > kMaxOrder)
    throw std::invalid_argument("max_order must be in 1..6, got " + std::to_string(max_order));
  constexpr int m = kMaxOrder + 1;
  constexpr int cube = m * m * m;
  const double clear2 = basis.min_clearance * basis.min_clearance;
  const int ne = basis.n_electrodes();
  auto at = [](int a, int b, int c) { return (a * m + b) * m + c; };
  std::vector<int> active;  // coefficient slots with a+b+c <= max_order
  for (int n = 0; n <= max_order; ++n)
    for (int a = n; a >= 0; --a)
      for (int b = n - a; b >= 0; --b) active.push_back(at(a, b, n - a - b));
  // Taylor coefficients T_a = (1/a!) d^a (1/r):
  //   n r^2 T_a = -(2n-1) sum_i d_i T_{a-e_i} - (n-1) sum_i T_{a-2e_i}
  std::vector<double> coeff(cube);
  std::vector<double> acc(static_cast<std::size_t>(ne) * cube, 0.0);
  for (const auto& node : basis.nodes) {
    const Vec3 d = x - node.position;
    const double r2 = d.squaredNorm();
    if (r2 < clear2) throw FieldDomainError("evaluation point within clearance of an electrode source");
    coeff[at(0, 0, 0)] = 1.0 / std::sqrt(r2);
    for (int n = 1; n <= max_order; ++n) {
      for (int a = n; a >= 0; --a) {
        for (int b = n - a; b >= 0; --b) {
          const int c = n - a - b;
          double first = 0, second = 0;
          if (a > 0) first += d.x() * coeff[at(a - 1, b, c)];
          if (b > 0) first += d.y() * coeff[at(a, b - 1, c)];
          if (c > 0) first += d.z() * coeff[at(a, b, c - 1)];
          if (a > 1) second += coeff[at(a - 2, b, c)];
          if (b > 1) second += coeff[at(a, b - 2, c)];
          if (c > 1) second += coeff[at(a, b, c - 2)];
          coeff[at(a, b, c)] = (-(2 * n - 1) * first - (n - 1) * second) / (n * r2);
        }
      }
    }
    for (const auto& [e, w] : node.weights) {
      double* dst = &acc[static_cast<std::size_t>(e) * cube];
      for (int s : active) dst[s] += w * coeff[s];
    }
  }
  const double c = basis.scale / (4 * kPi);
  std::vector<FieldDerivatives> out;
  out.reserve(ne);
  for (int e = 0; e < ne; ++e) {
    const double* src = &acc[static_cast<std::size_t>(e) * cube];
    FieldDerivatives f;
    f.point = x;
    f.potential = c * src[0];
    f.d.reserve(max_order);
    for (int k = 1; k <= max_order; ++k) {
      const DenseMap& map = dense_map(k);
      Tensor t(k);
      for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = c * map.fact[i] * src[map.slot[i]];
      f.d.push_back(std::move(t));
    }
    out.push_back(std::move(f));
  }
  return out;
}

FieldDerivatives superpose(std::span<const FieldDerivatives> basis_fields,
                           std::span<const cplx> u) {
  if (basis_fields.size() != u.size() || basis_fields.empty())
    throw std::invalid_argument("superpose: " + std::to_string(basis_fields.size()) +
                                " basis fields vs " + std::to_string(u.size()) + " phasors");
  FieldDerivatives out;
  out.point = basis_fields[0].point;
  const int mo = basis_fields[0].max_order();
  for (const auto& b : basis_fields)
    if (b.max_order() != mo) throw std::invalid_argument("superpose: mixed derivative orders");
  for (int k = 1; k <= mo; ++k) out.d.emplace_back(k);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.potential += u[i] * basis_fields[i].potential;
    for (int k = 0; k < mo; ++k) {
      auto& dst = out.d[k].data;
      const auto& src = basis_fields[i].d[k].data;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += u[i] * src[j];
    }
  }
  return out;
}

Tensor rotate_tensor(const Tensor& t, const Mat3& R) {
  Tensor cur = t;
  Tensor next(t.order);
  const std::size_t n = cur.data.size();
  for (int p = 0; p < t.order; ++p) {
    const std::size_t stride = pow3(t.order - 1 - p);
    for (std::size_t f = 0; f < n; ++f) {
      const std::size_t digit = (f / stride) % 3;
      const std::size_t base = f - digit * stride;
      next.data[f] = R(digit, 0) * cur.data[base] + R(digit, 1) * cur.data[base + stride] +
                     R(digit, 2) * cur.data[base + 2 * stride];
    }
    std::swap(cur.data, next.data);
  }
  return cur;
}

FieldDerivatives rotate_derivatives(const FieldDerivatives& f, const Mat3& R) {
  FieldDerivatives out;
  out.point = f.point;
  out.potential = f.potential;
  out.d.reserve(f.d.size());
  for (const auto& t : f.d) out.d.push_back(rotate_tensor(t, R));
  return out;
}

}  // namespace depman
