#include "depman/hydro.hpp"

#include <Eigen/Eigenvalues>

#include "depman/errors.hpp"
#include "depman/object.hpp"

namespace depman {

Mat6 ResistanceSet::grand() const {
  Mat6 g;
  g << K, C.transpose(), C, Omega;
  return g;
}

Vec6 Wrench::stacked() const {
  Vec6 s;
  s << F, T;
  return s;
}

ResistanceSet resistance_tensors(std::span<const Element> elements) {
  ResistanceSet rs;
  for (const auto& e : elements) {
    const double a = e.radius;
    const Mat3 rx = skew(e.center);
    rs.K += 6 * kPi * a * Mat3::Identity();
    rs.C += 6 * kPi * a * rx;
    rs.Omega += 8 * kPi * a * a * a * Mat3::Identity() + 6 * kPi * a * rx.transpose() * rx;
  }
  return rs;
}

ResistanceSet resistance_tensors(const ObjectModel& obj) {
  return resistance_tensors(std::span<const Element>(obj.elements));
}

ResistanceSet world_resistance(const ResistanceSet& body, const Pose& pose) {
  const Mat3& R = pose.R;
  return {R * body.K * R.transpose(), R * body.C * R.transpose(),
          R * body.Omega * R.transpose()};
}

Wrench sedimentation(const ObjectModel& obj, const MaterialProperties& m) {
  return {Vec3(0, 0, (m.rho_m - m.rho_o) * obj.volume * kGravity), Vec3::Zero()};
}

namespace {

// Translational and rotational entries differ by ~9 orders of magnitude, so the solve
// runs on the Jacobi-scaled matrix S G S, S = diag(G)^-1/2.
template <int N>
Eigen::Matrix<double, N, 1> spd_solve(const Eigen::Matrix<double, N, N>& G,
                                      const Eigen::Matrix<double, N, 1>& rhs) {
  const Eigen::Array<double, N, 1> d = G.diagonal().array();
  if (!(d > 0).all()) throw NumericalError("resistance matrix has a non-positive diagonal");
  const Eigen::Array<double, N, 1> s = d.rsqrt();
  const Eigen::Matrix<double, N, N> A = s.matrix().asDiagonal() * G * s.matrix().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> eig(A);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo > 1e12)
    throw NumericalError("resistance matrix ill-conditioned (eigenvalues " + std::to_string(lo) +
                         ", " + std::to_string(hi) + ")");
  const Eigen::Matrix<double, N, 1> b = (s * rhs.array()).matrix();
  const Eigen::Matrix<double, N, 1> y =
      eig.eigenvectors() * ((eig.eigenvectors().transpose() * b).array() / eig.eigenvalues().array()).matrix();
  return (s * y.array()).matrix();
}

}  // namespace

Twist mobility_solve(const ResistanceSet& world, const MaterialProperties& m, const Wrench& w) {
  const Vec6 x = spd_solve<6>(world.grand(), w.stacked()) / m.mu;
  return {x.head<3>(), x.tail<3>()};
}

Twist mobility_solve_planar(const ResistanceSet& world, const MaterialProperties& m,
                            const Wrench& w) {
  const Mat6 g = world.grand();
  constexpr int idx[4] = {0, 1, 2, 5};
  Eigen::Matrix4d g4;
  Eigen::Vector4d rhs;
  const Vec6 s = w.stacked();
  for (int a = 0; a < 4; ++a) {
    rhs(a) = s(idx[a]);
    for (int b = 0; b < 4; ++b) g4(a, b) = g(idx[a], idx[b]);
  }
  const Eigen::Vector4d x = spd_solve<4>(g4, rhs) / m.mu;
  return {x.head<3>(), Vec3(0, 0, x(3))};
}

Wrench resistance_wrench(const ResistanceSet& world, const MaterialProperties& m, const Twist& t) {
  Vec6 vw;
  vw << t.v, t.w;
  const Vec6 fw = m.mu * world.grand() * vw;
  return {fw.head<3>(), fw.tail<3>()};
}

}  // namespace depman
