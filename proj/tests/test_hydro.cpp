#include <gtest/gtest.h>

#include <random>

#include "depman/hydro.hpp"
#include "depman/object.hpp"

using namespace depman;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized().toRotationMatrix();
}

}  // namespace

TEST(Resistance, SingleSphere) {
  const double a = 25e-6;
  const Element e{Vec3::Zero(), 4.0 / 3 * kPi * a * a * a, a};
  const ResistanceSet rs = resistance_tensors(std::span<const Element>(&e, 1));
  EXPECT_TRUE(rs.K.isApprox(6 * kPi * a * Mat3::Identity(), 1e-14));
  EXPECT_LT(rs.C.norm(), 1e-30);
  EXPECT_TRUE(rs.Omega.isApprox(8 * kPi * a * a * a * Mat3::Identity(), 1e-14));
}

TEST(Resistance, StokesDragArithmetic) {
  const double a = 25e-6, mu = 0.9078e-3, v = 100e-6;
  const Element e{Vec3::Zero(), 4.0 / 3 * kPi * a * a * a, a};
  MaterialProperties m;
  const ResistanceSet rs = resistance_tensors(std::span<const Element>(&e, 1));
  const Wrench w = resistance_wrench(rs, m, {Vec3(v, 0, 0), Vec3::Zero()});
  EXPECT_NEAR(w.F.x(), 4.2779e-11, 1e-15);  // 6 pi mu a v
  EXPECT_NEAR(w.F.x(), 6 * kPi * mu * a * v, 1e-24);
}

TEST(Resistance, SymmetricFootprintHasNoCoupling) {
  // two perpendicular mirror planes through the origin
  for (const char* name : {"SQUARE", "BAR"}) {
    const ObjectModel obj = build_object(builtin_shape(name), 8);
    EXPECT_LT(obj.body_resistance.C.norm(), 1e-12 * obj.body_resistance.K.norm() * 50e-6) << name;
  }
}

TEST(Resistance, SameVolumeDifferentRotationalTensor) {
  const ObjectModel t = build_object(shape_t(), 1), sz = build_object(shape_sz(), 1);
  EXPECT_NEAR(t.volume, sz.volume, 1e-25);
  // With the origin at the footprint centroid C vanishes for both; the rotational
  // tensor carries the shape difference.
  EXPECT_GT((t.body_resistance.Omega - sz.body_resistance.Omega).norm(), 1e-3 * sz.body_resistance.Omega.norm());
}

TEST(Resistance, GrandMatrixSpdUnderRotation) {
  std::mt19937_64 rng(11);
  for (const char* name : {"SZ", "T", "SQUARE", "BAR"}) {
    const ObjectModel obj = build_object(builtin_shape(name), 8);
    const Eigen::VectorXd ev0 = Eigen::SelfAdjointEigenSolver<Mat3>(obj.body_resistance.K).eigenvalues();
    for (int i = 0; i < 1000; ++i) {
      const Pose p(Vec3::Zero(), random_rotation(rng));
      const ResistanceSet w = world_resistance(obj.body_resistance, p);
      const Mat6 G = w.grand();
      ASSERT_LT((G - G.transpose()).norm(), 1e-12 * G.norm());
      ASSERT_GT(Eigen::SelfAdjointEigenSolver<Mat6>(G).eigenvalues().minCoeff(), 0.0);
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Mat3>(w.K).eigenvalues();
      ASSERT_LT((ev - ev0).norm(), 1e-12 * ev0.norm());
    }
  }
}

TEST(Sedimentation, TableDensities) {
  const ObjectModel obj = build_object(shape_sz(), 1);
  const MaterialProperties m;
  const Wrench s = sedimentation(obj, m);
  EXPECT_NEAR(s.F.z(), (998.0 - 1190.0) * 5e-13 * 9.80665, 1e-22);
  EXPECT_NEAR(s.F.z(), -9.414e-10, 1e-13);
  EXPECT_EQ(s.T.norm(), 0.0);
  MaterialProperties neutral = m;
  neutral.rho_o = neutral.rho_m;
  EXPECT_EQ(sedimentation(obj, neutral).F.norm(), 0.0);
  const ObjectModel big = build_object(ShapeSpec{"8", {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {0, 1}, {1, 1}, {2, 1}, {3, 1}}, 50e-6, 50e-6, {}, 2}, 1);
  EXPECT_NEAR(sedimentation(big, m).F.z(), 2 * s.F.z(), 1e-22);
}

TEST(Mobility, StokesInversionAndRoundTrip) {
  const double a = 25e-6;
  const Element e{Vec3::Zero(), 4.0 / 3 * kPi * a * a * a, a};
  const MaterialProperties m;
  const ResistanceSet rs = resistance_tensors(std::span<const Element>(&e, 1));
  const Twist t = mobility_solve(rs, m, {Vec3(6 * kPi * m.mu * a * 1e-4, 0, 0), Vec3::Zero()});
  EXPECT_NEAR(t.v.x(), 1e-4, 1e-16);
  EXPECT_LT(t.w.norm(), 1e-16);
  const Twist zero = mobility_solve(rs, m, Wrench{});
  EXPECT_EQ(zero.v.norm() + zero.w.norm(), 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const ObjectModel obj = build_object(shape_t(), 8);
  for (int i = 0; i < 200; ++i) {
    const ResistanceSet w = world_resistance(obj.body_resistance, Pose(Vec3::Zero(), random_rotation(rng)));
    const Twist in{1e-4 * Vec3(g(rng), g(rng), g(rng)), Vec3(g(rng), g(rng), g(rng))};
    const Twist out = mobility_solve(w, m, resistance_wrench(w, m, in));
    EXPECT_LT((out.v - in.v).norm(), 1e-10 * in.v.norm());
    EXPECT_LT((out.w - in.w).norm(), 1e-10 * in.w.norm());
  }
}

TEST(Mobility, PlanarSolveKeepsBodyFlat) {
  const ObjectModel obj = build_object(shape_t(), 1);
  const MaterialProperties m;
  const ResistanceSet w = world_resistance(obj.body_resistance, Pose::planar(0, 0, 1e-4, 0.3));
  const Wrench f{Vec3(1e-10, -2e-10, 3e-10), Vec3(1e-15, 2e-15, 3e-15)};
  const Twist t = mobility_solve_planar(w, m, f);
  EXPECT_EQ(t.w.x(), 0.0);
  EXPECT_EQ(t.w.y(), 0.0);
  // the unconstrained rows of the balance hold exactly
  const Wrench back = resistance_wrench(w, m, t);
  EXPECT_LT((back.F - f.F).norm(), 1e-10 * f.F.norm());
  EXPECT_NEAR(back.T.z(), f.T.z(), 1e-10 * f.T.norm());
}
