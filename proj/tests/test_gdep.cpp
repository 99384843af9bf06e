#include <gtest/gtest.h>

#include <omp.h>

#include <random>

#include "depman/gdep.hpp"
#include "depman/inverter.hpp"
#include "depman/object.hpp"

using namespace depman;

namespace {

const MaterialProperties kM{};

ObjectModel single_element() { return build_object(ShapeSpec{"ONE", {{0, 0}}, 20e-6, 20e-6, {}, 4}, 1); }

std::vector<cplx> random_u(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> d(0, 359);
  std::vector<int> ph(n);
  for (auto& p : ph) p = d(rng);
  return PhasorVector(ph).phasors();
}

Pose random_pose(std::mt19937_64& rng, double radius = 150e-6) {
  std::uniform_real_distribution<double> u(0, 1);
  const double r = radius * std::sqrt(u(rng)), th = 2 * kPi * u(rng);
  return Pose::planar(r * std::cos(th), r * std::sin(th), 60e-6 + 80e-6 * u(rng), 2 * kPi * u(rng));
}

// Independent dipole oracle on the superposed total field: E = -grad phi,
// F = 1/2 Re[alpha (E . grad) E*], T = 1/2 Re[alpha E x E*] at an element on the origin.
Wrench dipole_oracle(const ElectrodeBasis& basis, const Vec3& x, const std::vector<cplx>& u, cplx alpha) {
  const FieldDerivatives f = superpose(basis_derivatives(basis, x, 2), u);
  Eigen::Vector3cd E;
  Eigen::Matrix3cd dE;  // dE(i, j) = d_j E_i
  for (int i = 0; i < 3; ++i) {
    E[i] = -f.order(1)[i];
    for (int j = 0; j < 3; ++j) dE(i, j) = -f.order(2)[3 * i + j];
  }
  Wrench w;
  for (int i = 0; i < 3; ++i) {
    cplx s = 0;
    for (int j = 0; j < 3; ++j) s += E[j] * std::conj(dE(i, j));
    w.F[i] = 0.5 * (alpha * s).real();
  }
  // explicit cross product: Eigen's conjugates complex results
  const Eigen::Vector3cd Ec = E.conjugate();
  const Eigen::Vector3cd exe(E[1] * Ec[2] - E[2] * Ec[1], E[2] * Ec[0] - E[0] * Ec[2], E[0] * Ec[1] - E[1] * Ec[0]);
  w.T = 0.5 * (alpha * exe).real();
  return w;
}

double rel(const Wrench& a, const Wrench& b, double L) {
  Vec6 x, y;
  x << a.F, a.T / L;
  y << b.F, b.T / L;
  return (x - y).norm() / y.norm();
}

}  // namespace

TEST(Forms, SingleElementMatchesTotalFieldOracle) {
  const ObjectModel obj = single_element();
  const ElectrodeBasis basis = quadrupole_basis();
  const cplx alpha = element_polarizability(kM, obj.elements[0].volume);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    const auto u = random_u(rng, 4);
    const Wrench f = eval_wrench(assemble_forms(obj, p, basis, kM), u);
    const Wrench o = dipole_oracle(basis, p.r, u, alpha);
    EXPECT_LT((f.F - o.F).norm(), 1e-10 * o.F.norm());
    EXPECT_LT((f.T - o.T).norm(), 1e-10 * o.T.norm() + 1e-30);
  }
}

TEST(Forms, ObjectMatchesDirectSum) {
  const ObjectModel obj = build_object(shape_sz(), 8);
  const ElectrodeBasis basis = quadrupole_basis();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    const Pose p = random_pose(rng);
    const auto u = random_u(rng, 4);
    const Wrench f = eval_wrench(assemble_forms(obj, p, basis, kM), u);
    const Wrench d = direct_wrench(obj, p, basis, kM, u);
    EXPECT_LT((f.F - d.F).norm(), 1e-12 * d.F.norm());
    EXPECT_LT((f.T - d.T).norm(), 1e-12 * d.T.norm());
  }
}

TEST(Forms, HermitianAndGaugeInvariant) {
  const ObjectModel obj = build_object(shape_t(), 1);
  const ElectrodeBasis basis = quadrupole_basis();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> th(0, 2 * kPi);
  for (int i = 0; i < 100; ++i) {
    const WrenchFormSet forms = assemble_forms(obj, random_pose(rng), basis, kM);
    EXPECT_LT(forms.hermitian_defect(), 1e-12);
    const auto u = random_u(rng, 4);
    const Wrench w = eval_wrench(forms, u);
    for (int k = 0; k < 5; ++k) {
      auto v = u;
      const cplx g = std::polar(1.0, th(rng));
      for (auto& x : v) x *= g;
      const Wrench wv = eval_wrench(forms, v);
      EXPECT_LT((wv.F - w.F).norm(), 1e-13 * w.F.norm());
      EXPECT_LT((wv.T - w.T).norm(), 1e-13 * w.T.norm());
    }
    // u^H M u is real: the imaginary part of the raw quadratic form vanishes
    const Eigen::Map<const CVec> uv(u.data(), 4);
    for (int a = 0; a < 3; ++a) {
      const cplx q = uv.dot(forms.P[a] * uv);
      EXPECT_LT(std::abs(q.imag()), 1e-12 * std::abs(q) + 1e-30);
    }
  }
}

TEST(Forms, ZeroAndSymmetricDrive) {
  const ObjectModel obj = build_object(shape_sz(), 1);
  const WrenchFormSet forms = assemble_forms(obj, Pose::planar(0, 0, 100e-6, 0), quadrupole_basis(), kM);
  const Wrench z = eval_wrench(forms, std::vector<cplx>(4, 0.0));
  EXPECT_EQ(z.F.norm() + z.T.norm(), 0.0);
  const Wrench eq = eval_wrench(forms, PhasorVector({0, 0, 0, 0}).phasors());
  const Wrench rot = eval_wrench(forms, PhasorVector({0, 90, 180, 270}).phasors());
  EXPECT_LT(eq.F.head<2>().norm(), 1e-12 * eq.F.norm());
  // in-phase drive has no rotating field: only the real part of the torque forms acts
  WrenchFormSet re = forms;
  for (int k = 0; k < 3; ++k) re.Q[k] = forms.Q[k].real().cast<cplx>();
  EXPECT_LT((eval_wrench(re, PhasorVector({0, 0, 0, 0}).phasors()).T - eq.T).norm(), 1e-12 * rot.T.norm());
}

TEST(Forms, ReversedSequenceFlipsRotationTorque) {
  const ElectrodeBasis basis = quadrupole_basis();
  const auto fwd = PhasorVector({0, 90, 180, 270}).phasors(), rev = PhasorVector({0, 270, 180, 90}).phasors();
  // a four-fold symmetric body at the centre: exact flip
  const ObjectModel sq = build_object(builtin_shape("SQUARE"), 1);
  const WrenchFormSet fs = assemble_forms(sq, Pose::planar(0, 0, 100e-6, 0), basis, kM);
  const double a = eval_wrench(fs, fwd).T.z(), b = eval_wrench(fs, rev).T.z();
  EXPECT_GT(std::abs(a), 1e-15);
  EXPECT_NEAR(a, -b, 1e-9 * std::abs(a));
  // chiral S/Z: sign flips; the sum is twice the torque of the real (orientation) part
  const ObjectModel sz = build_object(shape_sz(), 1);
  const WrenchFormSet f = assemble_forms(sz, Pose::planar(0, 0, 100e-6, 0), basis, kM);
  WrenchFormSet re = f;
  for (int k = 0; k < 3; ++k) re.Q[k] = f.Q[k].real().cast<cplx>();
  const Wrench wf = eval_wrench(f, fwd), wr = eval_wrench(f, rev);
  EXPECT_LT(wf.T.z() * wr.T.z(), 0.0);
  EXPECT_LT((wf.T + wr.T - 2 * eval_wrench(re, fwd).T).norm(), 1e-12 * wf.T.norm());
}

TEST(Forms, FrameEquivariance) {
  const ObjectModel obj = build_object(shape_t(), 1);
  const ElectrodeBasis basis = ring_array({});
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20; ++i) {
    const Mat3 R = Eigen::AngleAxisd(std::uniform_real_distribution<double>(0, 3)(rng),
                                     Vec3(0.3, -0.5, 1).normalized()).toRotationMatrix();
    ElectrodeBasis rb = basis;
    for (auto& n : rb.nodes) n.position = R * n.position;
    const Pose p = random_pose(rng, 100e-6);
    const Pose rp(R * p.r, R * p.R);
    const auto u = random_u(rng, 4);
    const Wrench w = eval_wrench(assemble_forms(obj, p, basis, kM), u);
    const Wrench wr = eval_wrench(assemble_forms(obj, rp, rb, kM), u);
    EXPECT_LT((R.transpose() * wr.F - w.F).norm(), 1e-9 * w.F.norm());
    EXPECT_LT((R.transpose() * wr.T - w.T).norm(), 1e-9 * w.T.norm());
  }
}

TEST(Forms, ParallelMatchesSerialBitwise) {
  const ObjectModel obj = build_object(shape_sz(), 27);
  const ElectrodeBasis basis = quadrupole_basis();
  const Pose p = Pose::planar(30e-6, -40e-6, 90e-6, 0.4);
  const WrenchFormSet s = assemble_forms_serial(obj, p, basis, kM);
  for (int threads : {1, 2, 3, 4}) {
    omp_set_num_threads(threads);
    const WrenchFormSet f = assemble_forms(obj, p, basis, kM);
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ((f.P[a] - s.P[a]).norm(), 0.0) << threads;
      EXPECT_EQ((f.Q[a] - s.Q[a]).norm(), 0.0) << threads;
    }
  }
}

TEST(Multipole, SingleElementAtOrigin) {
  const ObjectModel obj = single_element();
  const ElectrodeBasis basis = quadrupole_basis();
  const Pose p = Pose::planar(20e-6, 10e-6, 90e-6, 0.2);
  const auto fields = basis_derivatives(basis, p.r, 6);
  const MultipoleSet mp = multipole_moments(obj, p, fields, kM, 5);
  for (int e = 0; e < 4; ++e)
    for (int k = 2; k <= 5; ++k) EXPECT_EQ(mp.moments[e][k - 1].norm(), 0.0);
  std::mt19937_64 rng(14);
  const auto u = random_u(rng, 4);
  const Wrench direct = eval_wrench(assemble_forms(obj, p, basis, kM), u);
  const MultipoleSet m1 = multipole_moments(obj, p, fields, kM, 1);
  const Wrench w1 = eval_wrench_multipole(m1, superpose(fields, u), p, u);
  EXPECT_LT((w1.F - direct.F).norm(), 1e-12 * direct.F.norm());
  EXPECT_LT((w1.T - direct.T).norm(), 1e-12 * direct.T.norm());
  EXPECT_THROW(multipole_moments(obj, p, fields, kM, 6), std::invalid_argument);
}

TEST(Multipole, ConvergesTowardsDirectSum) {
  const ObjectModel obj = build_object(shape_sz(), 8);
  const ElectrodeBasis basis = quadrupole_basis();
  const double L = obj.footprint_radius();
  std::mt19937_64 rng(15);
  int monotone = 0;
  const int n = 30;
  for (int i = 0; i < n; ++i) {
    const Pose p = random_pose(rng);
    const auto u = random_u(rng, 4);
    const Wrench d = eval_wrench(assemble_forms(obj, p, basis, kM), u);
    double prev = 1e9;
    bool mono = true;
    for (int order = 1; order <= 5; ++order) {
      const double e = rel(eval_wrench(assemble_forms_multipole(obj, p, basis, kM, order), u), d, L);
      mono = mono && e <= prev;
      prev = e;
    }
    monotone += mono;
    EXPECT_LT(prev, 0.02);
  }
  EXPECT_GE(monotone, 0.8 * n);
}
