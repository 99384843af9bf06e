#include "depman/gdep.hpp"

#include <algorithm>
#include <stdexcept>

#include <omp.h>

#include "depman/errors.hpp"

namespace depman {

namespace {

// Elements per reduction block; fixed so the summation order is thread-count independent.
constexpr std::size_t kBlock = 4;

struct FormAccum {
  std::array<CMat, 3> P;
  std::array<CMat, 3> Q;

  explicit FormAccum(int n) {
    for (int a = 0; a < 3; ++a) {
      P[a] = CMat::Zero(n, n);
      Q[a] = CMat::Zero(n, n);
    }
  }
  void add(const FormAccum& o) {
    for (int a = 0; a < 3; ++a) {
      P[a] += o.P[a];
      Q[a] += o.Q[a];
    }
  }
};

// Plain cross product; Eigen conjugates the result for complex operands.
template <class A, class B>
Eigen::Vector3cd cross(const A& a, const B& b) {
  return Eigen::Vector3cd(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
                          a(0) * b(1) - a(1) * b(0));
}

struct ElementScratch {
  BasisGradHess gh;
  std::vector<Vec3> E;
  std::vector<Mat3> J;
};

// Kernel of one element. With E_i the field of electrode i (1 V) and
// J_j[a][b] = d_b E_{j,a}, the element force is 1/2 Re[alpha sum u_i conj(u_j) J_j E_i];
// as u^H M u that is M = (alpha H^T + conj(alpha) H) / 4 with H_ij = J_j E_i.
void accumulate_element(const Element& el, const Pose& pose, cplx alpha,
                        const ElectrodeBasis& basis, ElementScratch& s, FormAccum& acc) {
  const Vec3 offset = pose.R * el.center;
  basis_grad_hess(basis, pose.r + offset, s.gh);
  const int n = basis.n_electrodes();
  s.E.resize(n);
  s.J.resize(n);
  for (int i = 0; i < n; ++i) {
    s.E[i] = -s.gh.grad[i];
    s.J[i] = -s.gh.hess[i];
  }
  const cplx rot = 0.25 * (std::conj(alpha) - alpha);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const Vec3 hij = s.J[j] * s.E[i];
      const Vec3 hji = s.J[i] * s.E[j];
      // M_ij and M_ji; the pair is Hermitian by construction.
      Eigen::Vector3cd fij = 0.25 * (alpha * hji.cast<cplx>() + std::conj(alpha) * hij.cast<cplx>());
      Eigen::Vector3cd fji = 0.25 * (alpha * hij.cast<cplx>() + std::conj(alpha) * hji.cast<cplx>());
      const Vec3 x = s.E[i].cross(s.E[j]);
      const Eigen::Vector3cd tij = rot * x.cast<cplx>() + cross(offset, fij);
      for (int a = 0; a < 3; ++a) {
        acc.P[a](i, j) += fij(a);
        acc.Q[a](i, j) += tij(a);
        if (j != i) {
          const Eigen::Vector3cd tji = -rot * x.cast<cplx>() + cross(offset, fji);
          acc.P[a](j, i) += fji(a);
          acc.Q[a](j, i) += tji(a);
        }
      }
    }
  }
}

WrenchFormSet finish(const Pose& pose, FormAccum& acc) {
  WrenchFormSet out;
  out.pose = pose;
  for (int a = 0; a < 3; ++a) {
    out.P[a] = 0.5 * (acc.P[a] + acc.P[a].adjoint());
    out.Q[a] = 0.5 * (acc.Q[a] + acc.Q[a].adjoint());
  }
  return out;
}

}  // namespace

double WrenchFormSet::hermitian_defect() const {
  double worst = 0;
  for (const auto* set : {&P, &Q})
    for (const auto& M : *set) {
      const double nm = M.norm();
      if (nm > 0) worst = std::max(worst, (M - M.adjoint()).norm() / nm);
    }
  return worst;
}

WrenchFormSet assemble_forms_serial(const ObjectModel& obj, const Pose& pose,
                                    const ElectrodeBasis& basis, const MaterialProperties& m) {
  const int n = basis.n_electrodes();
  // Same block partial sums as the parallel path, so the two agree bitwise.
  FormAccum acc(n);
  ElementScratch scratch;
  const std::size_t n_el = obj.elements.size();
  for (std::size_t b = 0; b < n_el; b += kBlock) {
    FormAccum block(n);
    for (std::size_t e = b; e < std::min(n_el, b + kBlock); ++e) {
      const Element& el = obj.elements[e];
      accumulate_element(el, pose, element_polarizability(m, el.volume), basis, scratch, block);
    }
    if (b == 0) acc = std::move(block); else acc.add(block);
  }
  return finish(pose, acc);
}

WrenchFormSet assemble_forms(const ObjectModel& obj, const Pose& pose,
                             const ElectrodeBasis& basis, const MaterialProperties& m) {
  const int n = basis.n_electrodes();
  const std::size_t n_el = obj.elements.size();
  const std::size_t n_blocks = (n_el + kBlock - 1) / kBlock;
  if (n_blocks <= 1) return assemble_forms_serial(obj, pose, basis, m);

  std::vector<FormAccum> partial(n_blocks, FormAccum(n));
  bool failed = false;
  std::string what;
#pragma omp parallel
  {
    ElementScratch scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
      try {
        const std::size_t end = std::min(n_el, (b + 1) * kBlock);
        for (std::size_t e = b * kBlock; e < end; ++e) {
          const Element& el = obj.elements[e];
          accumulate_element(el, pose, element_polarizability(m, el.volume), basis, scratch, partial[b]);
        }
      } catch (const std::exception& ex) {
#pragma omp critical
        {
          failed = true;
          what = ex.what();
        }
      }
    }
  }
  if (failed) throw FieldDomainError(what);
  for (std::size_t b = 1; b < n_blocks; ++b) partial[0].add(partial[b]);
  return finish(pose, partial[0]);
}

Wrench eval_wrench(const WrenchFormSet& forms, std::span<const cplx> u) {
  const int n = forms.n();
  if (static_cast<int>(u.size()) != n)
    throw std::invalid_argument("eval_wrench: phasor length " + std::to_string(u.size()) +
                                " vs " + std::to_string(n) + " electrodes");
  Wrench w;
  auto quad = [&](const CMat& M) {
    double s = 0;
    for (int p = 0; p < n; ++p) {
      s += M(p, p).real() * std::norm(u[p]);
      cplx row{};
      for (int q = p + 1; q < n; ++q) row += M(p, q) * u[q];
      s += 2.0 * (std::conj(u[p]) * row).real();
    }
    return s;
  };
  for (int a = 0; a < 3; ++a) {
    w.F(a) = quad(forms.P[a]);
    w.T(a) = quad(forms.Q[a]);
  }
  return w;
}

Wrench direct_wrench(const ObjectModel& obj, const Pose& pose, const ElectrodeBasis& basis,
                     const MaterialProperties& m, std::span<const cplx> u) {
  if (static_cast<int>(u.size()) != basis.n_electrodes())
    throw std::invalid_argument("direct_wrench: phasor length mismatch");
  Wrench w;
  BasisGradHess gh;
  for (const auto& el : obj.elements) {
    const Vec3 offset = pose.R * el.center;
    basis_grad_hess(basis, pose.r + offset, gh);
    Eigen::Vector3cd E = Eigen::Vector3cd::Zero();
    Eigen::Matrix3cd J = Eigen::Matrix3cd::Zero();
    for (std::size_t i = 0; i < u.size(); ++i) {
      E -= u[i] * gh.grad[i].cast<cplx>();
      J -= u[i] * gh.hess[i].cast<cplx>();
    }
    const cplx alpha = element_polarizability(m, el.volume);
    const Vec3 f = 0.5 * (alpha * (J.conjugate() * E)).real();
    const Vec3 t = 0.5 * (alpha * cross(E, Eigen::Vector3cd(E.conjugate()))).real();
    w.F += f;
    w.T += t + offset.cross(f);
  }
  return w;
}

}  // namespace depman
