#include "depman/gdep.hpp"

#include <stdexcept>
#include <string>

namespace depman {

namespace {

std::size_t p3(int k) { return Tensor::size_for(k); }

double inv_factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return 1.0 / f;
}

// delta^{(x) m} for m = 0..max_m
std::vector<std::vector<double>> outer_powers(const Vec3& d, int max_m) {
  std::vector<std::vector<double>> pw(max_m + 1);
  pw[0] = {1.0};
  for (int m = 1; m <= max_m; ++m) {
    pw[m].resize(p3(m));
    for (std::size_t q = 0; q < pw[m - 1].size(); ++q)
      for (int c = 0; c < 3; ++c) pw[m][q * 3 + c] = pw[m - 1][q] * d(c);
  }
  return pw;
}

// E_a(delta) = -sum_m 1/m! D^{m+1}[a, delta^m], real basis fields in the body frame.
Vec3 taylor_field(const FieldDerivatives& f, const std::vector<std::vector<double>>& pw) {
  Vec3 e = Vec3::Zero();
  for (int m = 0; m < f.max_order(); ++m) {
    const Tensor& D = f.d[m];
    const std::size_t blk = p3(m);
    const double w = inv_factorial(m);
    for (int a = 0; a < 3; ++a) {
      double s = 0;
      for (std::size_t q = 0; q < blk; ++q) s += D.data[a * blk + q].real() * pw[m][q];
      e(a) -= w * s;
    }
  }
  return e;
}

// Body-frame contraction kernels. `p` holds a moment sequence p^(1..K) and `D` the
// (conjugated by the caller where needed) derivative tensors D^1..D^{K+1}.
// Returns G with F = 1/2 Re[G_F], T = 1/2 Re[G_T].
struct Contraction {
  Eigen::Vector3cd f = Eigen::Vector3cd::Zero();
  Eigen::Vector3cd t = Eigen::Vector3cd::Zero();
};

template <class DAt>
Contraction contract(const std::vector<Tensor>& p, DAt dat, int K) {
  Contraction out;
  // force: -sum_k 1/(k-1)! P^(k)[q] D^{k+1}[a, q]
  for (int k = 1; k <= K; ++k) {
    const std::size_t blk = p3(k);
    const double w = inv_factorial(k - 1);
    for (int a = 0; a < 3; ++a) {
      cplx s{};
      for (std::size_t q = 0; q < blk; ++q) s += p[k - 1][q] * dat(k + 1, a * blk + q);
      out.f(a) -= w * s;
    }
  }
  // rotation term: eps_abc P^(k)[b, q] (-D^k[c, q]) / (k-1)!
  for (int k = 1; k <= K + 1; ++k) {
    const std::size_t blk = p3(k - 1);
    const double w = inv_factorial(k - 1);
    cplx m[3][3];  // m[b][c] = sum_q P[b,q] D^k[c,q]
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        cplx s{};
        for (std::size_t q = 0; q < blk; ++q) s += p[k - 1][b * blk + q] * dat(k, c * blk + q);
        m[b][c] = s;
      }
    out.t(0) -= w * (m[1][2] - m[2][1]);
    out.t(1) -= w * (m[2][0] - m[0][2]);
    out.t(2) -= w * (m[0][1] - m[1][0]);
  }
  // lever term: eps_abc P^(m+2)[d, b, q] (-D^{m+2}[c, d, q]) / m!
  for (int mm = 0; mm + 2 <= K + 1; ++mm) {
    const int k = mm + 2;
    const std::size_t blk = p3(mm);
    const double w = inv_factorial(mm);
    cplx m[3][3]{};  // m[b][c] = sum_{d,q} P[d,b,q] D[c,d,q]
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        cplx s{};
        for (int d = 0; d < 3; ++d)
          for (std::size_t q = 0; q < blk; ++q)
            s += p[k - 1][(d * 3 + b) * blk + q] * dat(k, (c * 3 + d) * blk + q);
        m[b][c] = s;
      }
    out.t(0) -= w * (m[1][2] - m[2][1]);
    out.t(1) -= w * (m[2][0] - m[0][2]);
    out.t(2) -= w * (m[0][1] - m[1][0]);
  }
  return out;
}

void check_order(int order, int available) {
  if (order < 1 || order > 5)
    throw std::invalid_argument("multipole order must be in 1..5, got " + std::to_string(order));
  if (available < order + 1)
    throw std::invalid_argument("multipole order " + std::to_string(order) +
                                " needs field derivatives to order " + std::to_string(order + 1));
}

}  // namespace

MultipoleSet multipole_moments(const ObjectModel& obj, const Pose& pose,
                               std::span<const FieldDerivatives> basis_fields,
                               const MaterialProperties& m, int order) {
  if (basis_fields.empty()) throw std::invalid_argument("multipole_moments: no basis fields");
  check_order(order, basis_fields[0].max_order());
  const Mat3 Rt = pose.R.transpose();
  std::vector<FieldDerivatives> body;
  body.reserve(basis_fields.size());
  for (const auto& f : basis_fields) body.push_back(rotate_derivatives(f, Rt));

  MultipoleSet mp;
  mp.order = order;
  mp.moments.assign(basis_fields.size(), {});
  for (auto& seq : mp.moments)
    for (int k = 1; k <= order + 1; ++k) seq.emplace_back(k);

  const int max_pow = std::max(order, body[0].max_order() - 1);
  for (const auto& el : obj.elements) {
    const auto pw = outer_powers(el.center, max_pow);
    const cplx alpha = element_polarizability(m, el.volume);
    for (std::size_t i = 0; i < body.size(); ++i) {
      const Vec3 e = taylor_field(body[i], pw);
      for (int k = 1; k <= order + 1; ++k) {
        Tensor& t = mp.moments[i][k - 1];
        const auto& lever = pw[k - 1];
        const std::size_t blk = lever.size();
        for (int a = 0; a < 3; ++a) {
          const cplx ae = alpha * e(a);
          for (std::size_t q = 0; q < blk; ++q) t.data[a * blk + q] += ae * lever[q];
        }
      }
    }
  }
  return mp;
}

Wrench eval_wrench_multipole(const MultipoleSet& mp, const FieldDerivatives& total_field,
                             const Pose& pose, std::span<const cplx> u) {
  check_order(mp.order, total_field.max_order());
  if (u.size() != mp.moments.size())
    throw std::invalid_argument("eval_wrench_multipole: phasor length mismatch");
  const FieldDerivatives body = rotate_derivatives(total_field, pose.R.transpose());
  std::vector<Tensor> p;
  for (int k = 1; k <= mp.order + 1; ++k) {
    Tensor t(k);
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t q = 0; q < t.data.size(); ++q) t.data[q] += u[i] * mp.moments[i][k - 1][q];
    p.push_back(std::move(t));
  }
  auto dat = [&](int k, std::size_t idx) { return std::conj(body.d[k - 1].data[idx]); };
  const Contraction c = contract(p, dat, mp.order);
  return {pose.R * (0.5 * c.f.real()), pose.R * (0.5 * c.t.real())};
}

WrenchFormSet assemble_forms_multipole(const ObjectModel& obj, const Pose& pose,
                                       const ElectrodeBasis& basis,
                                       const MaterialProperties& m, int order) {
  const auto fields = basis_derivatives(basis, pose.r, order + 1);
  const MultipoleSet mp = multipole_moments(obj, pose, fields, m, order);
  const Mat3 Rt = pose.R.transpose();
  std::vector<FieldDerivatives> body;
  for (const auto& f : fields) body.push_back(rotate_derivatives(f, Rt));

  const int n = basis.n_electrodes();
  std::array<CMat, 3> Pb, Qb;
  for (int a = 0; a < 3; ++a) {
    Pb[a] = CMat::Zero(n, n);
    Qb[a] = CMat::Zero(n, n);
  }
  // G_ij pairs moments of electrode i with the field of electrode j; the form is
  // M = (G^T + conj(G)) / 4.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto dat = [&](int k, std::size_t idx) { return body[j].d[k - 1].data[idx]; };
      const Contraction g = contract(mp.moments[i], dat, order);
      for (int a = 0; a < 3; ++a) {
        Pb[a](j, i) += 0.25 * g.f(a);
        Pb[a](i, j) += 0.25 * std::conj(g.f(a));
        Qb[a](j, i) += 0.25 * g.t(a);
        Qb[a](i, j) += 0.25 * std::conj(g.t(a));
      }
    }
  WrenchFormSet out;
  out.pose = pose;
  for (int a = 0; a < 3; ++a) {
    out.P[a] = CMat::Zero(n, n);
    out.Q[a] = CMat::Zero(n, n);
    for (int b = 0; b < 3; ++b) {
      out.P[a] += pose.R(a, b) * Pb[b];
      out.Q[a] += pose.R(a, b) * Qb[b];
    }
  }
  for (int a = 0; a < 3; ++a) {
    out.P[a] = 0.5 * (out.P[a] + out.P[a].adjoint()).eval();
    out.Q[a] = 0.5 * (out.Q[a] + out.Q[a].adjoint()).eval();
  }
  return out;
}

}  // namespace depman
