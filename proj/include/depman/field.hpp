#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "depman/geometry.hpp"

namespace depman {

using cplx = std::complex<double>;

/// Dense order-k tensor over 3 dimensions, row-major multi-index
/// (i1, ..., ik) -> i1*3^(k-1) + ... + ik.
struct Tensor {
  int order = 0;
  std::vector<cplx> data;

  Tensor() = default;
  explicit Tensor(int k);

  static std::size_t size_for(int k);
  cplx& operator[](std::size_t i) { return data[i]; }
  const cplx& operator[](std::size_t i) const { return data[i]; }
  double norm() const;  // Frobenius
};

/// Potential phasor and its spatial derivative tensors D^1..D^m at one point.
struct FieldDerivatives {
  Vec3 point = Vec3::Zero();
  cplx potential{};
  std::vector<Tensor> d;  // d[k-1] is D^k, V/m^k

  int max_order() const { return static_cast<int>(d.size()); }
  const Tensor& order(int k) const { return d.at(k - 1); }
};

struct PointSource {
  Vec3 position;
  double weight = 1.0;
};

/// Electrode basis as point sources shared between electrodes: the potential of
/// electrode i at 1 V (others grounded) is scale * sum_k w_ik / (4 pi |x - s_k|).
/// A ring of point clusters gives block-diagonal weights; a solved pad array gives
/// dense ones (grounded electrodes carry induced charge).
struct ElectrodeBasis {
  struct Node {
    Vec3 position;
    std::vector<std::pair<int, double>> weights;  // (electrode, weight), nonzero only
  };

  int n = 0;
  std::vector<Node> nodes;
  double scale = 1.0;
  double min_clearance = 5e-6;

  int n_electrodes() const { return n; }
  std::vector<PointSource> sources(int electrode) const;
  void validate() const;
};

/// n electrodes as point clusters with tips on a circle. The scale makes the potential
/// `probe_offset` inward from an electrode's central source equal to 1 V.
struct RingArrayGeometry {
  int n_electrodes = 4;
  double ring_radius = 300e-6;
  int sources_per_electrode = 3;
  double source_spacing = 40e-6;
  double probe_offset = 20e-6;
  double first_angle = 0.0;  // rad, electrode 0 on +x
};

ElectrodeBasis ring_array(const RingArrayGeometry& g);

/// n planar sector pads in the z = 0 plane, tips on a circle, straight gaps of constant
/// width between neighbours. Square panels (finer near the tips) carry point charges
/// solved so every panel centre sits at its electrode's potential (1 V or 0 V).
struct PadArrayGeometry {
  int n_electrodes = 4;
  double tip_radius = 400e-6;
  double outer_radius = 1300e-6;
  double gap = 80e-6;
  double panel = 25e-6;          // panel side inside fine_radius, coarser further out
  double fine_radius = 600e-6;
  double first_angle = 0.0;
};

ElectrodeBasis pad_array(const PadArrayGeometry& g);

/// Default four-electrode layout.
ElectrodeBasis quadrupole_basis();

/// Real per-electrode gradient and Hessian of the potential at x: the element-path
/// hot loop needs only these. Throws FieldDomainError near a source.
struct BasisGradHess {
  std::vector<Vec3> grad;
  std::vector<Mat3> hess;
};
void basis_grad_hess(const ElectrodeBasis& basis, const Vec3& x, BasisGradHess& out);

/// Per-electrode potential derivatives up to max_order (1..6), 1 V on that electrode.
std::vector<FieldDerivatives> basis_derivatives(const ElectrodeBasis& basis, const Vec3& x,
                                                int max_order);

/// sum_i u_i D_i^k for every order k.
FieldDerivatives superpose(std::span<const FieldDerivatives> basis_fields,
                           std::span<const cplx> u);

/// Applies R to every index: D'_{i..} = R_{ij}... D_{j..}.
FieldDerivatives rotate_derivatives(const FieldDerivatives& f, const Mat3& R);
Tensor rotate_tensor(const Tensor& t, const Mat3& R);

/// Multi-index helpers shared by the multipole code.
std::array<int, 3> index_counts(std::size_t flat, int order);

}  // namespace depman
