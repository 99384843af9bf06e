#pragma once

#include <complex>

namespace depman {

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kGravity = 9.80665;                       // m/s^2

/// Medium ("m") and object ("o") properties plus the drive frequency.
/// Defaults: deionized water + Tween 20 and SU-8 at 300 kHz.
struct MaterialProperties {
  double eps_m = 80.0;
  double eps_o = 3.2;
  double sigma_m = 1.6e-3;    // 16 uS/cm
  double sigma_o = 5.556e-15; // 5.556e-11 uS/cm
  double rho_m = 998.0;
  double rho_o = 1190.0;
  double mu = 0.9078e-3;      // Pa s at 25 C
  double frequency = 300e3;   // Hz

  void validate() const;
};

/// Clausius-Mossotti factor (eps*_o - eps*_m) / (eps*_o + 2 eps*_m),
/// eps* = eps0 eps_r - j sigma / omega.
std::complex<double> cm_factor(const MaterialProperties& m);

/// Polarizability of a sphere of volume v: 3 eps0 eps_m v K.
std::complex<double> element_polarizability(const MaterialProperties& m, double volume);

}  // namespace depman
