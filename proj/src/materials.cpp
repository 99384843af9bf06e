#include "depman/materials.hpp"

#include <cmath>
#include <numbers>

#include "depman/errors.hpp"

namespace depman {

void MaterialProperties::validate() const {
  if (!(eps_m > 0 && eps_o > 0 && rho_m > 0 && rho_o > 0 && mu > 0 && frequency > 0))
    throw ConfigError("material: permittivities, densities, viscosity and frequency must be > 0");
  if (sigma_m < 0 || sigma_o < 0) throw ConfigError("material: conductivities must be >= 0");
}

std::complex<double> cm_factor(const MaterialProperties& m) {
  using namespace std::complex_literals;
  const double omega = 2 * std::numbers::pi * m.frequency;
  const std::complex<double> em = kVacuumPermittivity * m.eps_m - 1i * (m.sigma_m / omega);
  const std::complex<double> eo = kVacuumPermittivity * m.eps_o - 1i * (m.sigma_o / omega);
  const std::complex<double> den = eo + 2.0 * em;
  if (std::abs(den) < 1e-30) throw NumericalError("degenerate material: |eps*_o + 2 eps*_m| ~ 0");
  return (eo - em) / den;
}

std::complex<double> element_polarizability(const MaterialProperties& m, double volume) {
  return 3.0 * kVacuumPermittivity * m.eps_m * volume * cm_factor(m);
}

}  // namespace depman
