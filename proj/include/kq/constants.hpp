#pragma once

namespace kq {

/// Fixed CODATA-2018 physical constants, SI units. Compiled in rather than
/// configurable so that derived numbers are reproducible bit-for-bit.
struct PhysicalConstants {
  double epsilon0 = 8.8541878128e-12;   // vacuum permittivity [F/m]
  double mu0      = 1.25663706212e-6;   // vacuum permeability [H/m]
  double hbar     = 1.054571817e-34;    // reduced Planck constant [J s]
  double c_light  = 299792458.0;        // speed of light [m/s]
  double e_charge = 1.602176634e-19;    // elementary charge, positive [C]
  double m_e      = 9.1093837015e-31;   // free-electron mass [kg]
  double alpha_fs = 7.2973525693e-3;    // fine-structure constant
  double debye    = 1e-21 / 299792458.0;  // 1 Debye [C m]
};

inline constexpr PhysicalConstants si{};

}  // namespace kq
