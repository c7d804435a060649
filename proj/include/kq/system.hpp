#pragma once

#include <optional>

#include "kq/medium.hpp"
#include "kq/tensor.hpp"

namespace kq {

/// Physical parameters of the atom + nanoparticle system, strictly SI.
/// All unit conversion happens at config parse time, never here.
struct SystemConfig {
  double d = 5e-9;            // atom-nanoparticle center distance [m]
  double R = 2.5e-9;          // nanoparticle radius [m]
  DrudeParams drude{};        // omega_p, Gamma [rad/s]
  double m_star = 0.0;        // electron effective mass [kg]
  double omega_a = 0.0;       // atomic transition frequency [rad/s]
  Complex gamma_d{0.0, 0.0};  // chiral dipole amplitude [C m]
  Complex gamma_c{0.0, 0.0};  // linear dipole amplitude [C m]
  int handedness = +1;        // +1 or -1, rotation sense of the chiral dipole
  std::optional<double> g_sp_override;  // replaces the physical radiation factor
  bool radiation_enabled = false;

  void validate() const;  // throws ValidationError
};

/// Dipole vectors of the two transitions:
///   gd_vec = (gamma_d / sqrt(2)) (x +/- i y),  gc_vec = gamma_c z.
struct DipoleVectors {
  Vec3c gd_vec;
  Vec3c gc_vec;
  Vec3 s_dip1;  // handedness direction, i gd x gd* normalized; +/- z here
};

DipoleVectors dipole_vectors(const SystemConfig& cfg);

/// Handedness direction of an arbitrary chiral dipole vector: the unit vector
/// along i g x g* (a real vector for any complex g); zero for linear dipoles.
Vec3 handedness_direction(const Vec3c& g);

}  // namespace kq
