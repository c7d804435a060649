#include "kq/system.hpp"

#include <cmath>

#include "kq/errors.hpp"

namespace kq {

void SystemConfig::validate() const {
  if (!(R > 0.0)) throw ValidationError("system: R must be > 0");
  if (!(d >= R)) throw ValidationError("system: d must be >= R");
  if (!(drude.omega_p > 0.0)) throw ValidationError("system: omega_p must be > 0");
  if (drude.gamma_coll < 0.0) throw ValidationError("system: Gamma must be >= 0");
  if (!(m_star > 0.0)) throw ValidationError("system: m_star must be > 0");
  if (!(omega_a > 0.0)) throw ValidationError("system: omega_a must be > 0");
  if (handedness != 1 && handedness != -1)
    throw ValidationError("system: handedness must be +1 or -1");
  if (g_sp_override && *g_sp_override < 0.0)
    throw ValidationError("system: g_sp_override must be >= 0");
}

Vec3 handedness_direction(const Vec3c& g) {
  const Vec3c cross = cross3<Complex>(g, g.conjugate());
  const Vec3 s = (Complex(0.0, 1.0) * cross).real();
  const double n = s.norm();
  return n > 0.0 ? Vec3(s / n) : Vec3::Zero();
}

DipoleVectors dipole_vectors(const SystemConfig& cfg) {
  const Complex i{0.0, 1.0};
  const double sign = static_cast<double>(cfg.handedness);
  DipoleVectors dip;
  dip.gd_vec = (cfg.gamma_d / std::sqrt(2.0)) *
               (x_hat.cast<Complex>() + sign * i * y_hat.cast<Complex>());
  dip.gc_vec = cfg.gamma_c * z_hat.cast<Complex>();
  dip.s_dip1 = handedness_direction(dip.gd_vec);
  return dip;
}

}  // namespace kq
