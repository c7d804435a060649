#pragma once

#include "kq/tensor.hpp"

namespace kq {

/// Drude plasma parameters.
struct DrudeParams {
  double omega_p = 0.0;     // plasma frequency [rad/s]
  double gamma_coll = 0.0;  // collision frequency [rad/s]
};

/// Magnetically biased Drude response evaluated on the imaginary frequency
/// axis, omega = i*xi. All three entries are real there; the gyrotropic one
/// is stored as (i eps_g / omega0), which stays finite as omega0 -> 0.
struct ImagAxisPermittivity {
  double xi = 0.0;              // [rad/s]
  double eps_t = 1.0;           // transverse, >= 1 for xi > 0
  double i_eps_g_over_w0 = 0.0; // [s/rad]
  double eps_a = 1.0;           // axial, >= 1 for xi > 0
};

/// Complex-frequency permittivity entries of the biased Drude tensor.
struct GyroPermittivity {
  Complex eps_t, eps_g, eps_a;
};

/// Exact analytic imaginary-axis form:
///   eps_t = 1 + wp^2 (xi+G) / (xi ((xi+G)^2 + w0^2))
///   i eps_g / w0 = wp^2 / (xi ((xi+G)^2 + w0^2))
///   eps_a = 1 + wp^2 / (xi (xi+G))
/// Throws PreconditionError for xi <= 0 (the integrands live on (0, inf)).
ImagAxisPermittivity permittivity_imag_axis(double xi, double omega0_mag,
                                            const DrudeParams& drude);

/// Direct complex-omega evaluation of the biased Drude tensor entries.
/// Oracle for permittivity_imag_axis (set omega = i*xi) and general probing.
GyroPermittivity permittivity_complex(Complex omega, double omega0_mag,
                                      const DrudeParams& drude);

/// Relative permittivity tensor eps/eps0 = eps_t 1_t + i eps_g u x 1 + eps_a u(x)u.
Mat3c gyro_permittivity_tensor(const GyroPermittivity& perm, const Vec3& u_hat);

/// Quasi-static electric polarizability of a nanosphere (units m^3).
struct Polarizability {
  Mat3c alpha;              // [m^3]
  double alpha0 = 0.0;      // 4 pi R^3 [m^3]
  Vec3 u_hat = {0.0, 0.0, 1.0};
};

/// General anisotropic sphere: alpha = alpha0 (eps_rel + 2)^-1 (eps_rel - 1),
/// eps_rel the relative permittivity tensor. Throws ResonanceError when
/// (eps_rel + 2) is singular (quasi-static plasmon pole).
Polarizability polarizability_general(const Mat3c& eps_rel, double radius,
                                      const Vec3& u_hat = {0.0, 0.0, 1.0});

/// Gyroelectric closed form:
///   alpha/alpha0 = 1 - 3[(eps_t+2) 1_t - i eps_g u x 1]/((eps_t+2)^2 - eps_g^2)
///                    - 3/(eps_a+2) u(x)u
Polarizability polarizability_gyro(const GyroPermittivity& perm,
                                   const Vec3& u_hat, double radius);

/// Imaginary-axis variant: with i*eps_g real the whole tensor is real.
/// i_eps_g = (i eps_g / omega0) * omega0_mag.
Mat3 polarizability_gyro_ia(double eps_t, double i_eps_g, double eps_a,
                            const Vec3& u_hat, double radius);

}  // namespace kq
