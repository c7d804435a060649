#include "kq/medium.hpp"

#include <cmath>
#include <sstream>

#include "kq/errors.hpp"

namespace kq {

std::string tensor_to_text(const Mat3c& t) {
  std::ostringstream os;
  os.precision(17);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      if (r || c) os << ' ';
      os << '(' << t(r, c).real() << ',' << t(r, c).imag() << ')';
    }
  return os.str();
}

Mat3c tensor_from_text(const std::string& text) {
  std::istringstream is(text);
  Mat3c t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      Complex v;
      if (!(is >> v)) throw ValidationError("tensor text: expected 9 complex pairs");
      t(r, c) = v;
    }
  return t;
}

ImagAxisPermittivity permittivity_imag_axis(double xi, double omega0_mag,
                                            const DrudeParams& drude) {
  if (!(xi > 0.0))
    throw PreconditionError("permittivity_imag_axis: xi must be > 0");
  if (omega0_mag < 0.0)
    throw PreconditionError("permittivity_imag_axis: omega0_mag must be >= 0");

  const double wp2 = drude.omega_p * drude.omega_p;
  const double xg = xi + drude.gamma_coll;
  const double denom = xi * (xg * xg + omega0_mag * omega0_mag);

  ImagAxisPermittivity p;
  p.xi = xi;
  p.eps_t = 1.0 + wp2 * xg / denom;
  p.i_eps_g_over_w0 = wp2 / denom;
  p.eps_a = 1.0 + wp2 / (xi * xg);
  return p;
}

GyroPermittivity permittivity_complex(Complex omega, double omega0_mag,
                                      const DrudeParams& drude) {
  const Complex i{0.0, 1.0};
  const double wp2 = drude.omega_p * drude.omega_p;
  const double g = drude.gamma_coll;
  const Complex wg = omega + i * g;
  const Complex res = wg * wg - omega0_mag * omega0_mag;

  GyroPermittivity p;
  p.eps_t = 1.0 - wp2 * (1.0 + i * g / omega) / res;
  p.eps_g = (wp2 * omega0_mag) / (omega * (omega0_mag * omega0_mag - wg * wg));
  p.eps_a = 1.0 - wp2 / (omega * wg);
  return p;
}

Mat3c gyro_permittivity_tensor(const GyroPermittivity& perm, const Vec3& u_hat) {
  const Mat3c uu = outer<double>(u_hat, u_hat).cast<Complex>();
  const Mat3c one_t = Mat3c::Identity() - uu;
  const Mat3c ux = cross_matrix<double>(u_hat).cast<Complex>();
  return perm.eps_t * one_t + Complex(0.0, 1.0) * perm.eps_g * ux + perm.eps_a * uu;
}

Polarizability polarizability_general(const Mat3c& eps_rel, double radius,
                                      const Vec3& u_hat) {
  const double alpha0 = 4.0 * M_PI * radius * radius * radius;
  const Mat3c m = eps_rel + 2.0 * Mat3c::Identity();
  const Complex det = m.determinant();
  // Relative cutoff: the pole only exists off the imaginary axis.
  const double scale = std::max(m.norm(), 1e-30);
  if (std::abs(det) < 1e-12 * scale * scale * scale)
    throw ResonanceError("polarizability_general: eps_rel + 2 is singular", std::abs(det));

  Polarizability pol;
  pol.alpha0 = alpha0;
  pol.u_hat = u_hat;
  pol.alpha = alpha0 * (m.inverse() * (eps_rel - Mat3c::Identity()));
  return pol;
}

Polarizability polarizability_gyro(const GyroPermittivity& perm,
                                   const Vec3& u_hat, double radius) {
  if (std::abs(u_hat.norm() - 1.0) > 1e-12)
    throw PreconditionError("polarizability_gyro: u_hat must be a unit vector");
  const double alpha0 = 4.0 * M_PI * radius * radius * radius;
  const Complex tp2 = perm.eps_t + 2.0;
  const Complex dt = tp2 * tp2 - perm.eps_g * perm.eps_g;
  const Complex da = perm.eps_a + 2.0;
  const double scale = std::abs(tp2) * std::abs(tp2) + std::abs(perm.eps_g) * std::abs(perm.eps_g);
  if (std::abs(dt) < 1e-14 * scale || std::abs(da) < 1e-14 * (std::abs(perm.eps_a) + 2.0))
    throw ResonanceError("polarizability_gyro: resonant denominator",
                         std::min(std::abs(dt), std::abs(da)));

  const Mat3c uu = outer<double>(u_hat, u_hat).cast<Complex>();
  const Mat3c one_t = Mat3c::Identity() - uu;
  const Mat3c ux = cross_matrix<double>(u_hat).cast<Complex>();

  Polarizability pol;
  pol.alpha0 = alpha0;
  pol.u_hat = u_hat;
  pol.alpha = alpha0 * (Mat3c::Identity()
                        - 3.0 * (tp2 * one_t - Complex(0.0, 1.0) * perm.eps_g * ux) / dt
                        - 3.0 / da * uu);
  return pol;
}

Mat3 polarizability_gyro_ia(double eps_t, double i_eps_g, double eps_a,
                            const Vec3& u_hat, double radius) {
  const double alpha0 = 4.0 * M_PI * radius * radius * radius;
  const double tp2 = eps_t + 2.0;
  const double dt = tp2 * tp2 + i_eps_g * i_eps_g;  // eps_g^2 = -(i eps_g)^2
  const double da = eps_a + 2.0;

  const Mat3 uu = outer<double>(u_hat, u_hat);
  const Mat3 one_t = Mat3::Identity() - uu;
  const Mat3 ux = cross_matrix<double>(u_hat);
  // -i eps_g = -(i eps_g): the gyrotropic term is real on the imaginary axis.
  return alpha0 * (Mat3::Identity()
                   - 3.0 * (tp2 * one_t - i_eps_g * ux) / dt
                   - 3.0 / da * uu);
}

}  // namespace kq
