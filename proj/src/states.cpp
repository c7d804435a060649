#include "kq/states.hpp"

#include <cmath>

namespace kq {

PureState PureState::normalized() const {
  const double n = std::sqrt(norm2());
  return {c1 / n, c2 / n};
}

DensityMatrix DensityMatrix::from_pure(const PureState& s) {
  DensityMatrix r;
  r.rho = s.vec() * s.vec().adjoint();
  return r;
}

double DensityMatrix::min_eigenvalue() const {
  const double tr = trace();
  const double det = (rho(0, 0) * rho(1, 1) - rho(0, 1) * rho(1, 0)).real();
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  return 0.5 * (tr - disc);
}

BlochVector bloch_map(const PureState& s) {
  const Complex r12 = s.c1 * std::conj(s.c2);
  return {2.0 * r12.real(), -2.0 * r12.imag(), std::norm(s.c1) - std::norm(s.c2)};
}

BlochVector bloch_map(const DensityMatrix& r) {
  const Complex r12 = r.rho(0, 1);
  const Complex r21 = r.rho(1, 0);
  return {(r12 + r21).real(), (Complex(0.0, 1.0) * (r12 - r21)).real(),
          (r.rho(0, 0) - r.rho(1, 1)).real()};
}

PureState time_reverse(const PureState& s) {
  return {-std::conj(s.c2), std::conj(s.c1)};
}

DensityMatrix time_reverse(const DensityMatrix& r) {
  DensityMatrix out;
  out.rho << r.rho(1, 1), -r.rho(0, 1),
             -r.rho(1, 0), r.rho(0, 0);
  return out;
}

}  // namespace kq
