#pragma once

#include "kq/tensor.hpp"

namespace kq {

/// Ground-subspace pure state c1|g1> + c2|g2>.
struct PureState {
  Complex c1{1.0, 0.0};
  Complex c2{0.0, 0.0};

  Vec2c vec() const { return Vec2c{c1, c2}; }
  static PureState from(const Vec2c& v) { return {v(0), v(1)}; }
  double norm2() const { return std::norm(c1) + std::norm(c2); }
  PureState normalized() const;
};

/// Ground-subspace density matrix.
struct DensityMatrix {
  Mat2c rho = Mat2c::Identity() * 0.5;

  static DensityMatrix from_pure(const PureState& s);
  double trace() const { return (rho(0, 0) + rho(1, 1)).real(); }
  double hermiticity_defect() const { return (rho - rho.adjoint()).norm(); }
  double min_eigenvalue() const;  // exact 2x2 Hermitian formula
};

struct BlochVector {
  double x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec3 vec() const { return Vec3{x, y, z}; }
};

/// S = (<sx>, <sy>, <sz>); mixed form (r12+r21, i r12 - i r21, r11-r22).
BlochVector bloch_map(const PureState& s);
BlochVector bloch_map(const DensityMatrix& r);

/// Antiunitary time reversal on the doublet: (c1, c2) -> (-c2*, c1*).
/// Applying it twice gives -1 times the original (T^2 = -1).
PureState time_reverse(const PureState& s);

/// Density-matrix conjugation by time reversal: r11 <-> r22, r12 -> -r12.
DensityMatrix time_reverse(const DensityMatrix& r);

}  // namespace kq
