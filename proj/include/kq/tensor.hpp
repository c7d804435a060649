#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>

namespace kq {

using Complex = std::complex<double>;
using Vec2c = Eigen::Vector2cd;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat2c = Eigen::Matrix2cd;
using Mat3 = Eigen::Matrix3d;
using Mat3c = Eigen::Matrix3cd;

inline const Vec3 x_hat{1.0, 0.0, 0.0};
inline const Vec3 y_hat{0.0, 1.0, 0.0};
inline const Vec3 z_hat{0.0, 0.0, 1.0};

/// Matrix of the cross product, (a x 1) v = a x v.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> cross_matrix(const Eigen::Matrix<Scalar, 3, 1>& a) {
  Eigen::Matrix<Scalar, 3, 3> m;
  const Scalar zero{};
  m << zero, -a(2), a(1),
       a(2), zero, -a(0),
       -a(1), a(0), zero;
  return m;
}

/// Dyadic a (x) b without conjugation: (a (x) b)_ij = a_i b_j.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> outer(const Eigen::Matrix<Scalar, 3, 1>& a,
                                  const Eigen::Matrix<Scalar, 3, 1>& b) {
  return a * b.transpose();
}

/// Bilinear cross product. Eigen's cross() conjugates the result for complex
/// scalars; the dipole algebra needs the plain bilinear form.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> cross3(const Eigen::Matrix<Scalar, 3, 1>& a,
                                   const Eigen::Matrix<Scalar, 3, 1>& b) {
  return {a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
          a(0) * b(1) - a(1) * b(0)};
}

template <typename Derived>
auto symmetric_part(const Eigen::MatrixBase<Derived>& t) {
  return ((t + t.transpose()) / 2.0).eval();
}

template <typename Derived>
auto antisymmetric_part(const Eigen::MatrixBase<Derived>& t) {
  return ((t - t.transpose()) / 2.0).eval();
}

/// Row-major text form, 9 "(re,im)" pairs. Test-fixture plumbing only.
std::string tensor_to_text(const Mat3c& t);
Mat3c tensor_from_text(const std::string& text);

}  // namespace kq
