#pragma once

#include <functional>

#include "kq/quadrature.hpp"
#include "kq/states.hpp"
#include "kq/system.hpp"

namespace kq {

/// Spin-driven bias quantities derived from the current quantum state.
struct CyclotronState {
  Vec3 m_s = Vec3::Zero();       // spin magnetic moment expectation [J/T]
  Vec3 B0 = Vec3::Zero();        // static dipole field at the particle [T]
  Vec3 omega0 = Vec3::Zero();    // oriented cyclotron frequency -qB0/m* [rad/s]
  Vec3 omega_ef = Vec3::Zero();  // omega0 + 3 (omega0 x z) x z [rad/s]
  double omega0_perp = 0.0;      // scale alpha_fs hbar^2 / (2 me m* c d^3) [rad/s]
};

CyclotronState spin_state_to_cyclotron(const PureState& s, const SystemConfig& cfg);
CyclotronState spin_state_to_cyclotron(const DensityMatrix& r, const SystemConfig& cfg);
CyclotronState cyclotron_from_bloch(const BlochVector& S, const SystemConfig& cfg);

/// Transition dipole correlation matrices of the doublet, (C m)^2.
struct QMatrixSet {
  Mat3c Q11, Q22, Q12, Q21;
};

QMatrixSet q_matrices(const DipoleVectors& dip);

/// Quasi-static dipole interaction tensor (3 z(x)z - 1)/(4 pi d^3) [1/m^3].
Mat3 interaction_tensor(double d);

/// w(u) = u + 3 (u x z) x z; the geometric image of u under two interaction
/// tensors, so that C (u x 1) C = (w x 1) / (16 pi^2 d^6).
Vec3 w_vector(const Vec3& u);

/// 2x2 Hermitian effective Hamiltonian of the ground subspace [J], together
/// with the energy scales of the chiral/linear dipole model.
struct EffectiveHamiltonian {
  Mat2c h = Mat2c::Zero();
  double E_d = 0.0;      // diagonal scale [J]
  Complex E_cr{0.0, 0.0};  // crossed scale [J]
  double A = 0.0;        // dimensionless coupling constant
};

/// Dimensionless coupling constant, leading order (state independent):
///   A = int_0^inf dxi 3 xi^2 wp^3 / ((3 xi (xi+G) + wp^2)^2 (wa^2 + xi^2)).
double coefficient_A(const SystemConfig& cfg, const quad::Options& opt = {});

/// Exact-form coupling constant at a given bias magnitude,
///   A = int (i eps_g/w0) / ((eps_t+2)^2 - eps_g^2) * 3 xi wp / (wa^2 + xi^2) dxi,
/// with the permittivity evaluated on the imaginary axis at |omega0|.
double coefficient_A_exact(const SystemConfig& cfg, double omega0_mag,
                           const quad::Options& opt = {});

/// Precomputed state-independent pieces of the effective Hamiltonian.
/// Building one evaluates the A quadrature once; the per-state builders are
/// then cheap enough to call inside every integrator stage.
class HamiltonianModel {
public:
  HamiltonianModel(const SystemConfig& cfg, const quad::Options& quad_opt = {});

  const SystemConfig& config() const { return cfg_; }
  const DipoleVectors& dipoles() const { return dip_; }
  double A() const { return A_; }
  double E_d() const { return E_d_; }
  Complex E_cr() const { return E_cr_; }
  double omega0_perp() const { return omega0_perp_; }
  double T_min() const;              // pi hbar / E_d
  double g_sp_physical() const;      // alpha_fs (8/3) (E_d / me c^2)^2
  double g_sp_effective() const;     // override when configured

  /// Closed form, chiral/linear dipole model (diagonal +/- E_d (r11 - r22),
  /// crossed +/- E_cr rho_ba).
  EffectiveHamiltonian closed_form(const PureState& s) const;
  EffectiveHamiltonian closed_form(const DensityMatrix& r) const;

  /// Closed form for arbitrary dipole vectors, from omega_ef and the dipole
  /// cross products. Agrees with closed_form for the dipole model vectors.
  EffectiveHamiltonian general_form(const PureState& s) const;
  EffectiveHamiltonian general_form(const CyclotronState& cyc) const;

  /// Same contraction written through the trace identity
  /// h_mn = -i K tr{ Q^(mn) (omega_ef/wp x 1) }; fixes orientation conventions.
  EffectiveHamiltonian trace_identity_form(const CyclotronState& cyc) const;

private:
  SystemConfig cfg_;
  DipoleVectors dip_;
  double A_ = 0.0;
  double omega0_perp_ = 0.0;
  double E_d_ = 0.0;
  Complex E_cr_{0.0, 0.0};
  double k12_ = 0.0;  // A alpha0 / (16 pi^3 eps0 d^6 wp)
};

/// Full imaginary-axis quadrature path: the scattered Green function
/// G(i xi) = C alpha(i xi) C / eps0 with the bias-exact permittivity at the
/// state's |omega0| and u, contracted against the Q matrices. The diagonal
/// carries the state-independent Lamb shift; comparisons against the closed
/// form must remove the trace.
EffectiveHamiltonian hamiltonian_quadrature(const PureState& s, const SystemConfig& cfg,
                                            const quad::Options& opt = {});
EffectiveHamiltonian hamiltonian_quadrature(const CyclotronState& cyc,
                                            const SystemConfig& cfg,
                                            const quad::Options& opt = {});

Mat2c remove_trace(const Mat2c& h);

/// Time-reversal symmetry test of a Hamiltonian builder: samples random
/// normalized states and checks
///   h(c1,c2) = [[h22*, -h21*], [-h12*, h11*]] at (-c2*, c1*).
struct TimeReversalReport {
  bool pass = false;
  double max_deviation = 0.0;  // relative to ||h||
};

using HamiltonianBuilder = std::function<Mat2c(const PureState&)>;

TimeReversalReport time_reversal_symmetry_check(const HamiltonianBuilder& builder,
                                                int n_samples,
                                                std::uint64_t seed = 0x5eed5eedULL);

}  // namespace kq
