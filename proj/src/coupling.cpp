#include "kq/coupling.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "kq/constants.hpp"
#include "kq/errors.hpp"

namespace kq {

namespace {

double omega0_perp_scale(const SystemConfig& cfg) {
  return si.alpha_fs * si.hbar * si.hbar /
         (2.0 * si.m_e * cfg.m_star * si.c_light * cfg.d * cfg.d * cfg.d);
}

// Bilinear dot product a . b (no conjugation; Eigen's dot conjugates).
Complex bdot(const Vec3& a, const Vec3c& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

}  // namespace

CyclotronState cyclotron_from_bloch(const BlochVector& S, const SystemConfig& cfg) {
  CyclotronState cyc;
  const double q = -si.e_charge;  // electron charge, q = -e
  // m_s = (hbar/2)(q/me) <sigma>, g-factor 2
  cyc.m_s = (0.5 * si.hbar * q / si.m_e) * S.vec();
  cyc.omega0_perp = omega0_perp_scale(cfg);
  // one numeric scale for the whole chain: the fine-structure and mu0 forms
  // of omega0_perp agree only to the CODATA values' mutual consistency (~6e-10)
  cyc.omega0 = cyc.omega0_perp * Vec3(S.x, S.y, -2.0 * S.z);
  cyc.B0 = (-cfg.m_star / q) * cyc.omega0;  // inverse of omega0 = -q B0 / m*
  cyc.omega_ef = cyc.omega0 + 3.0 * (cyc.omega0.cross(z_hat)).cross(z_hat);
  return cyc;
}

CyclotronState spin_state_to_cyclotron(const PureState& s, const SystemConfig& cfg) {
  return cyclotron_from_bloch(bloch_map(s), cfg);
}

CyclotronState spin_state_to_cyclotron(const DensityMatrix& r, const SystemConfig& cfg) {
  return cyclotron_from_bloch(bloch_map(r), cfg);
}

QMatrixSet q_matrices(const DipoleVectors& dip) {
  const Vec3c& gd = dip.gd_vec;
  const Vec3c& gc = dip.gc_vec;
  QMatrixSet q;
  q.Q11 = outer<Complex>(gd, gd.conjugate()) + outer<Complex>(gc, gc.conjugate());
  q.Q22 = outer<Complex>(gd.conjugate(), gd) + outer<Complex>(gc.conjugate(), gc);
  q.Q12 = -outer<Complex>(gd, gc) + outer<Complex>(gc, gd);
  q.Q21 = outer<Complex>(gd.conjugate(), gc.conjugate()) -
          outer<Complex>(gc.conjugate(), gd.conjugate());
  return q;
}

Mat3 interaction_tensor(double d) {
  if (!(d > 0.0)) throw PreconditionError("interaction_tensor: d must be > 0");
  return (3.0 * outer<double>(z_hat, z_hat) - Mat3::Identity()) /
         (4.0 * M_PI * d * d * d);
}

Vec3 w_vector(const Vec3& u) {
  return u + 3.0 * (u.cross(z_hat)).cross(z_hat);
}

double coefficient_A(const SystemConfig& cfg, const quad::Options& opt) {
  const double wp = cfg.drude.omega_p;
  const double wp2 = wp * wp;
  const double g = cfg.drude.gamma_coll;
  const double wa2 = cfg.omega_a * cfg.omega_a;
  auto integrand = [&](double xi) {
    const double den = 3.0 * xi * (xi + g) + wp2;
    return 3.0 * xi * xi * wp2 * wp / (den * den * (wa2 + xi * xi));
  };
  return quad::integrate_semi_infinite<double>(integrand, wp, opt);
}

double coefficient_A_exact(const SystemConfig& cfg, double omega0_mag,
                           const quad::Options& opt) {
  const double wp = cfg.drude.omega_p;
  const double wa2 = cfg.omega_a * cfg.omega_a;
  auto integrand = [&](double xi) {
    const ImagAxisPermittivity p = permittivity_imag_axis(xi, omega0_mag, cfg.drude);
    const double ig = p.i_eps_g_over_w0 * omega0_mag;  // i eps_g, real here
    const double tp2 = p.eps_t + 2.0;
    // eps_g^2 = -(i eps_g)^2 on the imaginary axis
    return p.i_eps_g_over_w0 / (tp2 * tp2 + ig * ig) * 3.0 * xi * wp /
           (wa2 + xi * xi);
  };
  return quad::integrate_semi_infinite<double>(integrand, wp, opt);
}

HamiltonianModel::HamiltonianModel(const SystemConfig& cfg, const quad::Options& quad_opt)
    : cfg_(cfg), dip_(dipole_vectors(cfg)) {
  cfg_.validate();
  A_ = coefficient_A(cfg_, quad_opt);
  omega0_perp_ = omega0_perp_scale(cfg_);

  const double d3 = cfg_.d * cfg_.d * cfg_.d;
  const double d6 = d3 * d3;
  const double R3 = cfg_.R * cfg_.R * cfg_.R;
  const double alpha0 = 4.0 * M_PI * R3;
  const double pi3 = M_PI * M_PI * M_PI;
  k12_ = A_ * alpha0 / (16.0 * pi3 * si.epsilon0 * d6 * cfg_.drude.omega_p);

  // E_d = A R^3 w0perp |gd|^2 / (2 pi^2 eps0 d^6 wp). The crossed scale uses
  // the product form 2 sqrt(2) kd gc gd, which stays finite for gd -> 0.
  const double kd = A_ * R3 * omega0_perp_ /
                    (2.0 * M_PI * M_PI * si.epsilon0 * d6 * cfg_.drude.omega_p);
  E_d_ = kd * std::norm(cfg_.gamma_d);
  E_cr_ = 2.0 * std::sqrt(2.0) * kd * cfg_.gamma_c * cfg_.gamma_d;
}

double HamiltonianModel::T_min() const {
  return E_d_ > 0.0 ? M_PI * si.hbar / E_d_
                    : std::numeric_limits<double>::infinity();
}

double HamiltonianModel::g_sp_physical() const {
  const double r = E_d_ / (si.m_e * si.c_light * si.c_light);
  return si.alpha_fs * (8.0 / 3.0) * r * r;
}

double HamiltonianModel::g_sp_effective() const {
  return cfg_.g_sp_override ? *cfg_.g_sp_override : g_sp_physical();
}

EffectiveHamiltonian HamiltonianModel::closed_form(const PureState& s) const {
  DensityMatrix r;
  r.rho << std::norm(s.c1), s.c1 * std::conj(s.c2),
           s.c2 * std::conj(s.c1), std::norm(s.c2);
  return closed_form(r);
}

EffectiveHamiltonian HamiltonianModel::closed_form(const DensityMatrix& r) const {
  const double sign = static_cast<double>(cfg_.handedness);
  const double inv = (r.rho(0, 0) - r.rho(1, 1)).real();
  // rho_ba with (a,b) = (1,2) for "+" and (2,1) for "-"
  const Complex rho_ba = cfg_.handedness > 0 ? r.rho(1, 0) : r.rho(0, 1);

  EffectiveHamiltonian H;
  H.A = A_;
  H.E_d = E_d_;
  H.E_cr = E_cr_;
  const double h11 = sign * E_d_ * inv;
  const Complex h12 = sign * E_cr_ * rho_ba;
  H.h << h11, h12, std::conj(h12), -h11;
  return H;
}

EffectiveHamiltonian HamiltonianModel::general_form(const PureState& s) const {
  return general_form(spin_state_to_cyclotron(s, cfg_));
}

EffectiveHamiltonian HamiltonianModel::general_form(const CyclotronState& cyc) const {
  const Complex i{0.0, 1.0};
  // i gd x gd* + i gc x gc* is real for any complex dipole vectors
  const Vec3 zeeman =
      (i * cross3<Complex>(dip_.gd_vec, dip_.gd_vec.conjugate()) +
       i * cross3<Complex>(dip_.gc_vec, dip_.gc_vec.conjugate()))
          .real();
  const double h11 = -k12_ * cyc.omega_ef.dot(zeeman);
  const Complex h12 =
      -2.0 * i * k12_ * bdot(cyc.omega_ef, cross3<Complex>(dip_.gc_vec, dip_.gd_vec));

  EffectiveHamiltonian H;
  H.A = A_;
  H.E_d = E_d_;
  H.E_cr = E_cr_;
  H.h << h11, h12, std::conj(h12), -h11;
  return H;
}

EffectiveHamiltonian HamiltonianModel::trace_identity_form(const CyclotronState& cyc) const {
  const QMatrixSet q = q_matrices(dip_);
  const Mat3c wx = cross_matrix<double>(cyc.omega_ef).cast<Complex>();
  const Complex mik = Complex(0.0, -1.0) * k12_;

  EffectiveHamiltonian H;
  H.A = A_;
  H.E_d = E_d_;
  H.E_cr = E_cr_;
  H.h << mik * (q.Q11 * wx).trace(), mik * (q.Q12 * wx).trace(),
         mik * (q.Q21 * wx).trace(), mik * (q.Q22 * wx).trace();
  return H;
}

EffectiveHamiltonian hamiltonian_quadrature(const CyclotronState& cyc,
                                            const SystemConfig& cfg,
                                            const quad::Options& opt) {
  const DipoleVectors dip = dipole_vectors(cfg);
  const QMatrixSet q = q_matrices(dip);
  const double w0 = cyc.omega0.norm();
  const Vec3 u = w0 > 0.0 ? Vec3(cyc.omega0 / w0) : z_hat;
  const Mat3 C = interaction_tensor(cfg.d);
  const double wa = cfg.omega_a;

  // G_S 2wa/(wa^2+xi^2) + i G_AS 2xi/(wa^2+xi^2) integrates to
  // int [G/(wa - i xi) + G^T/(wa + i xi)] for real G(i xi). The two parts are
  // integrated separately so each meets the tolerance on its own scale: the
  // symmetric (Lamb) part dwarfs the gyrotropic one by orders of magnitude,
  // and both come from the split closed form rather than a subtraction,
  // which would drown the small part in cancellation noise.
  const double alpha0 = 4.0 * M_PI * cfg.R * cfg.R * cfg.R;
  const Mat3 uu = outer<double>(u, u);
  const Mat3 one_t = Mat3::Identity() - uu;
  const double d3 = cfg.d * cfg.d * cfg.d;
  // C (u x 1) C = (w(u) x 1) / (16 pi^2 d^6)
  const Mat3 wx_over =
      cross_matrix<double>(w_vector(u)) / (16.0 * M_PI * M_PI * d3 * d3);

  auto integrand_sym = [&](double xi) -> Mat3 {
    const ImagAxisPermittivity p = permittivity_imag_axis(xi, w0, cfg.drude);
    const double ig = p.i_eps_g_over_w0 * w0;
    const double tp2 = p.eps_t + 2.0;
    const double dt = tp2 * tp2 + ig * ig;
    const Mat3 alpha_sym =
        alpha0 * (Mat3::Identity() - (3.0 * tp2 / dt) * one_t - 3.0 / (p.eps_a + 2.0) * uu);
    return (2.0 * wa / (wa * wa + xi * xi)) * (C * alpha_sym * C) / si.epsilon0;
  };
  auto integrand_asym = [&](double xi) -> Mat3 {
    const ImagAxisPermittivity p = permittivity_imag_axis(xi, w0, cfg.drude);
    const double ig = p.i_eps_g_over_w0 * w0;
    const double tp2 = p.eps_t + 2.0;
    const double alpha_as = alpha0 * 3.0 * ig / (tp2 * tp2 + ig * ig);
    return (2.0 * xi / (wa * wa + xi * xi)) * alpha_as / si.epsilon0 * wx_over;
  };

  quad::Outcome out_s, out_a;
  const Mat3 IS =
      quad::integrate_semi_infinite<Mat3>(integrand_sym, cfg.drude.omega_p, opt, &out_s);
  const Mat3 IA =
      quad::integrate_semi_infinite<Mat3>(integrand_asym, cfg.drude.omega_p, opt, &out_a);
  if (!out_s.converged || !out_a.converged)
    throw QuadratureError("hamiltonian_quadrature did not converge",
                          std::max(IS.norm(), IA.norm()),
                          std::max(out_s.error_bound, out_a.error_bound));
  const Mat3c integral =
      (IS.cast<Complex>() + Complex(0.0, 1.0) * IA.cast<Complex>()) / (2.0 * M_PI);

  // The dipole-model scales are not populated on this path; only h is.
  EffectiveHamiltonian H;
  H.h << -(q.Q11 * integral).trace(), -(q.Q12 * integral).trace(),
         -(q.Q21 * integral).trace(), -(q.Q22 * integral).trace();
  return H;
}

EffectiveHamiltonian hamiltonian_quadrature(const PureState& s, const SystemConfig& cfg,
                                            const quad::Options& opt) {
  return hamiltonian_quadrature(spin_state_to_cyclotron(s, cfg), cfg, opt);
}

Mat2c remove_trace(const Mat2c& h) {
  return h - 0.5 * h.trace() * Mat2c::Identity();
}

TimeReversalReport time_reversal_symmetry_check(const HamiltonianBuilder& builder,
                                                int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    Vec2c v;
    v << Complex(gauss(rng), gauss(rng)), Complex(gauss(rng), gauss(rng));
    if (v.norm() < 1e-8) {
      --k;
      continue;
    }
    v /= v.norm();
    const PureState s = PureState::from(v);
    const Mat2c h = builder(s);
    const Mat2c hr = builder(time_reverse(s));
    Mat2c expected;
    expected << std::conj(hr(1, 1)), -std::conj(hr(1, 0)),
                -std::conj(hr(0, 1)), std::conj(hr(0, 0));
    const double scale = h.norm();
    const double dev = (h - expected).norm();
    const double rel = scale > 0.0
                           ? dev / scale
                           : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    worst = std::max(worst, rel);
  }
  return {worst < 1e-10, worst};
}

}  // namespace kq
