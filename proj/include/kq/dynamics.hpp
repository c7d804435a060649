#pragma once

#include <array>
#include <string>
#include <vector>

#include "kq/coupling.hpp"
#include "kq/ode.hpp"

namespace kq {

/// Spin-precession radiation quantities at a given state.
struct RadiationParams {
  double omega_m = 0.0;      // precession frequency 2 h11 / hbar [rad/s]
  double Gamma_sp = 0.0;     // decay rate g_sp (2 E_d/hbar)|r11-r22|^3 [1/s]
  double g_sp = 0.0;         // dimensionless factor in effect
  double gamma_m_mag = 0.0;  // |gamma_m| = sqrt(2) mu0 hbar e / (2 me)
};

struct TrajectorySample {
  double t = 0.0;    // [s]
  double tau = 0.0;  // dimensionless E_d t / hbar
  // pure: {Re c1, Im c1, Re c2, Im c2}; mixed: {r11, Re r12, Im r12, r22}
  std::array<double, 4> state{};
  BlochVector S;
  double energy = 0.0;    // [J]
  double omega_m = 0.0;   // [rad/s]
  double Gamma_sp = 0.0;  // [1/s]
};

enum class RunStatus {
  ok,
  step_underflow,
  step_budget,
  norm_drift_exceeded,
  positivity_violated,
};

struct Trajectory {
  bool pure = true;
  std::vector<TrajectorySample> samples;
  SystemConfig system;  // snapshot of the generating configuration
  ode::IntegrationStats stats;
  RunStatus status = RunStatus::ok;
  std::string error;        // non-empty when status != ok; partial samples kept
  double norm_drift = 0.0;  // max |norm (or trace) - 1| seen at samples
  double T_min = 0.0;       // pi hbar / E_d [s]
  double E_d = 0.0;         // [J]
  double delta_phi = 0.0;   // initial relative phase arg(c2) - arg(c1) (pure)
  bool radiation_validity_flag = false;  // radiation on with |gc| > 0.2 |gd|

  bool ok() const { return status == RunStatus::ok; }
};

PureState sample_pure(const TrajectorySample& s);
DensityMatrix sample_density(const TrajectorySample& s);

struct EvolveOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  int samples_per_Tref = 400;  // uniform sampling density per T_min
  // optional early stop, evaluated at sample points
  std::function<bool(const TrajectorySample&)> stop;
};

/// Integrates i hbar dc/dt = H(c) c with H rebuilt from the instantaneous
/// state inside every stage evaluation. No renormalization is applied; norm
/// drift beyond 1e-6 aborts with a partial trajectory.
Trajectory evolve_pure(const PureState& s0, const HamiltonianModel& model,
                       double t_span, const EvolveOptions& opt = {});

/// Same dynamics driven by an arbitrary state -> 2x2 matrix builder [J].
/// Used by the symmetry checks and their deliberate-mutation harnesses.
Trajectory evolve_pure_with(const HamiltonianBuilder& builder, const PureState& s0,
                            const HamiltonianModel& scales, double t_span,
                            const EvolveOptions& opt = {});

/// Integrates d rho/dt = -(i/hbar)[H(rho), rho] (+ radiation when enabled).
/// Trace is conserved analytically by both terms; drift and positivity are
/// monitored at sample points.
Trajectory evolve_density(const DensityMatrix& r0, const HamiltonianModel& model,
                          double t_span, const EvolveOptions& opt = {});

/// Closed-orbit solution for gamma_c = 0: the moduli are constants and the
/// phases advance at -(+/-)E_d (|c1|^2-|c2|^2)/hbar. Throws PreconditionError
/// when the model has gamma_c != 0.
PureState analytic_pure_chiral(const PureState& s0, const HamiltonianModel& model,
                               double t);

/// omega_m = (h11 - h22)/hbar = (+/-) (2 E_d/hbar)(r11 - r22).
double precession_frequency(const PureState& s, const HamiltonianModel& model);
double precession_frequency(const DensityMatrix& r, const HamiltonianModel& model);

/// Energy expectation as the quartic polynomial in (c, c*):
///   <H+> = +[E_d (|c1|^2-|c2|^2)^2 + 2 Re{E_cr (c1* c2)^2}],
///   <H-> = -[E_d (|c1|^2-|c2|^2)^2 + 2 Re{E_cr} |c1 c2|^2].
/// Defined off the unit sphere as well (it generates the canonical flow of
/// the "+" system); equals the quadratic form c* . H(c) . c.
double energy_expectation(const PureState& s, const HamiltonianModel& model);
double energy_quadratic_form(const PureState& s, const HamiltonianModel& model);
double energy_expectation(const DensityMatrix& r, const HamiltonianModel& model);

/// || i hbar dc/dt - (1/2) d<H>/dc* || / E_d with a central finite-difference
/// gradient of the energy polynomial (Wirtinger derivative).
double canonical_flow_residual(const PureState& s, const HamiltonianModel& model);

/// d(r11)/dt = (2/hbar) Im{h12 r21}.
double population_drift_rate(const PureState& s, const HamiltonianModel& model);

/// Radiation parameters and the loss term L_m rho =
///   -Gamma_sp [[rt, r12/2], [r21/2, -rt]], rt = r11 (omega_m > 0),
///   -r22 (omega_m < 0); identically zero at omega_m = 0.
std::pair<RadiationParams, Mat2c> radiation_term(const DensityMatrix& r,
                                                 const HamiltonianModel& model);

/// || H(c) c - (c* . H(c) . c) c || / E_d; vanishes at nonlinear eigenstates.
double fixed_point_residual(const PureState& s, const HamiltonianModel& model);

enum class OrbitKind {
  time_crystal,
  attractor_north,
  attractor_south,
  stationary,
  plane_sz0,
  undetermined,
};

const char* to_string(OrbitKind kind);

struct ClassifyOptions {
  double eps_orbit = 1e-3;      // Poincare return radius on the Bloch sphere
  double pole_threshold = 0.999;
  double plane_threshold = 0.05;
  double min_period_frac = 0.05;  // guard, in units of T_min
  double trailing_frac = 0.10;    // window for "sustained" criteria
};

struct OrbitClass {
  OrbitKind kind = OrbitKind::undetermined;
  double period = 0.0;  // [s], set for time_crystal
  double min_return_distance = 0.0;
  std::string diagnostics;
};

OrbitClass classify_orbit(const Trajectory& traj, const ClassifyOptions& opt = {});

/// Signed azimuth revolutions of the Bloch vector accumulated only while the
/// transverse radius exceeds st_min (positive = counterclockwise about +z).
/// Distinguishes a visible precession spiral from a straight capture whose
/// turns happen at negligible radius.
double visible_azimuth_turns(const Trajectory& traj, double st_min = 0.05);

}  // namespace kq
