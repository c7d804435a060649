#include "kq/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kq/constants.hpp"
#include "kq/errors.hpp"

namespace kq {

namespace {

constexpr double kNormAbortThreshold = 1e-6;
constexpr double kPositivityAbortThreshold = 1e-6;

struct TimeGrid {
  double E_scale;  // [J]; tau = E_scale t / hbar
  double T_ref;    // [s]
  std::vector<double> tau_times;
  double tau_span;
};

TimeGrid make_grid(const HamiltonianModel& model, double t_span, int samples_per_Tref) {
  TimeGrid g;
  const double Ed = model.E_d();
  g.E_scale = Ed > 0.0 ? Ed : si.hbar;  // degenerate model: tau = t in seconds
  g.T_ref = Ed > 0.0 ? model.T_min() : 1.0;
  g.tau_span = t_span * g.E_scale / si.hbar;

  const double n_ref = std::abs(t_span) / g.T_ref;
  std::int64_t n = static_cast<std::int64_t>(std::ceil(n_ref * samples_per_Tref));
  n = std::clamp<std::int64_t>(n, 16, 4'000'000);
  g.tau_times.resize(static_cast<std::size_t>(n) + 1);
  for (std::int64_t k = 0; k <= n; ++k)
    g.tau_times[static_cast<std::size_t>(k)] =
        g.tau_span * static_cast<double>(k) / static_cast<double>(n);
  return g;
}

RadiationParams radiation_params_impl(double inversion, double h11,
                                      const HamiltonianModel& model) {
  RadiationParams rp;
  rp.omega_m = 2.0 * h11 / si.hbar;
  rp.g_sp = model.g_sp_effective();
  rp.Gamma_sp = rp.g_sp * (2.0 * model.E_d() / si.hbar) *
                std::pow(std::abs(inversion), 3);
  rp.gamma_m_mag = std::sqrt(2.0) * si.mu0 * si.hbar * si.e_charge / (2.0 * si.m_e);
  return rp;
}

Mat2c radiation_matrix(const Mat2c& rho, const RadiationParams& rp) {
  Mat2c L = Mat2c::Zero();
  if (rp.omega_m == 0.0 || rp.Gamma_sp == 0.0) return L;
  const Complex rt = rp.omega_m > 0.0 ? rho(0, 0) : -rho(1, 1);
  L << rt, rho(0, 1) / 2.0, rho(1, 0) / 2.0, -rt;
  return Mat2c(-rp.Gamma_sp * L);
}

RunStatus status_from_stats(const ode::IntegrationStats& st) {
  if (st.completed) return RunStatus::ok;
  if (st.error == "step size underflow") return RunStatus::step_underflow;
  return RunStatus::step_budget;
}

}  // namespace

PureState sample_pure(const TrajectorySample& s) {
  return {Complex(s.state[0], s.state[1]), Complex(s.state[2], s.state[3])};
}

DensityMatrix sample_density(const TrajectorySample& s) {
  DensityMatrix r;
  const Complex r12(s.state[1], s.state[2]);
  r.rho << s.state[0], r12, std::conj(r12), s.state[3];
  return r;
}

Trajectory evolve_pure_with(const HamiltonianBuilder& builder, const PureState& s0,
                            const HamiltonianModel& scales, double t_span,
                            const EvolveOptions& opt) {
  const TimeGrid grid = make_grid(scales, t_span, opt.samples_per_Tref);
  const double Es = grid.E_scale;

  Trajectory traj;
  traj.pure = true;
  traj.system = scales.config();
  traj.T_min = scales.T_min();
  traj.E_d = scales.E_d();
  traj.delta_phi = std::arg(s0.c2) - std::arg(s0.c1);
  traj.radiation_validity_flag = scales.config().radiation_enabled &&
                                 std::abs(scales.config().gamma_c) >
                                     0.2 * std::abs(scales.config().gamma_d);
  traj.samples.reserve(grid.tau_times.size());

  auto rhs = [&](double, const Vec2c& c) -> Vec2c {
    const Mat2c h = builder(PureState::from(c));
    return Complex(0.0, -1.0) * ((h / Es) * c);
  };

  bool aborted = false;
  auto record = [&](double tau, const Vec2c& c) -> bool {
    TrajectorySample s;
    s.tau = tau;
    s.t = tau * si.hbar / Es;
    s.state = {c(0).real(), c(0).imag(), c(1).real(), c(1).imag()};
    const PureState ps = PureState::from(c);
    s.S = bloch_map(ps);
    const Mat2c h = builder(ps);
    s.energy = (c.adjoint() * h * c)(0).real();
    const double h11 = h(0, 0).real();
    s.omega_m = (h(0, 0) - h(1, 1)).real() / si.hbar;
    const RadiationParams rp = radiation_params_impl(s.S.z, h11, scales);
    s.Gamma_sp = rp.Gamma_sp;
    traj.samples.push_back(s);

    const double drift = std::abs(ps.norm2() - 1.0);
    traj.norm_drift = std::max(traj.norm_drift, drift);
    if (drift > kNormAbortThreshold) {
      aborted = true;
      return false;
    }
    return !(opt.stop && opt.stop(s));
  };

  Vec2c y = s0.vec();
  ode::StepperOptions sopt;
  sopt.rtol = opt.rtol;
  sopt.atol = opt.atol;
  traj.stats = ode::integrate(rhs, y, 0.0, grid.tau_span, grid.tau_times, record, sopt);

  if (aborted) {
    traj.status = RunStatus::norm_drift_exceeded;
    traj.error = "norm drift exceeded 1e-6; integration aborted";
  } else {
    traj.status = status_from_stats(traj.stats);
    traj.error = traj.stats.error;
  }
  return traj;
}

Trajectory evolve_pure(const PureState& s0, const HamiltonianModel& model,
                       double t_span, const EvolveOptions& opt) {
  return evolve_pure_with(
      [&model](const PureState& s) { return model.closed_form(s).h; }, s0, model,
      t_span, opt);
}

Trajectory evolve_density(const DensityMatrix& r0, const HamiltonianModel& model,
                          double t_span, const EvolveOptions& opt) {
  const TimeGrid grid = make_grid(model, t_span, opt.samples_per_Tref);
  const double Es = grid.E_scale;
  const bool radiate = model.config().radiation_enabled;

  Trajectory traj;
  traj.pure = false;
  traj.system = model.config();
  traj.T_min = model.T_min();
  traj.E_d = model.E_d();
  traj.radiation_validity_flag =
      radiate && std::abs(model.config().gamma_c) > 0.2 * std::abs(model.config().gamma_d);
  traj.samples.reserve(grid.tau_times.size());

  auto rhs = [&](double, const Mat2c& rho) -> Mat2c {
    DensityMatrix r;
    r.rho = rho;
    const Mat2c h = model.closed_form(r).h / Es;
    Mat2c dr = Complex(0.0, -1.0) * (h * rho - rho * h);
    if (radiate) {
      const double inv = (rho(0, 0) - rho(1, 1)).real();
      const RadiationParams rp =
          radiation_params_impl(inv, (h * Es)(0, 0).real(), model);
      dr += radiation_matrix(rho, rp) * (si.hbar / Es);
    }
    return dr;
  };

  bool aborted = false;
  auto record = [&](double tau, const Mat2c& rho) -> bool {
    TrajectorySample s;
    s.tau = tau;
    s.t = tau * si.hbar / Es;
    s.state = {rho(0, 0).real(), rho(0, 1).real(), rho(0, 1).imag(), rho(1, 1).real()};
    DensityMatrix r;
    r.rho = rho;
    s.S = bloch_map(r);
    const Mat2c h = model.closed_form(r).h;
    s.energy = (h * rho).trace().real();
    const double h11 = h(0, 0).real();
    s.omega_m = (h(0, 0) - h(1, 1)).real() / si.hbar;
    const RadiationParams rp = radiation_params_impl(s.S.z, h11, model);
    s.Gamma_sp = rp.Gamma_sp;
    traj.samples.push_back(s);

    const double drift = std::abs(r.trace() - 1.0);
    traj.norm_drift = std::max(traj.norm_drift, drift);
    if (drift > kNormAbortThreshold) {
      aborted = true;
      traj.error = "trace drift exceeded 1e-6; integration aborted";
      traj.status = RunStatus::norm_drift_exceeded;
      return false;
    }
    if (r.min_eigenvalue() < -kPositivityAbortThreshold) {
      aborted = true;
      traj.error = "density matrix positivity violated beyond 1e-6";
      traj.status = RunStatus::positivity_violated;
      return false;
    }
    return !(opt.stop && opt.stop(s));
  };

  Mat2c y = r0.rho;
  ode::StepperOptions sopt;
  sopt.rtol = opt.rtol;
  sopt.atol = opt.atol;
  traj.stats = ode::integrate(rhs, y, 0.0, grid.tau_span, grid.tau_times, record, sopt);

  if (!aborted) {
    traj.status = status_from_stats(traj.stats);
    traj.error = traj.stats.error;
  }
  return traj;
}

PureState analytic_pure_chiral(const PureState& s0, const HamiltonianModel& model,
                               double t) {
  if (std::abs(model.config().gamma_c) != 0.0)
    throw PreconditionError("analytic_pure_chiral requires gamma_c = 0");
  const double sign = static_cast<double>(model.config().handedness);
  const double inv = std::norm(s0.c1) - std::norm(s0.c2);
  const double phase = sign * model.E_d() / si.hbar * inv * t;
  const Complex i{0.0, 1.0};
  return {s0.c1 * std::exp(-i * phase), s0.c2 * std::exp(i * phase)};
}

double precession_frequency(const PureState& s, const HamiltonianModel& model) {
  const Mat2c h = model.closed_form(s).h;
  return (h(0, 0) - h(1, 1)).real() / si.hbar;
}

double precession_frequency(const DensityMatrix& r, const HamiltonianModel& model) {
  const Mat2c h = model.closed_form(r).h;
  return (h(0, 0) - h(1, 1)).real() / si.hbar;
}

double energy_expectation(const PureState& s, const HamiltonianModel& model) {
  const double sign = static_cast<double>(model.config().handedness);
  const double inv = std::norm(s.c1) - std::norm(s.c2);
  // crossed coherence: (c1* c2)^2 for the "+" system, |c1 c2|^2 for "-";
  // both follow from c* . H(c) . c with the respective h12
  const Complex x = model.config().handedness > 0
                        ? Complex(std::conj(s.c1) * s.c2 * std::conj(s.c1) * s.c2)
                        : Complex(std::norm(s.c1) * std::norm(s.c2), 0.0);
  const Complex cross = model.E_cr() * x;
  return sign * (model.E_d() * inv * inv + 2.0 * cross.real());
}

double energy_quadratic_form(const PureState& s, const HamiltonianModel& model) {
  const Vec2c c = s.vec();
  return (c.adjoint() * model.closed_form(s).h * c)(0).real();
}

double energy_expectation(const DensityMatrix& r, const HamiltonianModel& model) {
  return (model.closed_form(r).h * r.rho).trace().real();
}

double canonical_flow_residual(const PureState& s, const HamiltonianModel& model) {
  const double eps = 1e-6;
  auto energy = [&model](Complex c1, Complex c2) {
    return energy_expectation(PureState{c1, c2}, model);
  };
  // Wirtinger derivative d<H>/dc* = (dE/dx + i dE/dy)/2 per component
  auto wirtinger = [&](int comp) -> Complex {
    auto shifted = [&](Complex dc) {
      return comp == 0 ? energy(s.c1 + dc, s.c2) : energy(s.c1, s.c2 + dc);
    };
    const double dx = (shifted(Complex(eps, 0)) - shifted(Complex(-eps, 0))) / (2 * eps);
    const double dy = (shifted(Complex(0, eps)) - shifted(Complex(0, -eps))) / (2 * eps);
    return 0.5 * Complex(dx, dy);
  };
  const Vec2c c = s.vec();
  const Vec2c lhs = model.closed_form(s).h * c;  // = i hbar dc/dt
  Vec2c grad;
  grad << wirtinger(0), wirtinger(1);
  const double Ed = model.E_d();
  return (lhs - 0.5 * grad).norm() / (Ed > 0.0 ? Ed : 1.0);
}

double population_drift_rate(const PureState& s, const HamiltonianModel& model) {
  const Mat2c h = model.closed_form(s).h;
  const Complex r21 = s.c2 * std::conj(s.c1);
  return 2.0 / si.hbar * (h(0, 1) * r21).imag();
}

std::pair<RadiationParams, Mat2c> radiation_term(const DensityMatrix& r,
                                                 const HamiltonianModel& model) {
  const Mat2c h = model.closed_form(r).h;
  const double inv = (r.rho(0, 0) - r.rho(1, 1)).real();
  const RadiationParams rp = radiation_params_impl(inv, h(0, 0).real(), model);
  return {rp, radiation_matrix(r.rho, rp)};
}

double fixed_point_residual(const PureState& s, const HamiltonianModel& model) {
  const Vec2c c = s.vec();
  const Mat2c h = model.closed_form(s).h;
  const Complex mean = (c.adjoint() * h * c)(0);
  const double Ed = model.E_d();
  return (h * c - mean * c).norm() / (Ed > 0.0 ? Ed : 1.0);
}

const char* to_string(OrbitKind kind) {
  switch (kind) {
    case OrbitKind::time_crystal: return "time_crystal";
    case OrbitKind::attractor_north: return "attractor_north";
    case OrbitKind::attractor_south: return "attractor_south";
    case OrbitKind::stationary: return "stationary";
    case OrbitKind::plane_sz0: return "plane_Sz0";
    case OrbitKind::undetermined: return "undetermined";
  }
  return "undetermined";
}

OrbitClass classify_orbit(const Trajectory& traj, const ClassifyOptions& opt) {
  OrbitClass out;
  out.min_return_distance = std::numeric_limits<double>::infinity();
  const auto& ss = traj.samples;
  if (ss.size() < 8) {
    out.diagnostics = "too few samples";
    return out;
  }
  const std::size_t n = ss.size();
  const Vec3 S0 = ss.front().S.vec();

  double total_motion = 0.0;
  for (const auto& s : ss) total_motion = std::max(total_motion, (s.S.vec() - S0).norm());
  if (total_motion < opt.eps_orbit) {
    out.kind = OrbitKind::stationary;
    out.diagnostics = "total Bloch motion " + std::to_string(total_motion);
    return out;
  }

  // Poincare return: local minima of |S - S0|^2 past the period guard,
  // refined by a parabolic fit (samples are uniform in time).
  const double T_ref = std::isfinite(traj.T_min) ? traj.T_min : 0.0;
  const double guard = opt.min_period_frac * T_ref;
  std::vector<double> d2(n);
  for (std::size_t k = 0; k < n; ++k) d2[k] = (ss[k].S.vec() - S0).squaredNorm();

  double best_period = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (std::abs(ss[k].t) <= guard) continue;
    if (!(d2[k] <= d2[k - 1] && d2[k] <= d2[k + 1])) continue;
    const double denom = d2[k - 1] - 2.0 * d2[k] + d2[k + 1];
    double t_star = ss[k].t;
    double d2_min = d2[k];
    if (denom > 0.0) {
      const double dt = ss[k + 1].t - ss[k].t;
      const double delta = 0.5 * (d2[k - 1] - d2[k + 1]) / denom;
      t_star += delta * dt;
      d2_min = d2[k] - 0.125 * (d2[k - 1] - d2[k + 1]) * (d2[k - 1] - d2[k + 1]) / denom;
    }
    const double dmin = std::sqrt(std::max(0.0, d2_min));
    out.min_return_distance = std::min(out.min_return_distance, dmin);
    if (dmin < opt.eps_orbit) {
      best_period = std::abs(t_star);
      break;
    }
  }
  if (best_period > 0.0) {
    // guard against spirals: demand another pass near 2T when the run allows
    const double t_end = std::abs(ss.back().t);
    bool second_ok = true;
    if (2.2 * best_period <= t_end) {
      double dmin2 = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        const double tk = std::abs(ss[k].t);
        if (tk >= 1.8 * best_period && tk <= 2.2 * best_period)
          dmin2 = std::min(dmin2, std::sqrt(d2[k]));
      }
      second_ok = dmin2 < 10.0 * opt.eps_orbit;
    }
    if (second_ok) {
      out.kind = OrbitKind::time_crystal;
      out.period = best_period;
      out.diagnostics = "orbit closes within eps_orbit";
      return out;
    }
  }

  // sustained-tail criteria: |S_z| beyond a threshold from some time to the end
  const double dt_sample = std::abs(ss[1].t - ss[0].t);
  const double t_end = std::abs(ss.back().t);
  auto tail_duration = [&](auto&& outside) {
    double t_last_outside = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (outside(ss[k].S.z)) t_last_outside = std::abs(ss[k].t);
    return t_end - t_last_outside;
  };
  const double min_tail = std::max(0.25 * T_ref, 10.0 * dt_sample);

  const double zf = ss.back().S.z;
  if (std::abs(zf) > opt.pole_threshold) {
    const double sgn = zf > 0.0 ? 1.0 : -1.0;
    const double d_pole =
        tail_duration([&](double z) { return sgn * z <= opt.pole_threshold; });
    if (d_pole >= min_tail) {
      out.kind = zf > 0.0 ? OrbitKind::attractor_north : OrbitKind::attractor_south;
      out.diagnostics = "sustained |S_z| above " + std::to_string(opt.pole_threshold);
      return out;
    }
  }
  if (std::abs(zf) < opt.plane_threshold) {
    const double d_plane =
        tail_duration([&](double z) { return std::abs(z) >= opt.plane_threshold; });
    if (d_plane >= min_tail) {
      out.kind = OrbitKind::plane_sz0;
      out.diagnostics = "sustained |S_z| below " + std::to_string(opt.plane_threshold);
      return out;
    }
  }

  std::ostringstream diag;
  diag << "no criterion met: total motion " << total_motion
       << ", min return distance " << out.min_return_distance << ", final S_z "
       << ss.back().S.z;
  out.diagnostics = diag.str();
  return out;
}

double visible_azimuth_turns(const Trajectory& traj, double st_min) {
  const auto& ss = traj.samples;
  if (ss.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k < ss.size(); ++k) {
    const double r0 = std::hypot(ss[k - 1].S.x, ss[k - 1].S.y);
    const double r1 = std::hypot(ss[k].S.x, ss[k].S.y);
    if (r0 <= st_min || r1 <= st_min) continue;
    const double a0 = std::atan2(ss[k - 1].S.y, ss[k - 1].S.x);
    const double a1 = std::atan2(ss[k].S.y, ss[k].S.x);
    double da = a1 - a0;
    while (da > M_PI) da -= 2.0 * M_PI;
    while (da < -M_PI) da += 2.0 * M_PI;
    total += da;
  }
  return total / (2.0 * M_PI);
}

}  // namespace kq
