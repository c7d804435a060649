#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kq/constants.hpp"
#include "kq/dynamics.hpp"
#include "kq/errors.hpp"
#include "kq/scenario.hpp"

using namespace kq;

namespace {

HamiltonianModel make_model(int handedness, double ratio, double phase_deg) {
  ScenarioConfig cfg;
  cfg.system.handedness = handedness;
  cfg.system.gamma_c_ratio = ratio;
  cfg.system.gamma_c_phase_deg = phase_deg;
  return HamiltonianModel(cfg.to_system());
}

HamiltonianModel make_radiative(int handedness, double ratio, double phase_deg,
                                double g_sp) {
  ScenarioConfig cfg;
  cfg.system.handedness = handedness;
  cfg.system.gamma_c_ratio = ratio;
  cfg.system.gamma_c_phase_deg = phase_deg;
  cfg.run.radiation = true;
  cfg.run.g_sp_override = g_sp;
  return HamiltonianModel(cfg.to_system());
}

PureState latitude_state(double rho11, double dphi = 0.0) {
  return {Complex(std::sqrt(rho11), 0.0),
          std::sqrt(1.0 - rho11) * std::exp(Complex(0.0, dphi))};
}

PureState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec2c v;
  do {
    v << Complex(g(rng), g(rng)), Complex(g(rng), g(rng));
  } while (v.norm() < 1e-8);
  v /= v.norm();
  return PureState::from(v);
}

}  // namespace

TEST_CASE("bloch map and time reversal") {
  CHECK(bloch_map(PureState{1.0, 0.0}).z == 1.0);
  CHECK(bloch_map(DensityMatrix{}).norm() == 0.0);
  const auto S = bloch_map(latitude_state(0.7));
  CHECK(S.x == doctest::Approx(2.0 * std::sqrt(0.21)).epsilon(1e-14));
  CHECK(S.y == doctest::Approx(0.0));
  CHECK(S.z == doctest::Approx(0.4).epsilon(1e-14));

  const PureState s{Complex(0.3, -0.4), Complex(0.5, std::sqrt(0.5))};
  const PureState r = time_reverse(s);
  CHECK(r.c1 == -std::conj(s.c2));
  const PureState rr = time_reverse(r);
  CHECK(rr.c1 == -s.c1);  // T^2 = -1
  CHECK(rr.c2 == -s.c2);
  // antipodal Bloch image, pure and mixed forms
  CHECK((bloch_map(r).vec() + bloch_map(s).vec()).norm() <= 1e-15);
  const DensityMatrix rd = time_reverse(DensityMatrix::from_pure(s));
  CHECK((bloch_map(rd).vec() + bloch_map(s).vec()).norm() <= 1e-15);
}

TEST_CASE("analytic chiral-orbit solution") {
  const HamiltonianModel model = make_model(+1, 0.0, 0.0);
  const PureState s0 = latitude_state(0.7, 0.3);

  SUBCASE("t = 0 is the identity") {
    const PureState s = analytic_pure_chiral(s0, model, 0.0);
    CHECK(s.c1 == s0.c1);
    CHECK(s.c2 == s0.c2);
  }
  SUBCASE("the Bloch vector returns after one spin period") {
    const double T_spin = model.T_min() / 0.4;
    const PureState s = analytic_pure_chiral(s0, model, T_spin);
    CHECK((bloch_map(s).vec() - bloch_map(s0).vec()).norm() <= 1e-12);
    // state equal up to a global phase
    const Complex phase = s.c1 / s0.c1;
    CHECK(std::abs(std::abs(phase) - 1.0) <= 1e-14);
    CHECK(std::abs(s.c2 - phase * s0.c2) <= 1e-12);
  }
  SUBCASE("pole state only picks up a phase") {
    const PureState p = analytic_pure_chiral(PureState{1.0, 0.0}, model, 1e-5);
    const Complex want = std::exp(Complex(0.0, -model.E_d() / si.hbar * 1e-5));
    CHECK(std::abs(p.c1 - want) <= 1e-14);
    CHECK(p.c2 == Complex(0.0, 0.0));
  }
  SUBCASE("requires a vanishing linear dipole") {
    const HamiltonianModel with_gc = make_model(+1, 0.1, 0.0);
    CHECK_THROWS_AS(analytic_pure_chiral(s0, with_gc, 1.0), PreconditionError);
  }
}

TEST_CASE("pure-state evolution") {
  SUBCASE("matches the analytic orbit") {
    const HamiltonianModel model = make_model(+1, 0.0, 0.0);
    const PureState s0 = latitude_state(0.7);
    EvolveOptions opt;
    opt.rtol = 1e-10;
    opt.atol = 1e-13;
    const Trajectory traj = evolve_pure(s0, model, 5.0 * model.T_min() / 0.4, opt);
    REQUIRE(traj.ok());
    double dev = 0.0;
    for (const auto& smp : traj.samples) {
      const auto Sa = bloch_map(analytic_pure_chiral(s0, model, smp.t));
      dev = std::max(dev, (smp.S.vec() - Sa.vec()).norm());
    }
    CHECK(dev < 1e-7);
    CHECK(traj.norm_drift < 1e-9);
  }
  SUBCASE("equator start is stationary") {
    const HamiltonianModel model = make_model(-1, 0.0, 0.0);
    const Trajectory traj = evolve_pure(latitude_state(0.5), model, 8.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    const Vec3 S0 = traj.samples.front().S.vec();
    for (const auto& smp : traj.samples)
      REQUIRE((smp.S.vec() - S0).norm() <= 1e-9);
    CHECK(classify_orbit(traj).kind == OrbitKind::stationary);
  }
  SUBCASE("population climbs to the North pole for Im(gc/gd*) < 0") {
    const HamiltonianModel model = make_model(-1, 0.1, -90.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model, 60.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    double prev = 0.0;
    bool monotone = true;
    bool first = true;
    for (const auto& smp : traj.samples) {
      const double r11 = std::norm(sample_pure(smp).c1);
      if (!first && r11 < prev - 1e-12) monotone = false;
      prev = r11;
      first = false;
    }
    CHECK(monotone);
    CHECK(prev > 0.999);
  }
  SUBCASE("latitude is conserved for a chiral-only dipole") {
    const HamiltonianModel model = make_model(-1, 0.0, 0.0);
    const Trajectory traj = evolve_pure(latitude_state(0.8), model, 20.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    for (const auto& smp : traj.samples)
      REQUIRE(std::abs(smp.S.z - traj.samples.front().S.z) <= 1e-9);
  }
  SUBCASE("norm breach aborts with a partial trajectory") {
    const HamiltonianModel model = make_model(+1, 0.1, -90.0);
    EvolveOptions loose;
    loose.rtol = 1e-2;
    loose.atol = 1.0;
    loose.samples_per_Tref = 16;
    const Trajectory traj = evolve_pure(latitude_state(0.7), model,
                                        500.0 * model.T_min(), loose);
    CHECK_FALSE(traj.ok());
    CHECK(traj.status == RunStatus::norm_drift_exceeded);
    CHECK_FALSE(traj.samples.empty());
    CHECK_FALSE(traj.error.empty());
  }
}

TEST_CASE("density-matrix evolution") {
  SUBCASE("pure projector follows the pure-state integrator") {
    const HamiltonianModel model = make_model(-1, 0.1, -45.0);
    const PureState s0 = latitude_state(0.7, 0.4);
    EvolveOptions opt;
    opt.rtol = 1e-10;
    opt.atol = 1e-13;
    const double T = 20.0 * model.T_min();
    const Trajectory tp = evolve_pure(s0, model, T, opt);
    const Trajectory td = evolve_density(DensityMatrix::from_pure(s0), model, T, opt);
    REQUIRE(tp.ok());
    REQUIRE(td.ok());
    REQUIRE(tp.samples.size() == td.samples.size());
    double dev = 0.0;
    for (std::size_t k = 0; k < tp.samples.size(); ++k) {
      dev = std::max(dev, (tp.samples[k].S.vec() - td.samples[k].S.vec()).norm());
      const DensityMatrix r = sample_density(td.samples[k]);
      REQUIRE(r.hermiticity_defect() <= 1e-12);
      REQUIRE(r.min_eigenvalue() >= -1e-9);
    }
    CHECK(dev < 1e-7);
    CHECK(td.norm_drift < 1e-9);
  }
  SUBCASE("radiation contracts the orbit toward the equatorial plane") {
    const HamiltonianModel model = make_radiative(+1, 0.1, 0.0, 0.05);
    const Trajectory traj = evolve_density(
        DensityMatrix::from_pure(latitude_state(0.7)), model, 150.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    const auto& last = traj.samples.back();
    CHECK(std::abs(last.S.z) < 0.25);  // well below the initial 0.4
    const DensityMatrix rho_end = sample_density(last);
    CHECK((rho_end.rho * rho_end.rho).trace().real() < 0.999);  // mixing
    CHECK(traj.radiation_validity_flag == false);  // |gc| = 0.1 |gd| is within validity
  }
  SUBCASE("radiation drags a mixed state to the nearest pole") {
    const HamiltonianModel model = make_radiative(-1, 0.1, -90.0, 0.05);
    DensityMatrix rho0;
    rho0.rho << 0.7, 0.18, 0.18, 0.3;
    const Trajectory traj = evolve_density(rho0, model, 120.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    CHECK(traj.samples.back().S.z > 0.999);
    CHECK(classify_orbit(traj).kind == OrbitKind::attractor_north);
  }
}

TEST_CASE("pointwise observables") {
  const HamiltonianModel hp = make_model(+1, 0.0, 0.0);
  const HamiltonianModel hm = make_model(-1, 0.0, 0.0);
  const double Ed = hp.E_d();

  SUBCASE("precession frequency") {
    CHECK(precession_frequency(PureState{1.0, 0.0}, hp) ==
          doctest::Approx(2.0 * Ed / si.hbar).epsilon(1e-14));
    CHECK(precession_frequency(latitude_state(0.5), hp) == doctest::Approx(0.0));
    CHECK(precession_frequency(latitude_state(0.7), hm) ==
          doctest::Approx(-0.8 * Ed / si.hbar).epsilon(1e-13));
  }
  SUBCASE("energy expectation") {
    CHECK(energy_expectation(PureState{1.0, 0.0}, hp) == doctest::Approx(Ed));
    CHECK(energy_expectation(PureState{1.0, 0.0}, hm) == doctest::Approx(-Ed));
    const HamiltonianModel hr = make_model(+1, 0.2, 0.0);  // real E_cr
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(energy_expectation(PureState{r, r}, hr) ==
          doctest::Approx(hr.E_cr().real() / 2.0).epsilon(1e-12));
  }
  SUBCASE("energy polynomial equals the quadratic form") {
    const HamiltonianModel model = make_model(-1, 0.31, 141.0);
    std::mt19937_64 rng(23);
    for (int k = 0; k < 200; ++k) {
      const PureState s = random_state(rng);
      const double a = energy_expectation(s, model);
      const double b = energy_quadratic_form(s, model);
      REQUIRE(std::abs(a - b) <= 1e-14 * model.E_d());
    }
  }
  SUBCASE("canonical flow residual") {
    const HamiltonianModel model = make_model(+1, 0.4, -63.0);
    std::mt19937_64 rng(27);
    for (int k = 0; k < 50; ++k)
      REQUIRE(canonical_flow_residual(random_state(rng), model) < 1e-6);
  }
  SUBCASE("population drift rate") {
    const HamiltonianModel model = make_model(-1, 0.1, -90.0);
    CHECK(population_drift_rate(latitude_state(0.7), model) > 0.0);
    CHECK(population_drift_rate(PureState{1.0, 0.0}, model) == 0.0);
    // matches the explicit form for the negative-handedness system
    std::mt19937_64 rng(33);
    for (int k = 0; k < 100; ++k) {
      const PureState s = random_state(rng);
      const double want = -std::sqrt(2.0) * 4.0 * model.E_d() / si.hbar *
                          std::norm(s.c1) * std::norm(s.c2) *
                          (model.E_cr() / (2.0 * std::sqrt(2.0) * model.E_d())).imag();
      REQUIRE(population_drift_rate(s, model) ==
              doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("drift rate matches the integrated slope") {
    const HamiltonianModel model = make_model(-1, 0.1, -60.0);
    const PureState s0 = latitude_state(0.63, 0.8);
    EvolveOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-14;
    opt.samples_per_Tref = 2000;
    const Trajectory traj = evolve_pure(s0, model, model.T_min(), opt);
    REQUIRE(traj.ok());
    // five-point stencil around an interior sample
    const std::size_t k = 40;
    const double dt = traj.samples[1].t - traj.samples[0].t;
    auto r11 = [&](std::size_t i) { return std::norm(sample_pure(traj.samples[i]).c1); };
    const double slope = (-r11(k + 2) + 8.0 * r11(k + 1) - 8.0 * r11(k - 1) + r11(k - 2)) /
                         (12.0 * dt);
    const double rate = population_drift_rate(sample_pure(traj.samples[k]), model);
    CHECK(slope == doctest::Approx(rate).epsilon(1e-6));
  }
}

TEST_CASE("energy exchange for the negative-handedness system") {
  SUBCASE("real crossed scale conserves energy") {
    const HamiltonianModel model = make_model(-1, 0.1, 0.0);
    EvolveOptions opt;
    opt.rtol = 1e-11;
    opt.atol = 1e-14;
    opt.samples_per_Tref = 16;
    const Trajectory traj = evolve_pure(latitude_state(0.7), model,
                                        100.0 * model.T_min(), opt);
    REQUIRE(traj.ok());
    const double e0 = traj.samples.front().energy;
    double drift = 0.0;
    for (const auto& smp : traj.samples) drift = std::max(drift, std::abs(smp.energy - e0));
    // drift-rate budget 1e-9 E_d per T_min over the whole run
    CHECK(drift < 1e-9 * model.E_d() * 100.0);
  }
  SUBCASE("imaginary crossed scale dissipates toward the energy minimum") {
    const HamiltonianModel model = make_model(-1, 0.1, -90.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model,
                                        40.0 * model.T_min(), {});
    REQUIRE(traj.ok());
    const double e0 = traj.samples.front().energy;
    const double e1 = traj.samples.back().energy;
    CHECK(e1 < e0 - 1e-3 * model.E_d());  // monotone capture lowers <H->
    CHECK(e1 == doctest::Approx(-model.E_d()).epsilon(1e-3));
  }
}

TEST_CASE("radiation term") {
  const HamiltonianModel model = make_model(+1, 0.0, 0.0);

  SUBCASE("physical factor and pole rate") {
    const auto [rp, L] = radiation_term(DensityMatrix::from_pure(PureState{1.0, 0.0}), model);
    CHECK(rp.g_sp == doctest::Approx(1.3e-33).epsilon(0.10));
    CHECK(rp.Gamma_sp == doctest::Approx(rp.g_sp * 2.0 * model.E_d() / si.hbar));
    const double years = 1.0 / rp.Gamma_sp / (365.25 * 86400.0);
    CHECK(years / 6e19 > 1.0 / 1.5);
    CHECK(years / 6e19 < 1.5);
    CHECK(std::abs(L.trace()) <= 1e-30 * rp.Gamma_sp);
  }
  SUBCASE("balanced populations switch the loss off") {
    DensityMatrix rho;
    rho.rho << 0.5, 0.2, 0.2, 0.5;
    const auto [rp, L] = radiation_term(rho, model);
    CHECK(rp.Gamma_sp == 0.0);
    CHECK(rp.omega_m == 0.0);
    CHECK(L.norm() == 0.0);
  }
  SUBCASE("override replaces the physical factor") {
    const HamiltonianModel withg = make_radiative(+1, 0.0, 0.0, 0.05);
    const auto [rp, L] = radiation_term(DensityMatrix::from_pure(PureState{1.0, 0.0}), withg);
    CHECK(rp.g_sp == 0.05);
    CHECK(L(0, 0).real() == doctest::Approx(-rp.Gamma_sp));  // rt = rho11 = 1
  }
}

TEST_CASE("orbit classification") {
  SUBCASE("chiral-only orbit: period follows the latitude law") {
    const HamiltonianModel model = make_model(+1, 0.0, 0.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model, 8.0 * model.T_min(), {});
    const OrbitClass oc = classify_orbit(traj);
    REQUIRE(oc.kind == OrbitKind::time_crystal);
    CHECK(oc.period == doctest::Approx(model.T_min() / 0.4).epsilon(1e-3));
  }
  SUBCASE("negative handedness with -i gc/gd* is captured at the North pole") {
    const HamiltonianModel model = make_model(-1, 0.1, -90.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model, 80.0 * model.T_min(), {});
    CHECK(classify_orbit(traj).kind == OrbitKind::attractor_north);
  }
  SUBCASE("real crossed ratio keeps the orbit closed") {
    const HamiltonianModel model = make_model(-1, 0.1, 0.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model, 12.0 * model.T_min(), {});
    CHECK(classify_orbit(traj).kind == OrbitKind::time_crystal);
  }
  SUBCASE("a truncated capture run is reported undetermined with diagnostics") {
    const HamiltonianModel model = make_model(-1, 0.1, -90.0);
    const Trajectory traj = evolve_pure(latitude_state(0.7), model, 3.0 * model.T_min(), {});
    const OrbitClass oc = classify_orbit(traj);
    CHECK(oc.kind == OrbitKind::undetermined);
    CHECK_FALSE(oc.diagnostics.empty());
  }
  SUBCASE("precession senses are opposite for the two handedness values") {
    const Trajectory tp = evolve_pure(latitude_state(0.7), make_model(+1, 0.0, 0.0),
                                      8.0 * make_model(+1, 0.0, 0.0).T_min(), {});
    const Trajectory tm = evolve_pure(latitude_state(0.7), make_model(-1, 0.0, 0.0),
                                      8.0 * make_model(-1, 0.0, 0.0).T_min(), {});
    CHECK(visible_azimuth_turns(tp) > 0.5);
    CHECK(visible_azimuth_turns(tm) < -0.5);
  }
}

TEST_CASE("the isotropic dipole pattern freezes the ground subspace") {
  // |gc| = |gd|/sqrt(2) with a real ratio and negative handedness makes
  // E_cr = 2 E_d, and then H(c) c = -E_d c for every state
  const HamiltonianModel model = make_model(-1, 1.0 / std::sqrt(2.0), 0.0);
  CHECK(model.E_cr().real() == doctest::Approx(2.0 * model.E_d()).epsilon(1e-12));
  std::mt19937_64 rng(41);
  for (int k = 0; k < 200; ++k) {
    const PureState s = random_state(rng);
    REQUIRE(fixed_point_residual(s, model) <= 1e-12);
    REQUIRE(energy_quadratic_form(s, model) ==
            doctest::Approx(-model.E_d()).epsilon(1e-12));
  }
  const Trajectory traj = evolve_pure(latitude_state(0.8, 0.5), model,
                                      20.0 * model.T_min(), {});
  REQUIRE(traj.ok());
  CHECK(classify_orbit(traj).kind == OrbitKind::stationary);
}

TEST_CASE("fixed-point residuals") {
  const HamiltonianModel model = make_model(-1, 0.1, -90.0);
  CHECK(fixed_point_residual(PureState{1.0, 0.0}, model) <= 1e-12);
  CHECK(fixed_point_residual(PureState{0.0, 1.0}, model) <= 1e-12);
  CHECK(fixed_point_residual(latitude_state(0.7), model) > 1e-2);
  const Trajectory traj = evolve_pure(latitude_state(0.7), model, 60.0 * model.T_min(), {});
  REQUIRE(traj.ok());
  CHECK(fixed_point_residual(sample_pure(traj.samples.back()), model) < 1e-6);
}

TEST_CASE("trajectory sample invariants") {
  const HamiltonianModel model = make_model(+1, 0.2, 30.0);
  const Trajectory traj = evolve_pure(latitude_state(0.6, 1.1), model,
                                      10.0 * model.T_min(), {});
  REQUIRE(traj.ok());
  REQUIRE(traj.samples.size() > 16);
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& smp = traj.samples[k];
    if (k) REQUIRE(smp.t > traj.samples[k - 1].t);
    const auto S = bloch_map(sample_pure(smp));
    REQUIRE((S.vec() - smp.S.vec()).norm() <= 1e-12);
    REQUIRE(smp.S.norm() <= 1.0 + 1e-9);
    REQUIRE(std::abs(smp.S.norm() - 1.0) <= 1e-9);  // pure states stay on the sphere
  }
  CHECK(traj.delta_phi == doctest::Approx(1.1));
}

TEST_CASE("time-reversed trajectory identity") {
  const HamiltonianModel model = make_model(-1, 0.1, -90.0);
  const PureState s0 = latitude_state(0.7, 0.4);
  EvolveOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-13;
  const double T = 10.0 * model.T_min();
  const Trajectory bwd = evolve_pure(s0, model, -T, opt);
  const Trajectory fwd = evolve_pure(time_reverse(s0), model, T, opt);
  REQUIRE(bwd.ok());
  REQUIRE(fwd.ok());
  REQUIRE(bwd.samples.size() == fwd.samples.size());
  for (std::size_t k = 0; k < bwd.samples.size(); ++k) {
    REQUIRE(bwd.samples[k].t == doctest::Approx(-fwd.samples[k].t));
    REQUIRE((fwd.samples[k].S.vec() + bwd.samples[k].S.vec()).norm() <= 1e-6);
  }
}
