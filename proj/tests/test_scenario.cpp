#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kq/constants.hpp"
#include "kq/errors.hpp"
#include "kq/scenario.hpp"

using namespace kq;

namespace {

const char* kGoodConfig = R"(# chiral-dominant example
[system]
d_nm = 5
R_nm = 2.5
f_p_THz = 1
gamma_over_omega_p = 0.1
m_star_over_m_e = 0.001
omega_a_over_omega_p = 50
gamma_d_debye = 100
gamma_c_ratio = 0.1
gamma_c_phase_deg = -90
handedness = -1

[initial]
pure = true
rho11 = 0.7
delta_phi_deg = 0

[run]
t_max_over_Tmin = 12
rtol = 1e-9
atol = 1e-12
sample_stride = 400
radiation = false
)";

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config parsing and unit conversion") {
  const ScenarioConfig cfg = parse_scenario(kGoodConfig, "good.cfg");
  CHECK(cfg.system.gamma_c_ratio == 0.1);
  CHECK(cfg.system.handedness == -1);
  CHECK(cfg.initial.rho11 == 0.7);
  CHECK(cfg.run.t_max_over_Tmin == 12.0);

  const SystemConfig sys = cfg.to_system();
  CHECK(sys.d == doctest::Approx(5e-9));
  CHECK(sys.drude.omega_p == doctest::Approx(2.0 * M_PI * 1e12));
  CHECK(sys.drude.gamma_coll == doctest::Approx(0.1 * sys.drude.omega_p));
  CHECK(sys.omega_a == doctest::Approx(50.0 * sys.drude.omega_p));
  CHECK(sys.gamma_d.real() == doctest::Approx(100.0 * si.debye));
  // gamma_c = ratio e^{i phase} gamma_d*: phase -90 deg means -i
  CHECK(sys.gamma_c.real() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sys.gamma_c.imag() == doctest::Approx(-0.1 * sys.gamma_d.real()));

  const PureState s0 = cfg.initial_pure();
  CHECK(std::norm(s0.c1) == doctest::Approx(0.7));
  CHECK(s0.norm2() == doctest::Approx(1.0));
}

TEST_CASE("config validation diagnostics") {
  SUBCASE("field range errors name the field") {
    std::string bad = kGoodConfig;
    const auto pos = bad.find("rho11 = 0.7");
    bad.replace(pos, 11, "rho11 = 1.2");
    CHECK_THROWS_WITH_AS(parse_scenario(bad, "bad.cfg"),
                         doctest::Contains("rho11"), ValidationError);
  }
  SUBCASE("unknown keys are rejected with their line number") {
    const std::string bad = std::string(kGoodConfig) + "typo_key = 3\n";
    try {
      parse_scenario(bad, "bad.cfg");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("typo_key") != std::string::npos);
      CHECK(msg.find("bad.cfg:") != std::string::npos);
    }
  }
  SUBCASE("malformed lines, sections, duplicates") {
    CHECK_THROWS_AS(parse_scenario("[system]\nnot a key value\n", "x"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("[bogus]\na = 1\n", "x"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("[system]\nd_nm = 5\nd_nm = 6\n", "x"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("d_nm = 5\n", "x"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("[system]\nd_nm = abc\n", "x"), ValidationError);
  }
  SUBCASE("physical invariants") {
    std::string bad = kGoodConfig;
    bad.replace(bad.find("R_nm = 2.5"), 10, "R_nm = 7.5");  // R > d
    CHECK_THROWS_AS(parse_scenario(bad, "x"), ValidationError);
  }
  SUBCASE("mixed-state positivity") {
    std::string cfg = kGoodConfig;
    cfg.replace(cfg.find("pure = true"), 11, "pure = false");
    cfg.replace(cfg.find("delta_phi_deg = 0"), 17, "rho12_re = 0.5");
    CHECK_THROWS_WITH_AS(parse_scenario(cfg, "x"), doctest::Contains("positivity"),
                         ValidationError);
  }
  SUBCASE("rho12 only applies to mixed states") {
    std::string cfg = kGoodConfig;
    cfg.replace(cfg.find("delta_phi_deg = 0"), 17, "rho12_re = 0.1");
    CHECK_THROWS_AS(parse_scenario(cfg, "x"), ValidationError);
  }
}

TEST_CASE("config echo round-trip") {
  const ScenarioConfig cfg = parse_scenario(kGoodConfig, "good.cfg");
  const std::string echo1 = cfg.echo();
  const ScenarioConfig back = parse_scenario(echo1, "echo");
  CHECK(back.echo() == echo1);
  // and a non-default optional field survives
  ScenarioConfig cfg2 = cfg;
  cfg2.run.g_sp_override = 0.05;
  cfg2.run.radiation = true;
  const ScenarioConfig back2 = parse_scenario(cfg2.echo(), "echo2");
  REQUIRE(back2.run.g_sp_override.has_value());
  CHECK(*back2.run.g_sp_override == 0.05);
}

TEST_CASE("figure presets") {
  CHECK(figure_preset_ids().size() == 13);
  for (const auto& id : figure_preset_ids()) {
    const FigurePreset p = figure_preset(id);
    CHECK(p.id == id);
    CHECK_NOTHROW(p.config.validate());
  }
  const FigurePreset p6a = figure_preset("6a");
  CHECK(p6a.config.run.radiation);
  REQUIRE(p6a.config.run.g_sp_override.has_value());
  CHECK(*p6a.config.run.g_sp_override == 0.05);
  const FigurePreset p4b = figure_preset("4b");
  CHECK(p4b.negative_branch);
  CHECK_FALSE(p4b.config.initial.pure);
  CHECK(p4b.config.initial.rho12_re == 0.18);

  try {
    figure_preset("9z");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2a") != std::string::npos);  // lists presets
  }
}

TEST_CASE("hydrogen-like dipole preset") {
  // the circular transition dominates by exactly sqrt(2)
  std::string cfg = kGoodConfig;
  cfg.replace(cfg.find("gamma_c_ratio = 0.1"), 19,
              "gamma_c_ratio = 0.70710678118654752");
  cfg.replace(cfg.find("gamma_c_phase_deg = -90"), 23, "gamma_c_phase_deg = 0");
  const SystemConfig sys = parse_scenario(cfg, "hydrogenlike").to_system();
  CHECK(std::abs(sys.gamma_d) ==
        doctest::Approx(std::sqrt(2.0) * std::abs(sys.gamma_c)).epsilon(1e-12));
  const auto dip = dipole_vectors(sys);
  CHECK((dip.s_dip1 + z_hat).norm() <= 1e-15);  // "-" handedness per the config
}

TEST_CASE("parameter report") {
  ScenarioConfig cfg;  // defaults = shared parameter block
  const ParameterReport r = make_report(cfg);
  CHECK(r.inv_T_min_Hz == doctest::Approx(63e3).epsilon(0.05));
  CHECK(r.omega0_perp_rad_s == doctest::Approx(2 * M_PI * 0.2e9).epsilon(0.05));
  CHECK(r.B0_T == doctest::Approx(7.4e-6).epsilon(0.05));
  CHECK(r.g_sp == doctest::Approx(1.3e-33).epsilon(0.10));
  CHECK(r.decay_time_years / 6e19 > 1.0 / 1.5);
  CHECK(r.decay_time_years / 6e19 < 1.5);
  // internal consistency
  CHECK(r.T_min_s == doctest::Approx(M_PI * si.hbar / r.E_d_J).epsilon(1e-12));
  CHECK(r.inv_T_min_Hz == doctest::Approx(1.0 / r.T_min_s).epsilon(1e-12));
  const double ratio = r.E_d_J / (si.m_e * si.c_light * si.c_light);
  CHECK(r.g_sp == doctest::Approx(si.alpha_fs * 8.0 / 3.0 * ratio * ratio).epsilon(1e-12));
  CHECK(r.Gamma_sp_peak_inv_s ==
        doctest::Approx(r.g_sp * 2.0 * r.E_d_J / si.hbar).epsilon(1e-12));

  SUBCASE("doubling d at fixed R scales the coupling as d^-9") {
    ScenarioConfig far = cfg;
    far.system.d_nm = 10.0;
    const ParameterReport r2 = make_report(far);
    CHECK(r2.omega0_perp_rad_s ==
          doctest::Approx(r.omega0_perp_rad_s / 8.0).epsilon(1e-12));
    CHECK(r2.E_d_J == doctest::Approx(r.E_d_J / 512.0).epsilon(1e-9));
    CHECK(r2.A == doctest::Approx(r.A).epsilon(1e-12));  // A is d-independent
  }
  SUBCASE("report text lists every scale") {
    const std::string text = format_report(r);
    for (const char* key : {"B0", "omega0_perp", "E_d", "T_min", "inv_T_min", "g_sp",
                            "Gamma_sp_peak", "decay_time"})
      CHECK(text.find(key) != std::string::npos);
  }
}

TEST_CASE("run scenario and writers") {
  SUBCASE("the chiral-only run is a time crystal with the latitude-law period") {
    const FigurePreset p = figure_preset("2a");
    const RunResult res = run_scenario(p.config);
    REQUIRE(res.traj.ok());
    CHECK(res.orbit.kind == OrbitKind::time_crystal);
    CHECK(res.orbit.period ==
          doctest::Approx(res.traj.T_min / 0.4).epsilon(1e-3));
    CHECK(res.summary.find("time_crystal") != std::string::npos);
  }
  SUBCASE("degenerate dipoles give a trivial stationary system") {
    ScenarioConfig cfg;
    cfg.system.gamma_d_debye = 0.0;
    cfg.system.gamma_c_ratio = 0.0;
    const RunResult res = run_scenario(cfg);
    REQUIRE(res.traj.ok());
    CHECK(res.orbit.kind == OrbitKind::stationary);
    for (const auto& smp : res.traj.samples) CHECK(smp.energy == 0.0);
  }
  SUBCASE("identical configs produce byte-identical output") {
    const ScenarioConfig cfg = parse_scenario(kGoodConfig, "good.cfg");
    const RunResult r1 = run_scenario(cfg);
    const RunResult r2 = run_scenario(cfg);
    CHECK(trajectory_csv(r1.traj, cfg, &r1.orbit) ==
          trajectory_csv(r2.traj, cfg, &r2.orbit));
    CHECK(trajectory_json(r1.traj, cfg, &r1.orbit) ==
          trajectory_json(r2.traj, cfg, &r2.orbit));
  }
  SUBCASE("csv header echoes a reparseable config") {
    const ScenarioConfig cfg = parse_scenario(kGoodConfig, "good.cfg");
    const RunResult res = run_scenario(cfg);
    const std::string csv = trajectory_csv(res.traj, cfg, &res.orbit);
    std::istringstream is(csv);
    std::string line, echoed;
    bool inside = false;
    while (std::getline(is, line)) {
      if (line == "# config-echo-end") inside = false;
      if (inside) echoed += line.substr(2) + "\n";
      if (line == "# config-echo-begin") inside = true;
    }
    const ScenarioConfig back = parse_scenario(echoed, "echoed");
    CHECK(back.echo() == cfg.echo());
    // data row count: samples + header lines
    CHECK(csv.find("# columns: t_s,tau,c1_re") != std::string::npos);
  }
  SUBCASE("json mirrors the same fields") {
    const ScenarioConfig cfg = parse_scenario(kGoodConfig, "good.cfg");
    const RunResult res = run_scenario(cfg);
    const auto j = nlohmann::json::parse(trajectory_json(res.traj, cfg, &res.orbit));
    CHECK(j["columns"].size() == 13);
    CHECK(j["samples"].size() == res.traj.samples.size());
    CHECK(j["T_min_s"].get<double>() == res.traj.T_min);
    CHECK(j["classification"] == "attractor_north");
  }
}

TEST_CASE("time-reversed branch mapping") {
  const FigurePreset p = figure_preset("4a");
  const ScenarioConfig& cfg = p.config;
  const HamiltonianModel model(cfg.to_system());
  EvolveOptions opt;
  opt.samples_per_Tref = 100;
  const Trajectory fwd =
      evolve_pure(time_reverse(cfg.initial_pure()), model, 10.0 * model.T_min(), opt);
  REQUIRE(fwd.ok());
  const Trajectory neg = time_reversed_branch(fwd);
  REQUIRE(neg.samples.size() == fwd.samples.size());
  CHECK(neg.samples.front().t < neg.samples.back().t);
  CHECK(neg.samples.back().t == 0.0);
  for (std::size_t k = 0; k < neg.samples.size(); ++k) {
    const auto& m = neg.samples[k];
    const auto& f = fwd.samples[fwd.samples.size() - 1 - k];
    REQUIRE(m.t == -f.t);
    REQUIRE((m.S.vec() + f.S.vec()).norm() <= 1e-14);
    // mapped state columns stay consistent with the mapped Bloch vector
    REQUIRE((bloch_map(sample_pure(m)).vec() - m.S.vec()).norm() <= 1e-12);
  }
}

TEST_CASE("sweep specs and execution") {
  const std::string spec_text = std::string(kGoodConfig) + R"(
[sweep]
args_deg = -90, 0, 90
ratios = 0.1, 0.2
handedness_values = -1
g_sp_values = 0
)";

  SUBCASE("parsing, explicit lists") {
    const SweepSpec spec = parse_sweep(spec_text, "spec");
    CHECK(spec.args_deg == std::vector<double>{-90.0, 0.0, 90.0});
    CHECK(spec.ratios == std::vector<double>{0.1, 0.2});
    CHECK(spec.size() == 6);
  }
  SUBCASE("parsing, linspace form") {
    const std::string lin = std::string(kGoodConfig) + R"(
[sweep]
arg_min_deg = -180
arg_max_deg = 180
arg_count = 9
ratio_min = 0.05
ratio_max = 0.4
ratio_count = 5
)";
    const SweepSpec spec = parse_sweep(lin, "spec");
    CHECK(spec.args_deg.size() == 9);
    CHECK(spec.args_deg.front() == -180.0);
    CHECK(spec.args_deg.back() == 180.0);
    CHECK(spec.ratios.size() == 5);
    CHECK(spec.handedness_values == std::vector<int>{-1});
  }
  SUBCASE("records carry the expected phenomenology") {
    SweepSpec spec = parse_sweep(spec_text, "spec");
    spec.base.run.t_max_over_Tmin = 120.0;
    const auto records = sweep_records(spec, 2);
    REQUIRE(records.size() == 6);
    // grid order: ratios x args; arg -90 -> north, 0 -> closed, +90 -> south
    CHECK(records[0].find("attractor_north") != std::string::npos);
    CHECK(records[1].find("time_crystal") != std::string::npos);
    CHECK(records[2].find("attractor_south") != std::string::npos);
    CHECK(records[3].find("attractor_north") != std::string::npos);
  }
  SUBCASE("serial equals parallel") {
    SweepSpec spec = parse_sweep(spec_text, "spec");
    spec.base.run.t_max_over_Tmin = 60.0;
    CHECK(sweep_records(spec, 1) == sweep_records(spec, 4));
  }
  SUBCASE("file driver writes deterministic records and resumes") {
    SweepSpec spec = parse_sweep(spec_text, "spec");
    spec.base.run.t_max_over_Tmin = 60.0;
    const std::string out1 = temp_path("kq_sweep_a.csv");
    const std::string out2 = temp_path("kq_sweep_b.csv");
    std::ostringstream log;
    run_sweep_file(spec, out1, 2, false, log);

    // simulate an interrupted run: pre-seed the manifest with two records
    const auto records = sweep_records(spec, 1);
    {
      std::ofstream mf(out2 + ".manifest");
      mf << 0 << '\t' << records[0] << '\n' << 3 << '\t' << records[3] << '\n';
    }
    run_sweep_file(spec, out2, 2, true, log);
    std::ifstream f1(out1), f2(out2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    CHECK_FALSE(std::filesystem::exists(out1 + ".manifest"));
    std::filesystem::remove(out1);
    std::filesystem::remove(out2);
  }
  SUBCASE("empty axes are rejected") {
    SweepSpec spec = parse_sweep(spec_text, "spec");
    spec.ratios.clear();
    CHECK_THROWS_AS(spec.validate(), ValidationError);
  }
}

#ifdef KQSIM_BIN
TEST_CASE("command-line interface exit codes") {
  const std::string bin = KQSIM_BIN;
  REQUIRE(std::filesystem::exists(bin));
  const std::string cfg_path = temp_path("kq_cli.cfg");
  {
    std::ofstream f(cfg_path);
    f << kGoodConfig;
  }
  const std::string out_path = temp_path("kq_cli_traj.csv");
  auto shell = [](const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  CHECK(shell(bin + " report " + cfg_path) == 0);
  CHECK(shell(bin + " run " + cfg_path + " --out " + out_path) == 0);
  CHECK(std::filesystem::exists(out_path));
  CHECK(shell(bin + " figure nosuch") == 1);
  CHECK(shell(bin + " run /nonexistent.cfg") == 1);
  CHECK(shell(bin + " nosubcommand") == 1);
  {
    std::ofstream f(cfg_path);
    std::string bad = kGoodConfig;
    bad.replace(bad.find("rho11 = 0.7"), 11, "rho11 = 1.2");
    f << bad;
  }
  CHECK(shell(bin + " run " + cfg_path) == 1);
  std::filesystem::remove(cfg_path);
  std::filesystem::remove(out_path);
}
#endif
