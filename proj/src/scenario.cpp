#include "kq/scenario.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kq/constants.hpp"
#include "kq/errors.hpp"

namespace kq {

const char* tool_version() { return "kqsim 0.1.0"; }

namespace {

constexpr double kYearSeconds = 365.25 * 86400.0;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// ---------------------------------------------------------------------------
// sectioned key = value parser with line-level diagnostics

struct IniEntry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

struct IniSection {
  std::map<std::string, IniEntry> entries;
  int line = 0;
};

struct Ini {
  std::map<std::string, IniSection> sections;
  std::string origin;

  const IniSection* find(const std::string& name) const {
    const auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ValidationError(origin + ":" + std::to_string(line) + ": " + msg);
  }

  const IniEntry* get(const std::string& section, const std::string& key) const {
    const IniSection* s = find(section);
    if (!s) return nullptr;
    const auto it = s->entries.find(key);
    if (it == s->entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  double get_double(const std::string& sec, const std::string& key, double dflt) const {
    const IniEntry* e = get(sec, key);
    if (!e) return dflt;
    try {
      std::size_t pos = 0;
      const double v = std::stod(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(e->line, "key '" + key + "': cannot parse '" + e->value + "' as a number");
    }
  }

  int get_int(const std::string& sec, const std::string& key, int dflt) const {
    const IniEntry* e = get(sec, key);
    if (!e) return dflt;
    try {
      std::size_t pos = 0;
      const int v = std::stoi(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(e->line, "key '" + key + "': cannot parse '" + e->value + "' as an integer");
    }
  }

  bool get_bool(const std::string& sec, const std::string& key, bool dflt) const {
    const IniEntry* e = get(sec, key);
    if (!e) return dflt;
    std::string v = e->value;
    for (auto& c : v) c = static_cast<char>(std::tolower(c));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(e->line, "key '" + key + "': cannot parse '" + e->value + "' as a boolean");
  }

  int get_handedness(const std::string& sec, const std::string& key, int dflt) const {
    const IniEntry* e = get(sec, key);
    if (!e) return dflt;
    const std::string& v = e->value;
    if (v == "+1" || v == "1" || v == "+") return +1;
    if (v == "-1" || v == "-") return -1;
    fail(e->line, "key '" + key + "': handedness must be +1 or -1");
  }

  std::vector<double> get_double_list(const std::string& sec, const std::string& key,
                                      std::vector<double> dflt) const {
    const IniEntry* e = get(sec, key);
    if (!e) return dflt;
    std::vector<double> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        fail(e->line, "key '" + key + "': cannot parse list item '" + item + "'");
      }
    }
    if (out.empty()) fail(e->line, "key '" + key + "': empty list");
    return out;
  }

  void reject_unused() const {
    for (const auto& [sname, sec] : sections)
      for (const auto& [key, entry] : sec.entries)
        if (!entry.used)
          fail(entry.line, "unknown key '" + key + "' in section [" + sname + "]");
  }
};

Ini parse_ini(const std::string& text, const std::string& origin,
              const std::set<std::string>& allowed_sections) {
  Ini ini;
  ini.origin = origin;
  std::istringstream is(text);
  std::string raw;
  std::string current;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = trim(raw);
    if (const auto hash = s.find('#'); hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') ini.fail(line, "malformed section header '" + s + "'");
      current = trim(s.substr(1, s.size() - 2));
      if (!allowed_sections.count(current))
        ini.fail(line, "unknown section [" + current + "]");
      ini.sections[current].line = line;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) ini.fail(line, "expected 'key = value', got '" + s + "'");
    if (current.empty()) ini.fail(line, "key outside of any section");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) ini.fail(line, "empty key");
    auto [it, inserted] = ini.sections[current].entries.emplace(key, IniEntry{value, line});
    if (!inserted) ini.fail(line, "duplicate key '" + key + "'");
  }
  return ini;
}

void read_scenario_sections(const Ini& ini, ScenarioConfig& cfg) {
  UserSystem& s = cfg.system;
  s.d_nm = ini.get_double("system", "d_nm", s.d_nm);
  s.R_nm = ini.get_double("system", "R_nm", s.R_nm);
  s.f_p_THz = ini.get_double("system", "f_p_THz", s.f_p_THz);
  s.gamma_over_omega_p = ini.get_double("system", "gamma_over_omega_p", s.gamma_over_omega_p);
  s.m_star_over_m_e = ini.get_double("system", "m_star_over_m_e", s.m_star_over_m_e);
  s.omega_a_over_omega_p = ini.get_double("system", "omega_a_over_omega_p", s.omega_a_over_omega_p);
  s.gamma_d_debye = ini.get_double("system", "gamma_d_debye", s.gamma_d_debye);
  s.gamma_c_ratio = ini.get_double("system", "gamma_c_ratio", s.gamma_c_ratio);
  s.gamma_c_phase_deg = ini.get_double("system", "gamma_c_phase_deg", s.gamma_c_phase_deg);
  s.handedness = ini.get_handedness("system", "handedness", s.handedness);

  InitialState& in = cfg.initial;
  in.pure = ini.get_bool("initial", "pure", in.pure);
  in.rho11 = ini.get_double("initial", "rho11", in.rho11);
  in.rho12_re = ini.get_double("initial", "rho12_re", in.rho12_re);
  in.rho12_im = ini.get_double("initial", "rho12_im", in.rho12_im);
  in.delta_phi_deg = ini.get_double("initial", "delta_phi_deg", in.delta_phi_deg);

  RunSettings& r = cfg.run;
  r.t_max_over_Tmin = ini.get_double("run", "t_max_over_Tmin", r.t_max_over_Tmin);
  r.rtol = ini.get_double("run", "rtol", r.rtol);
  r.atol = ini.get_double("run", "atol", r.atol);
  r.sample_stride = ini.get_int("run", "sample_stride", r.sample_stride);
  r.radiation = ini.get_bool("run", "radiation", r.radiation);
  if (ini.get("run", "g_sp_override"))
    r.g_sp_override = ini.get_double("run", "g_sp_override", 0.0);
}

}  // namespace

SystemConfig ScenarioConfig::to_system() const {
  SystemConfig sys;
  sys.d = system.d_nm * 1e-9;
  sys.R = system.R_nm * 1e-9;
  sys.drude.omega_p = 2.0 * M_PI * system.f_p_THz * 1e12;
  sys.drude.gamma_coll = system.gamma_over_omega_p * sys.drude.omega_p;
  sys.m_star = system.m_star_over_m_e * si.m_e;
  sys.omega_a = system.omega_a_over_omega_p * sys.drude.omega_p;
  sys.gamma_d = Complex(system.gamma_d_debye * si.debye, 0.0);
  const Complex phase =
      std::exp(Complex(0.0, system.gamma_c_phase_deg * M_PI / 180.0));
  sys.gamma_c = system.gamma_c_ratio * phase * std::conj(sys.gamma_d);
  sys.handedness = system.handedness;
  sys.radiation_enabled = run.radiation;
  sys.g_sp_override = run.g_sp_override;
  return sys;
}

PureState ScenarioConfig::initial_pure() const {
  const double r11 = initial.rho11;
  const double dphi = initial.delta_phi_deg * M_PI / 180.0;
  return {Complex(std::sqrt(r11), 0.0),
          std::sqrt(1.0 - r11) * std::exp(Complex(0.0, dphi))};
}

DensityMatrix ScenarioConfig::initial_density() const {
  if (initial.pure) return DensityMatrix::from_pure(initial_pure());
  DensityMatrix r;
  const Complex r12(initial.rho12_re, initial.rho12_im);
  r.rho << initial.rho11, r12, std::conj(r12), 1.0 - initial.rho11;
  return r;
}

void ScenarioConfig::validate() const {
  if (!(initial.rho11 >= 0.0 && initial.rho11 <= 1.0))
    throw ValidationError("initial.rho11 must lie in [0, 1], got " + fmtg(initial.rho11));
  if (initial.pure) {
    if (initial.rho12_re != 0.0 || initial.rho12_im != 0.0)
      throw ValidationError("initial.rho12_re/rho12_im apply to mixed states only");
  } else {
    const double r12sq = initial.rho12_re * initial.rho12_re +
                         initial.rho12_im * initial.rho12_im;
    if (r12sq > initial.rho11 * (1.0 - initial.rho11) + 1e-15)
      throw ValidationError("initial: |rho12|^2 must not exceed rho11*rho22 (positivity)");
  }
  if (!(run.t_max_over_Tmin > 0.0))
    throw ValidationError("run.t_max_over_Tmin must be > 0");
  if (!(run.rtol > 0.0) || !(run.atol > 0.0))
    throw ValidationError("run.rtol and run.atol must be > 0");
  if (run.sample_stride < 1)
    throw ValidationError("run.sample_stride must be >= 1");
  to_system().validate();
}

std::string ScenarioConfig::echo() const {
  std::ostringstream os;
  os << "[system]\n";
  os << "d_nm = " << fmtg(system.d_nm) << "\n";
  os << "R_nm = " << fmtg(system.R_nm) << "\n";
  os << "f_p_THz = " << fmtg(system.f_p_THz) << "\n";
  os << "gamma_over_omega_p = " << fmtg(system.gamma_over_omega_p) << "\n";
  os << "m_star_over_m_e = " << fmtg(system.m_star_over_m_e) << "\n";
  os << "omega_a_over_omega_p = " << fmtg(system.omega_a_over_omega_p) << "\n";
  os << "gamma_d_debye = " << fmtg(system.gamma_d_debye) << "\n";
  os << "gamma_c_ratio = " << fmtg(system.gamma_c_ratio) << "\n";
  os << "gamma_c_phase_deg = " << fmtg(system.gamma_c_phase_deg) << "\n";
  os << "handedness = " << (system.handedness > 0 ? "+1" : "-1") << "\n";
  os << "[initial]\n";
  os << "pure = " << (initial.pure ? "true" : "false") << "\n";
  os << "rho11 = " << fmtg(initial.rho11) << "\n";
  if (initial.pure) {
    os << "delta_phi_deg = " << fmtg(initial.delta_phi_deg) << "\n";
  } else {
    os << "rho12_re = " << fmtg(initial.rho12_re) << "\n";
    os << "rho12_im = " << fmtg(initial.rho12_im) << "\n";
  }
  os << "[run]\n";
  os << "t_max_over_Tmin = " << fmtg(run.t_max_over_Tmin) << "\n";
  os << "rtol = " << fmtg(run.rtol) << "\n";
  os << "atol = " << fmtg(run.atol) << "\n";
  os << "sample_stride = " << run.sample_stride << "\n";
  os << "radiation = " << (run.radiation ? "true" : "false") << "\n";
  if (run.g_sp_override)
    os << "g_sp_override = " << fmtg(*run.g_sp_override) << "\n";
  return os.str();
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  const Ini ini = parse_ini(text, origin, {"system", "initial", "run"});
  ScenarioConfig cfg;
  read_scenario_sections(ini, cfg);
  ini.reject_unused();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), path);
}

// ---------------------------------------------------------------------------
// figure presets

namespace {

ScenarioConfig preset_base() {
  ScenarioConfig cfg;  // UserSystem defaults are the shared parameter block
  cfg.initial.pure = true;
  cfg.initial.rho11 = 0.7;
  cfg.run.t_max_over_Tmin = 8.0;
  cfg.run.sample_stride = 400;
  return cfg;
}

}  // namespace

std::vector<std::string> figure_preset_ids() {
  return {"2a", "2b", "2c", "3a", "3bi", "3bii", "3biii",
          "4a", "4b", "5a", "5b", "6a", "6b"};
}

FigurePreset figure_preset(const std::string& id) {
  FigurePreset p;
  p.id = id;
  ScenarioConfig cfg = preset_base();
  auto& sys = cfg.system;

  if (id == "2a") {
    sys.handedness = +1;
    p.note = "closed precession orbit, positive handedness";
  } else if (id == "2b") {
    sys.handedness = -1;
    p.note = "closed precession orbit, negative handedness";
  } else if (id == "2c") {
    sys.handedness = -1;
    p.note = "rho12 phase advances 2 pi per precession period";
  } else if (id == "3a") {
    sys.handedness = +1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = -90.0;
    cfg.run.t_max_over_Tmin = 12.0;
    p.note = "wobbling but closed orbit";
  } else if (id == "3bi") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = 0.0;
    cfg.run.t_max_over_Tmin = 12.0;
    p.note = "real crossed ratio keeps the orbit closed";
  } else if (id == "3bii") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = 90.0;
    cfg.run.t_max_over_Tmin = 80.0;
    p.note = "capture at the South pole";
  } else if (id == "3biii") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = -90.0;
    cfg.run.t_max_over_Tmin = 80.0;
    p.note = "capture at the North pole";
  } else if (id == "4a") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = -90.0;
    cfg.run.t_max_over_Tmin = 40.0;
    p.negative_branch = true;
    p.note = "full orbit from the South repeller to the North attractor";
  } else if (id == "4b") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = -90.0;
    cfg.initial.pure = false;
    cfg.initial.rho12_re = 0.18;
    cfg.run.t_max_over_Tmin = 40.0;
    p.negative_branch = true;
    p.note = "mixed-state orbit between interior fixed points";
  } else if (id == "5a") {
    sys.handedness = +1;
    sys.gamma_c_ratio = 10.0;
    sys.gamma_c_phase_deg = -90.0;
    cfg.run.t_max_over_Tmin = 8.0;
    cfg.run.sample_stride = 4000;
    p.note = "closed orbits crossing both hemispheres";
  } else if (id == "5b") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 10.0;
    sys.gamma_c_phase_deg = -90.0;
    cfg.run.t_max_over_Tmin = 4.0;
    cfg.run.sample_stride = 4000;
    p.note = "capture at the North pole without visible precession";
  } else if (id == "6a") {
    sys.handedness = +1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = 0.0;
    cfg.run.radiation = true;
    cfg.run.g_sp_override = 0.05;
    cfg.run.t_max_over_Tmin = 4000.0;
    cfg.run.sample_stride = 40;
    p.note = "radiation drives the orbit into the S_z = 0 plane";
  } else if (id == "6b") {
    sys.handedness = -1;
    sys.gamma_c_ratio = 0.1;
    sys.gamma_c_phase_deg = -90.0;
    cfg.initial.pure = false;
    cfg.initial.rho12_re = 0.18;
    cfg.run.radiation = true;
    cfg.run.g_sp_override = 0.05;
    cfg.run.t_max_over_Tmin = 120.0;
    p.note = "radiation makes the North pole the single stable attractor";
  } else {
    std::string known;
    for (const auto& k : figure_preset_ids()) known += (known.empty() ? "" : ", ") + k;
    throw ValidationError("unknown figure preset '" + id + "'; known presets: " + known);
  }
  p.config = cfg;
  return p;
}

// ---------------------------------------------------------------------------
// derived-parameter report

ParameterReport make_report(const ScenarioConfig& cfg) {
  cfg.validate();
  const SystemConfig sys = cfg.to_system();
  const HamiltonianModel model(sys);

  ParameterReport r;
  r.A = model.A();
  r.omega0_perp_rad_s = model.omega0_perp();
  r.B0_T = model.omega0_perp() * sys.m_star / si.e_charge;
  r.E_d_J = model.E_d();
  r.E_cr_abs_J = std::abs(model.E_cr());
  r.E_cr_phase_deg = std::arg(model.E_cr()) * 180.0 / M_PI;
  r.T_min_s = model.T_min();
  r.inv_T_min_Hz = model.E_d() / (M_PI * si.hbar);
  r.g_sp = model.g_sp_effective();
  r.Gamma_sp_peak_inv_s = r.g_sp * 2.0 * model.E_d() / si.hbar;
  r.decay_time_years =
      r.Gamma_sp_peak_inv_s > 0.0 ? 1.0 / r.Gamma_sp_peak_inv_s / kYearSeconds
                                  : std::numeric_limits<double>::infinity();
  return r;
}

std::string format_report(const ParameterReport& r) {
  std::ostringstream os;
  auto row = [&os](const char* name, double v, const char* unit) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-22s = %.9e %s\n", name, v, unit);
    os << buf;
  };
  row("B0", r.B0_T, "T");
  row("omega0_perp", r.omega0_perp_rad_s, "rad/s");
  row("A", r.A, "");
  row("E_d", r.E_d_J, "J");
  row("E_cr_abs", r.E_cr_abs_J, "J");
  row("E_cr_phase", r.E_cr_phase_deg, "deg");
  row("T_min", r.T_min_s, "s");
  row("inv_T_min", r.inv_T_min_Hz, "Hz");
  row("g_sp", r.g_sp, "");
  row("Gamma_sp_peak", r.Gamma_sp_peak_inv_s, "1/s");
  row("decay_time", r.decay_time_years, "years");
  return os.str();
}

// ---------------------------------------------------------------------------
// run + writers

RunResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const SystemConfig sys = cfg.to_system();
  const HamiltonianModel model(sys);

  EvolveOptions eopt;
  eopt.rtol = cfg.run.rtol;
  eopt.atol = cfg.run.atol;
  eopt.samples_per_Tref = cfg.run.sample_stride;

  const double T_ref = std::isfinite(model.T_min()) ? model.T_min() : 1.0;
  const double t_span = cfg.run.t_max_over_Tmin * T_ref;

  RunResult out;
  if (cfg.initial.pure && !cfg.run.radiation)
    out.traj = evolve_pure(cfg.initial_pure(), model, t_span, eopt);
  else
    out.traj = evolve_density(cfg.initial_density(), model, t_span, eopt);
  out.orbit = classify_orbit(out.traj);

  std::ostringstream os;
  os << "classification: " << to_string(out.orbit.kind) << "\n";
  if (out.orbit.kind == OrbitKind::time_crystal) {
    os << "measured_period_s: " << fmt17(out.orbit.period) << "\n";
    if (std::isfinite(model.T_min()) && model.T_min() > 0.0)
      os << "measured_period_over_Tmin: " << fmt17(out.orbit.period / model.T_min())
         << "\n";
  }
  if (!out.traj.samples.empty()) {
    const auto& S = out.traj.samples.back().S;
    os << "final_bloch: " << fmt17(S.x) << " " << fmt17(S.y) << " " << fmt17(S.z)
       << "\n";
  }
  os << "status: " << (out.traj.ok() ? "ok" : out.traj.error) << "\n";
  out.summary = os.str();
  return out;
}

namespace {

void append_header(std::ostringstream& os, const Trajectory& traj,
                   const ScenarioConfig& cfg, const OrbitClass* orbit,
                   const std::string& note) {
  os << "# " << tool_version() << "\n";
  os << "# config-echo-begin\n";
  std::istringstream echo(cfg.echo());
  std::string line;
  while (std::getline(echo, line)) os << "# " << line << "\n";
  os << "# config-echo-end\n";
  if (!note.empty()) os << "# note = " << note << "\n";
  os << "# T_min_s = " << fmt17(traj.T_min) << "\n";
  os << "# E_d_J = " << fmt17(traj.E_d) << "\n";
  if (traj.pure && !traj.samples.empty() && std::isfinite(traj.T_min)) {
    // predicted spin period from the initial inversion, the plot marker
    const double inv = std::abs(traj.samples.front().S.z);
    if (inv > 1e-12)
      os << "# T_spin_s = " << fmt17(traj.T_min / inv) << "\n";
  }
  os << "# norm_drift = " << fmt17(traj.norm_drift) << "\n";
  os << "# radiation_validity_flag = " << (traj.radiation_validity_flag ? 1 : 0)
     << "\n";
  os << "# status = " << (traj.ok() ? "ok" : traj.error) << "\n";
  if (orbit) {
    os << "# classification = " << to_string(orbit->kind) << "\n";
    if (orbit->kind == OrbitKind::time_crystal)
      os << "# period_s = " << fmt17(orbit->period) << "\n";
  }
}

double sample_phase_rho12(const TrajectorySample& s, bool pure) {
  if (pure) {
    const Complex c1(s.state[0], s.state[1]);
    const Complex c2(s.state[2], s.state[3]);
    return std::arg(c1 * std::conj(c2));
  }
  return std::arg(Complex(s.state[1], s.state[2]));
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj, const ScenarioConfig& cfg,
                           const OrbitClass* orbit, const std::string& note) {
  std::ostringstream os;
  append_header(os, traj, cfg, orbit, note);
  os << "# columns: t_s,tau,"
     << (traj.pure ? "c1_re,c1_im,c2_re,c2_im" : "rho11,rho12_re,rho12_im,rho22")
     << ",Sx,Sy,Sz,energy_J,omega_m_rad_s,Gamma_sp_inv_s,phase_rho12\n";
  for (const auto& s : traj.samples) {
    os << fmt17(s.t) << ',' << fmt17(s.tau);
    for (const double v : s.state) os << ',' << fmt17(v);
    os << ',' << fmt17(s.S.x) << ',' << fmt17(s.S.y) << ',' << fmt17(s.S.z) << ','
       << fmt17(s.energy) << ',' << fmt17(s.omega_m) << ',' << fmt17(s.Gamma_sp)
       << ',' << fmt17(sample_phase_rho12(s, traj.pure)) << "\n";
  }
  return os.str();
}

std::string trajectory_json(const Trajectory& traj, const ScenarioConfig& cfg,
                            const OrbitClass* orbit, const std::string& note) {
  nlohmann::ordered_json j;
  j["tool"] = tool_version();
  j["config"] = cfg.echo();
  if (!note.empty()) j["note"] = note;
  j["T_min_s"] = traj.T_min;
  j["E_d_J"] = traj.E_d;
  j["norm_drift"] = traj.norm_drift;
  j["radiation_validity_flag"] = traj.radiation_validity_flag;
  j["status"] = traj.ok() ? "ok" : traj.error;
  if (orbit) {
    j["classification"] = to_string(orbit->kind);
    if (orbit->kind == OrbitKind::time_crystal) j["period_s"] = orbit->period;
  }
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const char* c : {"t_s", "tau"}) cols.push_back(c);
  if (traj.pure)
    for (const char* c : {"c1_re", "c1_im", "c2_re", "c2_im"}) cols.push_back(c);
  else
    for (const char* c : {"rho11", "rho12_re", "rho12_im", "rho22"}) cols.push_back(c);
  for (const char* c :
       {"Sx", "Sy", "Sz", "energy_J", "omega_m_rad_s", "Gamma_sp_inv_s", "phase_rho12"})
    cols.push_back(c);
  j["columns"] = cols;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& s : traj.samples) {
    auto row = nlohmann::ordered_json::array();
    row.push_back(s.t);
    row.push_back(s.tau);
    for (const double v : s.state) row.push_back(v);
    for (const double v : {s.S.x, s.S.y, s.S.z, s.energy, s.omega_m, s.Gamma_sp,
                           sample_phase_rho12(s, traj.pure)})
      row.push_back(v);
    rows.push_back(row);
  }
  j["samples"] = rows;
  return j.dump(1) + "\n";
}

Trajectory time_reversed_branch(const Trajectory& fwd) {
  Trajectory out = fwd;
  out.samples.clear();
  out.samples.reserve(fwd.samples.size());
  for (auto it = fwd.samples.rbegin(); it != fwd.samples.rend(); ++it) {
    TrajectorySample s = *it;
    s.t = -s.t;
    s.tau = -s.tau;
    s.S = {-s.S.x, -s.S.y, -s.S.z};
    s.omega_m = -s.omega_m;
    if (fwd.pure) {
      // psi(-t) = T^-1 psi'(t) = (c2'*, -c1'*)
      const Complex c1(s.state[0], s.state[1]);
      const Complex c2(s.state[2], s.state[3]);
      const Complex m1 = std::conj(c2);
      const Complex m2 = -std::conj(c1);
      s.state = {m1.real(), m1.imag(), m2.real(), m2.imag()};
    } else {
      // rho(-t): populations swap, coherence negates
      const double r11 = s.state[0], r22 = s.state[3];
      s.state = {r22, -s.state[1], -s.state[2], r11};
    }
    out.samples.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// sweep

void SweepSpec::validate() const {
  if (args_deg.empty() || ratios.empty() || handedness_values.empty() ||
      g_sp_values.empty())
    throw ValidationError("sweep: empty grid axis");
  for (const double a : args_deg)
    if (!std::isfinite(a)) throw ValidationError("sweep: non-finite arg value");
  for (const double r : ratios)
    if (!(r >= 0.0) || !std::isfinite(r))
      throw ValidationError("sweep: ratios must be finite and >= 0");
  for (const int h : handedness_values)
    if (h != 1 && h != -1) throw ValidationError("sweep: handedness must be +1 or -1");
  for (const double g : g_sp_values)
    if (!(g >= 0.0) || !std::isfinite(g))
      throw ValidationError("sweep: g_sp must be finite and >= 0");
  base.validate();
}

SweepSpec parse_sweep(const std::string& text, const std::string& origin) {
  const Ini ini = parse_ini(text, origin, {"system", "initial", "run", "sweep"});
  SweepSpec spec;
  spec.base.run.t_max_over_Tmin = 200.0;  // classification budget default
  read_scenario_sections(ini, spec.base);

  const bool has_list = ini.find("sweep") &&
                        ini.find("sweep")->entries.count("args_deg") > 0;
  if (has_list) {
    spec.args_deg = ini.get_double_list("sweep", "args_deg", {});
  } else {
    const double a0 = ini.get_double("sweep", "arg_min_deg", -180.0);
    const double a1 = ini.get_double("sweep", "arg_max_deg", 180.0);
    const int n = ini.get_int("sweep", "arg_count", 9);
    if (n < 1) throw ValidationError(origin + ": sweep.arg_count must be >= 1");
    for (int k = 0; k < n; ++k)
      spec.args_deg.push_back(n == 1 ? a0 : a0 + (a1 - a0) * k / (n - 1.0));
  }
  const bool has_ratio_list = ini.find("sweep") &&
                              ini.find("sweep")->entries.count("ratios") > 0;
  if (has_ratio_list) {
    spec.ratios = ini.get_double_list("sweep", "ratios", {});
  } else {
    const double r0 = ini.get_double("sweep", "ratio_min", 0.05);
    const double r1 = ini.get_double("sweep", "ratio_max", 0.4);
    const int n = ini.get_int("sweep", "ratio_count", 5);
    if (n < 1) throw ValidationError(origin + ": sweep.ratio_count must be >= 1");
    for (int k = 0; k < n; ++k)
      spec.ratios.push_back(n == 1 ? r0 : r0 + (r1 - r0) * k / (n - 1.0));
  }
  {
    const auto hs = ini.get_double_list("sweep", "handedness_values", {-1.0});
    for (const double h : hs) spec.handedness_values.push_back(h > 0 ? +1 : -1);
  }
  spec.g_sp_values = ini.get_double_list("sweep", "g_sp_values", {0.0});
  ini.reject_unused();
  spec.validate();
  return spec;
}

SweepSpec load_sweep(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open sweep spec '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_sweep(ss.str(), path);
}

std::string sweep_record_header() {
  return "index,handedness,g_sp,ratio,arg_deg,outcome,period_s,"
         "final_Sx,final_Sy,final_Sz,min_return_distance,diagnostics";
}

namespace {

struct GridPoint {
  std::size_t index;
  int handedness;
  double g_sp;
  double ratio;
  double arg_deg;
};

std::vector<GridPoint> make_grid(const SweepSpec& spec) {
  std::vector<GridPoint> grid;
  grid.reserve(spec.size());
  std::size_t idx = 0;
  for (const int h : spec.handedness_values)
    for (const double g : spec.g_sp_values)
      for (const double r : spec.ratios)
        for (const double a : spec.args_deg)
          grid.push_back({idx++, h, g, r, a});
  return grid;
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

std::string sweep_point_record(const SweepSpec& spec, const GridPoint& p) {
  ScenarioConfig cfg = spec.base;
  cfg.system.handedness = p.handedness;
  cfg.system.gamma_c_ratio = p.ratio;
  cfg.system.gamma_c_phase_deg = p.arg_deg;
  cfg.run.radiation = p.g_sp > 0.0;
  if (p.g_sp > 0.0)
    cfg.run.g_sp_override = p.g_sp;
  else
    cfg.run.g_sp_override.reset();

  std::string outcome = "undetermined";
  std::string diag;
  double period = 0.0;
  BlochVector Sf;
  double min_return = std::numeric_limits<double>::infinity();
  try {
    cfg.validate();
    const HamiltonianModel model(cfg.to_system());
    EvolveOptions eopt;
    eopt.rtol = cfg.run.rtol;
    eopt.atol = cfg.run.atol;
    eopt.samples_per_Tref = cfg.run.sample_stride;
    // early exit once a pole capture is certain
    eopt.stop = [](const TrajectorySample& s) { return std::abs(s.S.z) > 0.99999; };
    const double T_ref = std::isfinite(model.T_min()) ? model.T_min() : 1.0;
    Trajectory traj;
    if (cfg.initial.pure && !cfg.run.radiation)
      traj = evolve_pure(cfg.initial_pure(), model, cfg.run.t_max_over_Tmin * T_ref, eopt);
    else
      traj = evolve_density(cfg.initial_density(), model,
                            cfg.run.t_max_over_Tmin * T_ref, eopt);
    if (!traj.ok()) {
      diag = traj.error;
    } else {
      const OrbitClass oc = classify_orbit(traj);
      outcome = to_string(oc.kind);
      period = oc.period;
      min_return = oc.min_return_distance;
      diag = oc.diagnostics;
    }
    if (!traj.samples.empty()) Sf = traj.samples.back().S;
  } catch (const std::exception& e) {
    diag = e.what();
  }

  std::ostringstream os;
  os << p.index << ',' << (p.handedness > 0 ? "+1" : "-1") << ',' << fmt17(p.g_sp)
     << ',' << fmt17(p.ratio) << ',' << fmt17(p.arg_deg) << ',' << outcome << ','
     << fmt17(period) << ',' << fmt17(Sf.x) << ',' << fmt17(Sf.y) << ','
     << fmt17(Sf.z) << ',' << fmt17(min_return) << ',' << sanitize(diag);
  return os.str();
}

}  // namespace

std::vector<std::string> sweep_records(
    const SweepSpec& spec, int workers,
    const std::vector<std::pair<std::size_t, std::string>>& completed,
    const std::function<void(std::size_t, const std::string&)>& on_point) {
  const std::vector<GridPoint> grid = make_grid(spec);
  std::vector<std::string> records(grid.size());
  std::vector<char> done(grid.size(), 0);
  for (const auto& [idx, rec] : completed)
    if (idx < grid.size()) {
      records[idx] = rec;
      done[idx] = 1;
    }

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!done[k]) pending.push_back(k);

  workers = std::max(1, workers);
  std::atomic<std::size_t> cursor{0};
  std::mutex emit_mutex;
  auto work = [&]() {
    while (true) {
      const std::size_t slot = cursor.fetch_add(1);
      if (slot >= pending.size()) break;
      const std::size_t idx = pending[slot];
      std::string rec = sweep_point_record(spec, grid[idx]);
      {
        std::lock_guard<std::mutex> lock(emit_mutex);
        records[idx] = std::move(rec);
        if (on_point) on_point(idx, records[idx]);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return records;
}

int run_sweep_file(const SweepSpec& spec, const std::string& out_path, int workers,
                   bool resume, std::ostream& log) {
  spec.validate();
  const std::string manifest_path = out_path + ".manifest";

  std::vector<std::pair<std::size_t, std::string>> completed;
  if (resume) {
    std::ifstream mf(manifest_path);
    std::string line;
    while (std::getline(mf, line)) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      try {
        completed.emplace_back(std::stoul(line.substr(0, tab)), line.substr(tab + 1));
      } catch (const std::exception&) {
        // ignore malformed manifest lines
      }
    }
    if (!completed.empty())
      log << "resuming: " << completed.size() << " of " << spec.size()
          << " points already done\n";
  }

  std::ofstream mf(manifest_path, resume ? std::ios::app : std::ios::trunc);
  if (!mf) throw ValidationError("cannot open manifest '" + manifest_path + "'");
  auto on_point = [&mf](std::size_t idx, const std::string& rec) {
    mf << idx << '\t' << rec << '\n';
    mf.flush();
  };

  const auto records = sweep_records(spec, workers, completed, on_point);
  mf.close();

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open output '" + out_path + "'");
  out << "# " << tool_version() << "\n";
  out << "# config-echo-begin\n";
  std::istringstream echo(spec.base.echo());
  std::string line;
  while (std::getline(echo, line)) out << "# " << line << "\n";
  out << "# config-echo-end\n";
  out << "# grid: " << spec.handedness_values.size() << " handedness x "
      << spec.g_sp_values.size() << " g_sp x " << spec.ratios.size() << " ratios x "
      << spec.args_deg.size() << " args\n";
  out << sweep_record_header() << "\n";
  int undetermined = 0;
  for (const auto& rec : records) {
    out << rec << "\n";
    if (rec.find(",undetermined,") != std::string::npos) ++undetermined;
  }
  out.close();
  std::filesystem::remove(manifest_path);
  log << "sweep complete: " << records.size() << " points, " << undetermined
      << " undetermined -> " << out_path << "\n";
  return undetermined;
}

}  // namespace kq
