#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kq/dynamics.hpp"

namespace kq {

const char* tool_version();

/// User-unit system block, field for field as in the config file. The only
/// unit conversion boundary in the program is to_system().
struct UserSystem {
  double d_nm = 5.0;
  double R_nm = 2.5;
  double f_p_THz = 1.0;              // ordinary frequency
  double gamma_over_omega_p = 0.1;
  double m_star_over_m_e = 0.001;
  double omega_a_over_omega_p = 50.0;
  double gamma_d_debye = 100.0;
  double gamma_c_ratio = 0.0;        // |gamma_c / gamma_d*|
  double gamma_c_phase_deg = 0.0;    // arg(gamma_c / gamma_d*)
  int handedness = +1;
};

struct InitialState {
  bool pure = true;
  double rho11 = 0.7;
  double rho12_re = 0.0;      // mixed only
  double rho12_im = 0.0;      // mixed only
  double delta_phi_deg = 0.0; // pure only
};

struct RunSettings {
  double t_max_over_Tmin = 8.0;
  double rtol = 1e-9;
  double atol = 1e-12;
  int sample_stride = 400;  // samples per T_min
  bool radiation = false;
  std::optional<double> g_sp_override;
};

struct ScenarioConfig {
  UserSystem system;
  InitialState initial;
  RunSettings run;

  SystemConfig to_system() const;
  PureState initial_pure() const;
  DensityMatrix initial_density() const;
  void validate() const;      // throws ValidationError
  std::string echo() const;   // canonical config text; parses back equivalent
};

ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& origin = "<config>");
ScenarioConfig load_scenario(const std::string& path);

/// Named figure presets: the shared parameter block plus per-figure overrides.
struct FigurePreset {
  std::string id;
  ScenarioConfig config;
  bool negative_branch = false;  // emit the t < 0 branch as well
  std::string note;
};

std::vector<std::string> figure_preset_ids();
FigurePreset figure_preset(const std::string& id);  // throws ValidationError

struct ParameterReport {
  double B0_T = 0.0;                // transverse bias field scale
  double omega0_perp_rad_s = 0.0;
  double A = 0.0;
  double E_d_J = 0.0;
  double E_cr_abs_J = 0.0;
  double E_cr_phase_deg = 0.0;
  double T_min_s = 0.0;
  double inv_T_min_Hz = 0.0;
  double g_sp = 0.0;
  double Gamma_sp_peak_inv_s = 0.0;
  double decay_time_years = 0.0;
};

ParameterReport make_report(const ScenarioConfig& cfg);
std::string format_report(const ParameterReport& r);

struct RunResult {
  Trajectory traj;
  OrbitClass orbit;
  std::string summary;  // classification, measured period, final Bloch point
};

RunResult run_scenario(const ScenarioConfig& cfg);

/// Delimiter-separated trajectory with a config-echo header; 17 significant
/// digits throughout, byte-stable for identical configs.
std::string trajectory_csv(const Trajectory& traj, const ScenarioConfig& cfg,
                           const OrbitClass* orbit = nullptr,
                           const std::string& note = {});
/// Structured-record variant mirroring the same fields.
std::string trajectory_json(const Trajectory& traj, const ScenarioConfig& cfg,
                            const OrbitClass* orbit = nullptr,
                            const std::string& note = {});

/// Map a trajectory through time reversal: t -> -t, S -> -S, states conjugated.
/// Produces the t < 0 branch of the full orbit from a forward run of the
/// time-reversed initial state.
Trajectory time_reversed_branch(const Trajectory& forward_of_reversed);

struct SweepSpec {
  ScenarioConfig base;              // [system]/[initial]/[run] defaults
  std::vector<double> args_deg;     // arg(gamma_c/gamma_d*) grid
  std::vector<double> ratios;       // |gamma_c/gamma_d| grid
  std::vector<int> handedness_values;
  std::vector<double> g_sp_values;  // 0 = radiation off

  void validate() const;
  std::size_t size() const {
    return args_deg.size() * ratios.size() * handedness_values.size() *
           g_sp_values.size();
  }
};

SweepSpec parse_sweep(const std::string& text, const std::string& origin = "<spec>");
SweepSpec load_sweep(const std::string& path);

std::string sweep_record_header();
/// One record per grid point, grid-index order, independent of worker count.
/// Points already listed in `completed` (index -> record) are not recomputed.
std::vector<std::string> sweep_records(
    const SweepSpec& spec, int workers,
    const std::vector<std::pair<std::size_t, std::string>>& completed = {},
    const std::function<void(std::size_t, const std::string&)>& on_point = {});

/// File driver with a completed-point manifest for resume. Returns the number
/// of failed ("undetermined" after error) points; the sweep itself continues
/// past per-point failures.
int run_sweep_file(const SweepSpec& spec, const std::string& out_path, int workers,
                   bool resume, std::ostream& log);

}  // namespace kq
