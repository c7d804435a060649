#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kq/checks.hpp"
#include "kq/errors.hpp"
#include "kq/scenario.hpp"

namespace {

// exit codes: 0 ok, 1 validation, 2 numerical, 3 internal
constexpr int kOk = 0, kValidation = 1, kNumerical = 2, kInternal = 3;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw kq::ValidationError("cannot open output file '" + path + "'");
  f << content;
}

kq::Trajectory merge_branches(const kq::Trajectory& neg, const kq::Trajectory& pos) {
  kq::Trajectory out = pos;
  out.samples = neg.samples;
  // the negative branch ends at t = 0, which the positive branch repeats
  for (std::size_t k = 1; k < pos.samples.size(); ++k)
    out.samples.push_back(pos.samples[k]);
  return out;
}

int run_command(const std::string& config_path, const std::string& out_path,
                const std::string& format) {
  const kq::ScenarioConfig cfg = kq::load_scenario(config_path);
  const kq::RunResult res = kq::run_scenario(cfg);
  const std::string content =
      format == "json" ? kq::trajectory_json(res.traj, cfg, &res.orbit)
                       : kq::trajectory_csv(res.traj, cfg, &res.orbit);
  write_file(out_path, content);
  std::cout << res.summary << "trajectory: " << out_path << "\n";
  return res.traj.ok() ? kOk : kNumerical;
}

int figure_command(const std::string& id, const std::string& out_dir) {
  const kq::FigurePreset preset = kq::figure_preset(id);
  const kq::ScenarioConfig& cfg = preset.config;
  const kq::RunResult res = kq::run_scenario(cfg);

  kq::Trajectory to_write = res.traj;
  if (preset.negative_branch && res.traj.ok()) {
    const kq::SystemConfig sys = cfg.to_system();
    const kq::HamiltonianModel model(sys);
    kq::EvolveOptions eopt;
    eopt.rtol = cfg.run.rtol;
    eopt.atol = cfg.run.atol;
    eopt.samples_per_Tref = cfg.run.sample_stride;
    const double T_ref = std::isfinite(model.T_min()) ? model.T_min() : 1.0;
    const double t_span = cfg.run.t_max_over_Tmin * T_ref;
    kq::Trajectory rev;
    if (cfg.initial.pure && !cfg.run.radiation)
      rev = kq::evolve_pure(kq::time_reverse(cfg.initial_pure()), model, t_span, eopt);
    else
      rev = kq::evolve_density(kq::time_reverse(cfg.initial_density()), model, t_span,
                               eopt);
    to_write = merge_branches(kq::time_reversed_branch(rev), res.traj);
  }

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/fig" + id + ".csv";
  write_file(path, kq::trajectory_csv(to_write, cfg, &res.orbit, preset.note));
  std::cout << "preset " << id << ": " << preset.note << "\n"
            << res.summary << "data: " << path << "\n";
  return res.traj.ok() ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kqsim - spin-bias-coupled qubit/nanoparticle dynamics simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path = "trajectory.csv", format = "csv";
  auto* run = app.add_subcommand("run", "integrate a configured system and classify the orbit");
  run->add_option("config", config_path, "config file ([system]/[initial]/[run])")
      ->required();
  run->add_option("--out", out_path, "output trajectory file");
  run->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  std::string fig_id, fig_dir = ".";
  auto* figure = app.add_subcommand("figure", "reproduce a named preset scenario");
  figure->add_option("id", fig_id, "preset id (see 'figure list')")->required();
  figure->add_option("--out", fig_dir, "output directory");

  std::string spec_path, sweep_out = "sweep.csv";
  int workers = 1;
  bool resume = false;
  auto* sweep = app.add_subcommand("sweep", "phase-diagram sweep over a parameter grid");
  sweep->add_option("spec", spec_path, "sweep spec file")->required();
  sweep->add_option("--out", sweep_out, "output records file");
  sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--resume", resume, "skip points listed in the manifest");

  std::string report_path;
  auto* report = app.add_subcommand("report", "print derived physical scales");
  report->add_option("config", report_path, "config file")->required();

  auto* selftest =
      app.add_subcommand("selftest", "run the full invariant and acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return run_command(config_path, out_path, format);
    if (*figure) {
      if (fig_id == "list") {
        for (const auto& id : kq::figure_preset_ids()) std::cout << id << "\n";
        return kOk;
      }
      return figure_command(fig_id, fig_dir);
    }
    if (*sweep) {
      const kq::SweepSpec spec = kq::load_sweep(spec_path);
      kq::run_sweep_file(spec, sweep_out, workers, resume, std::cout);
      return kOk;
    }
    if (*report) {
      const kq::ParameterReport rep = kq::make_report(kq::load_scenario(report_path));
      std::cout << format_report(rep);
      return kOk;
    }
    if (*selftest) return kq::checks::run_selftest(std::cout) == 0 ? kOk : kValidation;
  } catch (const kq::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const kq::PreconditionError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const kq::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
