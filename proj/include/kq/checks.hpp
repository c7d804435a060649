#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kq::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Deliberate-mutation knobs. The suite must detect each tampering: a check
/// run under a hook is expected to fail, which the harness reports as the
/// detection working.
struct Hooks {
  // the relative minus between the populations in the bias z-component
  // becomes a plus (the classic term-level sign typo)
  bool bias_z_term_sign_error = false;
  double detuning_sigma_z = 0.0;        // constant Zeeman term added to h [J]
  std::optional<double> rtol_override;  // degrade the integrator tolerance
};

/// The nine acceptance criteria, one result each.
std::vector<CheckResult> acceptance_checks();

/// Module-level invariants and the mutation-detection checks.
std::vector<CheckResult> property_checks();

/// Individual checks reused by tests and by the mutation harness.
CheckResult check_headline_rate();
CheckResult check_bias_scale();
CheckResult check_radiation_factor();
CheckResult check_oracle_equivalence();
CheckResult check_analytic_dynamics();
CheckResult check_conservation_suite(const Hooks& hooks = {});
CheckResult check_phenomenology();
CheckResult check_symmetry_suite(const Hooks& hooks = {});
CheckResult check_sweep_determinism();

/// Runs acceptance + property checks, prints one line per check, returns the
/// number of failures.
int run_selftest(std::ostream& out);

}  // namespace kq::checks
