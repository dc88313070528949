#pragma once

#include <string>
#include <vector>

namespace dhcn {

/// Outcome of one built-in invariant check.
struct CheckResult {
  std::string module;     // which part of the library the invariant guards
  std::string invariant;  // what must hold
  bool passed = false;
  std::string detail;  // filled on failure, and with key numbers on success
};

/// Runs the full battery: gradient checks against finite differences, the
/// matrix-form vs double-sum propagation oracle, row-stochasticity of both
/// channels' operators, and an overfit smoke run. Everything is seed-fixed:
/// two invocations produce identical results.
///
/// grad_skew is added to one analytic gradient inside the gradient checks.
/// It exists so tests can prove the checks detect a broken backward rule;
/// real runs leave it at 0.
std::vector<CheckResult> run_selfchecks(double grad_skew = 0.0);

/// One `[PASS]`/`[FAIL]` line per check plus a summary line. No timings, so
/// the text is reproducible byte for byte.
std::string format_check_results(const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace dhcn
