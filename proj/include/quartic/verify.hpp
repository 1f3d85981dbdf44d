#pragma once

#include <string>
#include <vector>

namespace quartic {

/// One checked invariant: pass iff measured <= tolerance.
struct InvariantResult {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;  // exception text when the check could not be evaluated
};

struct VerifyOptions {
  double ker_tol = 0.0;  // kernel tolerance for the threshold fixtures; <= 0: default
};

/// Suite names accepted by run_verify (besides "all").
std::vector<std::string> verify_suites();

/// Runs the named suite ("kernels", "oscillatory", "threshold" or "all"). Unknown names
/// raise ConfigError. Exceptions inside a check are recorded as failures.
std::vector<InvariantResult> run_verify(const std::string& suite, const VerifyOptions& options = {});

/// Fixed-width table with one row per invariant and a closing summary line.
std::string format_table(const std::vector<InvariantResult>& results);

}  // namespace quartic
