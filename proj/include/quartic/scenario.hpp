#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "quartic/potential.hpp"
#include "quartic/propagator.hpp"
#include "quartic/threshold.hpp"

namespace quartic {

inline constexpr int config_schema_version = 1;
inline constexpr int summary_schema_version = 1;

struct TimeGrid {
  double t_min = 1.0;
  double t_max = 1000.0;
  int points = 13;

  std::vector<double> values() const { return geometric_grid(t_min, t_max, points); }
};

struct TuneSettings {
  std::pair<double, double> bracket{0.1, 20.0};
  double tol = 1e-10;
};

struct ScanSettings {
  double c_min = 0.1;
  double c_max = 20.0;
  int points = 200;
};

/// Declarative description of one experiment; see schemas/scenario.schema.json.
struct ScenarioConfig {
  std::string name;
  PotentialSpec potential;
  GridSpec grid;
  std::optional<double> coupling;  // empty: tune to the first resonance
  TuneSettings tune;
  ScanSettings scan;
  double lambda0 = 0.05;
  int profile = 2;
  TimeGrid t_grid;
  std::vector<double> sigma_list{0.0};
  double lambda_max = 40.0;
  double ker_tol = 0.0;  // <= 0: default
  std::uint64_t seed = 0;

  Cutoff cutoff() const { return Cutoff(lambda0, profile); }

  /// Validates and converts; every violation raises ConfigError naming the offending key.
  static ScenarioConfig from_json(const nlohmann::json& j);
  /// Relative CSV paths in the potential are resolved against the config's directory.
  static ScenarioConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Fitted exponent compared with its target: either |exponent - target| <= tol
/// ("approx") or exponent >= target - tol ("at_least"); "info" rows are not gated.
struct ExponentCheck {
  double sigma = 0.0;
  Subtraction subtraction = Subtraction::none;
  DecayFit fit;
  double target = 0.0;
  double tol = 0.0;
  std::string rule;
  bool pass = true;
};

struct ScenarioResult {
  ScenarioConfig config;
  double coupling = 1.0;
  std::optional<TuneResult> tuned;
  bool free = false;
  Classification classification = Classification::Regular;
  int rank_S1 = 0;
  double norm_V_L1 = 0.0;
  int bound_states = 0;
  double scan_sigma_min = 0.0;
  std::vector<double> scan_flagged;
  double inversion_check = 0.0;  // max relative JN-vs-direct gap on seeded samples
  std::vector<std::pair<Subtraction, DecayReport>> reports;
  std::vector<ExponentCheck> checks;
  double sharpness = 0.0;  // resonant: subtracted sigma=2 minus unsubtracted sigma=0
  std::vector<std::string> failures;
  double seconds = 0.0;

  bool passed() const { return failures.empty(); }
};

/// Pipeline: potential -> (tune) -> threshold -> embedded-eigenvalue scan -> decay reports
/// with the subtractions that apply -> checks against the decay targets. Numerical failures
/// propagate as exceptions; an embedded-eigenvalue flag raises NumericalError before any
/// decay report is computed. `log` receives progress lines.
ScenarioResult run_scenario(const ScenarioConfig& config, std::ostream* log = nullptr);

/// Decay target for a weighted sup: min(3/4 + sigma/2, 5/4) when the leading t^{-3/4}
/// part is absent, otherwise 3/4.
double decay_target(double sigma, bool leading_removed);

std::string to_csv(const ScenarioResult& result);
nlohmann::json to_summary(const ScenarioResult& result);
std::string to_report(const ScenarioResult& result);

/// Writes <name>.csv, <name>.json and <name>.txt into dir, each via temp file + rename.
std::vector<std::filesystem::path> write_outputs(const ScenarioResult& result,
                                                 const std::filesystem::path& dir);

/// Writes text to path atomically (temp file in the same directory, then rename).
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace quartic
