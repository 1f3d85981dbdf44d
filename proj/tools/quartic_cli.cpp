#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "quartic/scenario.hpp"
#include "quartic/verify.hpp"

using namespace quartic;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

void diagnostic(const std::string& stage, const std::string& kind, const std::string& message) {
  nlohmann::json d{{"error", kind}, {"stage", stage}, {"message", message}};
  std::cerr << d.dump() << std::endl;
}

// Runs a verb body and maps exceptions onto the exit-code contract.
template <class F>
int guarded(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    diagnostic(stage, "config", e.what());
    return exit_config;
  } catch (const NearSingularError& e) {
    diagnostic(stage, "near_singular", e.what());
  } catch (const NumericalError& e) {
    diagnostic(stage, "numerical", e.what());
  } catch (const NotFoundError& e) {
    diagnostic(stage, "not_found", e.what());
  } catch (const DomainError& e) {
    diagnostic(stage, "domain", e.what());
  } catch (const ContractError& e) {
    diagnostic(stage, "contract", e.what());
  } catch (const std::exception& e) {
    diagnostic(stage, "runtime", e.what());
  }
  return exit_failure;
}

SampledPotential base_potential(const ScenarioConfig& c) {
  SampledPotential pot = build_potential(c.potential, c.grid);
  if (pot.is_zero()) throw ConfigError("'potential' is identically zero; nothing to tune or scan");
  return pot;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispersive-decay engine for the fourth-order operator (Delta^2 + V) on R^3"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides QUARTIC_THREADS)")
      ->check(CLI::PositiveNumber);

  std::string config_path, out_dir = ".", scan_out, suite;
  bool quiet = false;
  double ker_tol = 0.0;

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write <name>.csv/.json/.txt");
  run->add_option("config", config_path, "Scenario config (JSON)")->required();
  run->add_option("-o,--out", out_dir, "Output directory");
  run->add_flag("-q,--quiet", quiet, "No progress lines");

  CLI::App* verify = app.add_subcommand("verify", "Run invariant suites and print a table");
  verify->add_option("suite", suite, "kernels | oscillatory | threshold | all")->required();
  verify->add_option("--ker-tol", ker_tol, "Kernel tolerance for the threshold fixtures");

  CLI::App* tune = app.add_subcommand("tune", "Locate the first resonant coupling in the bracket");
  tune->add_option("config", config_path, "Scenario config (JSON)")->required();

  CLI::App* scan = app.add_subcommand("scan", "Coupling scan of sigma_min(QTQ) as CSV");
  scan->add_option("config", config_path, "Scenario config (JSON)")->required();
  scan->add_option("-o,--out", scan_out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }
  if (threads > 0) setenv("QUARTIC_THREADS", std::to_string(threads).c_str(), 1);

  if (*run)
    return guarded("run", [&] {
      const ScenarioConfig config = ScenarioConfig::load(config_path);
      const ScenarioResult result = run_scenario(config, quiet ? nullptr : &std::cerr);
      for (const auto& p : write_outputs(result, out_dir))
        if (!quiet) std::cerr << "wrote " << p.string() << "\n";
      std::cout << to_report(result);
      return result.passed() ? exit_ok : exit_failure;
    });

  if (*verify)
    return guarded("verify", [&] {
      const auto results = run_verify(suite, VerifyOptions{ker_tol});
      std::cout << format_table(results);
      for (const auto& r : results)
        if (!r.pass) return exit_failure;
      return exit_ok;
    });

  if (*tune)
    return guarded("tune", [&] {
      const ScenarioConfig config = ScenarioConfig::load(config_path);
      const TuneResult t = tune_to_resonance(base_potential(config), config.tune.bracket,
                                             config.tune.tol);
      nlohmann::json j{{"scenario", config.name},
                       {"coupling", t.coupling},
                       {"sigma_min", t.sigma_min},
                       {"iterations", t.iterations}};
      std::cout << j.dump(2) << std::endl;
      return exit_ok;
    });

  return guarded("scan", [&] {
    const ScenarioConfig config = ScenarioConfig::load(config_path);
    const auto couplings = geometric_grid(config.scan.c_min, config.scan.c_max, config.scan.points);
    const auto samples = coupling_scan(base_potential(config), couplings);
    std::ostringstream os;
    os << std::setprecision(17) << "coupling,sigma_min,negative\n";
    for (const auto& s : samples) os << s.coupling << ',' << s.sigma_min << ',' << s.negative << '\n';
    if (scan_out.empty())
      std::cout << os.str();
    else
      write_atomic(scan_out, os.str());
    return exit_ok;
  });
}
