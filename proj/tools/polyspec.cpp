// polyspec <kind> --config path [--seed N --workers K --out dir]
//
// Exit status: 0 all checks passed, 2 a statistical check failed, 1 error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyspec/errors.hpp"
#include "polyspec/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral statistics of random polymer models"};
  std::string kind, config_path, out_dir = "polyspec-out";
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  bool print_defaults = false;

  std::string kinds;
  for (const auto& k : polyspec::experiment_kinds()) kinds += (kinds.empty() ? "" : ", ") + k;
  app.add_option("kind", kind, "experiment kind: " + kinds)->required();
  app.add_option("--config", config_path, "JSON config with optional model, seed and params");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--print-defaults", print_defaults, "print the default config for <kind> and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    nlohmann::json file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw polyspec::ConfigError("--config", "cannot open " + config_path);
      try {
        file = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw polyspec::ConfigError("--config", e.what());
      }
    }
    polyspec::ExperimentConfig config = polyspec::make_config(kind, file);
    if (seed) config.seed = *seed;
    config.workers = workers;
    config.out_dir = out_dir;
    if (print_defaults) {
      std::cout << nlohmann::json{{"model", config.model}, {"seed", config.seed}, {"params", config.params}}.dump(2)
                << '\n';
      return 0;
    }

    const polyspec::RunReport report = polyspec::run(config);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& c : report.checks)
      std::cout << (c.passed ? "PASS" : (c.asserted ? "FAIL" : "NOTE")) << "  " << c.name << " = " << c.value << "  ("
                << c.requirement << ")\n";
    std::printf("%s  %s  hash %s  %.2f s\n", report.passed() ? "passed" : "FAILED", report.kind.c_str(),
                report.config_hash.c_str(), report.wall_seconds);
    for (const auto& f : report.files) std::cout << "wrote " << f << '\n';
    return report.passed() ? 0 : 2;
  } catch (const polyspec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
