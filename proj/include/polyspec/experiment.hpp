#pragma once

// Configured, reproducible experiment runs with CSV + JSON outputs.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace polyspec {

struct ExperimentConfig {
  std::string kind;
  nlohmann::json model;   // model_from_json input
  nlohmann::json params;  // kind-specific parameters, defaults filled in
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = ".";
};

const std::vector<std::string>& experiment_kinds();
nlohmann::json default_model(const std::string& kind);
nlohmann::json default_parameters(const std::string& kind);

// Builds a config from the parsed --config file, which may hold "model",
// "seed" and "params"; given params override the kind's defaults key by key.
ExperimentConfig make_config(const std::string& kind, const nlohmann::json& file);

// Empty when the config is valid; otherwise "field: message" diagnostics.
std::vector<std::string> validate(const ExperimentConfig& config);

// Hex FNV-1a hash of kind, model, params and seed (not workers or paths).
std::string config_hash(const ExperimentConfig& config);

struct Check {
  std::string name;
  double value = 0.0;
  std::string requirement;
  bool passed = false;
  bool asserted = true;  // informational checks do not affect the verdict
};

struct RunReport {
  std::string kind;
  std::string config_hash;
  nlohmann::json config;
  nlohmann::json statistics;
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> files;
  double wall_seconds = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
};

// Validates (ConfigError on failure), dispatches, and writes
// <out_dir>/<kind>.csv and <out_dir>/<kind>.json when write_files is set.
RunReport run(const ExperimentConfig& config, bool write_files = true);

}  // namespace polyspec
