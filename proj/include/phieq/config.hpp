#pragma once

#include <optional>

#include "phieq/games.hpp"
#include "phieq/learning.hpp"

namespace phieq {

extern const char* kLibraryVersion;

// FNV-1a over the canonical (sorted-key) dump.
std::string config_hash(const nlohmann::json& config);

struct RunReport {
  nlohmann::json report;  // written as <name>.report.json, keys sorted
  std::string csv;        // written as <name>.csv when non-empty
  std::string name;
  std::string summary;    // one line for stdout
  bool ok = true;
};

// Validates and dispatches one experiment config:
//   command: efp | equilibrium | regret | verify
// Unknown fields are rejected. Overrides replace the config's seed/epsilon.
RunReport run_experiment(const nlohmann::json& config,
                         std::optional<std::uint64_t> seed_override = std::nullopt,
                         std::optional<double> eps_override = std::nullopt);

// Runs and writes <out_dir>/<name>.report.json (+ .csv); timings live only in
// the JSON report so CSV bodies stay byte-identical across replays.
RunReport run_and_write(const nlohmann::json& config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override = std::nullopt,
                        std::optional<double> eps_override = std::nullopt);

}  // namespace phieq
