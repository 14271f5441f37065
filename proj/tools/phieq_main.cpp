// Batch experiment front door. Parses a config file (one run object or
// {"runs": [...]}), dispatches through the C API, and prints one summary
// line per run on stdout; results go to files under --out.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phieq/capi.h"

namespace {

struct RunOutcome {
  std::string summary;
  int status = PHIEQ_OK;
};

RunOutcome dispatch(const std::string& config_json, const std::string& out_dir,
                    long long seed_override, double eps_override) {
  RunOutcome out;
  int status = PHIEQ_OK;
  char* summary =
      phieq_run_config(config_json.c_str(), out_dir.c_str(), seed_override, eps_override, &status);
  out.status = status;
  if (summary != nullptr) {
    out.summary = summary;
    phieq_string_free(summary);
  } else {
    out.summary = std::string("error: ") + phieq_last_error();
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phieq experiment runner"};
  std::string config_path;
  std::string out_dir = ".";
  long long seed = -1;
  double epsilon = 0.0;
  bool quiet = false;
  int jobs = 1;
  app.add_option("--config", config_path, "Experiment config JSON file")->required();
  app.add_option("--out", out_dir, "Output directory (default .)");
  app.add_option("--seed", seed, "Seed override for every run");
  app.add_option("--epsilon", epsilon, "Epsilon override for every run");
  app.add_option("--jobs", jobs, "Parallel runs for config batches");
  app.add_flag("--quiet", quiet, "Suppress summary lines");
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(config_path);
  if (!in) {
    std::fprintf(stderr, "cannot open config: %s\n", config_path.c_str());
    return 2;
  }
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config parse error: %s\n", e.what());
    return 2;
  }

  std::vector<std::string> runs;
  if (config.is_object() && config.contains("runs")) {
    for (const auto& r : config.at("runs")) runs.push_back(r.dump());
  } else {
    runs.push_back(config.dump());
  }

  std::vector<RunOutcome> outcomes(runs.size());
  if (jobs <= 1 || runs.size() <= 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      outcomes[i] = dispatch(runs[i], out_dir, seed, epsilon);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= runs.size()) return;
        outcomes[i] = dispatch(runs[i], out_dir, seed, epsilon);
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(jobs, static_cast<int>(runs.size()));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int failures = 0;
  for (const auto& outcome : outcomes) {
    if (!quiet) std::printf("%s\n", outcome.summary.c_str());
    if (outcome.status != PHIEQ_OK) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
