#include "phieq/config.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace phieq {

using nlohmann::json;

const char* kLibraryVersion = "0.1.0";

std::string config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_fields(const json& config, const std::vector<std::string>& allowed) {
  for (auto it = config.begin(); it != config.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigInvalid("config: unknown field '" + it.key() + "'");
  }
}

std::uint64_t get_seed(const json& config, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
  return 1;
}

double get_epsilon(const json& config, std::optional<double> override_eps, double fallback) {
  if (override_eps) return *override_eps;
  if (config.contains("epsilon") && config.at("epsilon").is_number())
    return config.at("epsilon").get<double>();
  return fallback;
}

Vec mix_with(Vec p, const Vec& other, double t) {
  // (1 - t) p + t other
  Vec out = scale(p, 1.0 - t);
  axpy(t, other, out);
  return out;
}

DeviationParams map_from_config(const json& spec, const ConvexBody& body, const FeatureMap& fm,
                                std::uint64_t seed) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "params") {
    check_fields(spec, {"type", "K", "c"});
    DeviationParams p;
    const auto& jk = spec.at("K");
    p.k = Mat(static_cast<int>(jk.size()), static_cast<int>(jk.at(0).size()));
    for (int i = 0; i < p.k.rows; ++i)
      for (int j = 0; j < p.k.cols; ++j) p.k(i, j) = jk.at(i).at(j).get<double>();
    p.c = spec.at("c").get<Vec>();
    if (p.k.cols != fm.output_dim() || p.k.rows != body.dim() ||
        static_cast<int>(p.c.size()) != body.dim())
      throw ConfigInvalid("map params: shape mismatch with body/features");
    return p;
  }
  if (type == "shrunk_random") {
    check_fields(spec, {"type", "scale", "identity_mix"});
    const double scale_f = spec.contains("scale") ? spec.at("scale").get<double>() : 0.9;
    const double mix = spec.contains("identity_mix") ? spec.at("identity_mix").get<double>() : 0.5;
    if (norm2(body.bounds().inner_center) > 1e-9)
      throw ConfigInvalid("shrunk_random map requires a body centered at the origin");
    const PhiRadii radii = phi_radii(fm, body.bounds(), body.dim());
    Rng rng(seed ^ 0x5bd1e995u);
    Vec p = rng.in_ball(fm.param_dim(), radii.inner * scale_f);
    p = mix_with(std::move(p), flatten(identity_params(fm)), mix);
    return unflatten(fm, p);
  }
  if (type == "identity") {
    check_fields(spec, {"type"});
    return identity_params(fm);
  }
  throw ConfigInvalid("map: unknown type '" + type + "'");
}

RunReport run_efp(const json& config, std::uint64_t seed, double epsilon) {
  check_fields(config, {"command", "name", "body", "features", "map", "method", "x0", "epsilon",
                        "seed"});
  BodyPtr body = body_from_json(config.at("body"));
  FeatureMap fm =
      FeatureMap::from_json(config.at("features"), body->dim(), body->bounds().outer_radius);
  DeviationParams params = map_from_config(config.at("map"), *body, fm, seed);
  const std::string method =
      config.contains("method") ? config.at("method").get<std::string>() : "eah";

  MapFn map = [&params, &fm](const Vec& x) { return apply_deviation(params, fm, x); };

  const auto t0 = std::chrono::steady_clock::now();
  SparseDistribution mu;
  json extra;
  if (method == "eah") {
    EfpResult res = efp_eah(*body, map, epsilon);
    mu = std::move(res.mu);
    extra["cuts"] = static_cast<int>(res.log.cuts.size());
    extra["ger"] = res.log.ger_count();
    extra["sep"] = res.log.sep_count();
  } else if (method == "iterative") {
    Vec x0 = config.contains("x0") ? config.at("x0").get<Vec>() : body->bounds().inner_center;
    IterativeEfp res = efp_iterative(*body, map, epsilon, x0);
    mu = std::move(res.mu);
    extra["steps"] = res.steps;
    extra["streamed_l1_error"] = res.l1_error;
  } else {
    throw ConfigInvalid("efp: unknown method '" + method + "'");
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  // Error recomputed from the atoms, never copied from solver internals.
  double l1 = 0.0;
  if (!mu.empty()) {
    Vec drift = mu.expect([&](const Vec& x) { return sub(map(x), x); });
    l1 = norm1(drift);
  } else if (extra.contains("streamed_l1_error")) {
    l1 = extra["streamed_l1_error"].get<double>();
  }

  RunReport out;
  out.report = json{{"command", "efp"},
                    {"config_hash", config_hash(config)},
                    {"library_version", kLibraryVersion},
                    {"epsilon", epsilon},
                    {"seed", seed},
                    {"method", method},
                    {"l1_error", l1},
                    {"support", mu.size()},
                    {"distribution", mu.empty() ? json(nullptr) : mu.to_json()},
                    {"stats", extra},
                    {"timings_ms", ms}};
  std::string csv = "weight";
  for (int j = 0; j < body->dim(); ++j) csv += ",x" + std::to_string(j);
  csv += "\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    csv += fmt(mu.weight(i));
    Vec p = mu.point_vec(i);
    for (double v : p) csv += "," + fmt(v);
    csv += "\n";
  }
  out.csv = std::move(csv);
  out.summary = "efp: l1_error=" + fmt(l1) + " support=" + std::to_string(mu.size()) +
                " eps=" + fmt(epsilon);
  return out;
}

RunReport run_equilibrium(const json& config, std::uint64_t seed, double epsilon) {
  check_fields(config, {"command", "name", "game", "features", "epsilon", "seed", "verify",
                        "product_atom_cap"});
  MultilinearGame game = game_from_json(config.at("game"));
  std::vector<json> specs;
  const auto& jf = config.at("features");
  if (jf.is_array()) {
    for (const auto& f : jf) specs.push_back(f);
  } else {
    specs.assign(game.players(), jf);
  }
  EquilibriumOptions opts;
  opts.seed = seed;
  if (config.contains("verify")) opts.verify = config.at("verify").get<bool>();
  if (config.contains("product_atom_cap"))
    opts.product_atom_cap = config.at("product_atom_cap").get<long long>();

  EquilibriumResult res = compute_phi_equilibrium(game, specs, epsilon, opts);

  RunReport out;
  out.report = json{{"command", "equilibrium"},
                    {"config_hash", config_hash(config)},
                    {"library_version", kLibraryVersion},
                    {"epsilon", epsilon},
                    {"seed", seed},
                    {"support", res.distribution.joint.size()},
                    {"report", res.report.to_json()},
                    {"block_dims", json(res.distribution.block_dims)}};
  // Atom CSV only for modest supports; the JSON report always carries gaps.
  if (res.distribution.joint.size() <= 20000) {
    std::string csv = "weight";
    for (int j = 0; j < res.distribution.joint.dim(); ++j) csv += ",x" + std::to_string(j);
    csv += "\n";
    for (std::size_t i = 0; i < res.distribution.joint.size(); ++i) {
      csv += fmt(res.distribution.joint.weight(i));
      Vec p = res.distribution.joint.point_vec(i);
      for (double v : p) csv += "," + fmt(v);
      csv += "\n";
    }
    out.csv = std::move(csv);
    out.report["distribution"] = res.distribution.joint.to_json();
  }
  double worst_gap = 0.0;
  for (double g : res.report.gaps) worst_gap = std::max(worst_gap, g);
  out.summary = "equilibrium: gap=" + fmt(worst_gap) +
                " support=" + std::to_string(res.distribution.joint.size()) +
                " cuts=" + std::to_string(res.report.cuts);
  return out;
}

RunReport run_regret(const json& config, std::uint64_t seed, double eps_default) {
  check_fields(config, {"command", "name", "body", "features", "T", "eta", "epsilon", "adversary",
                        "seed", "mode", "candidates"});
  BodyPtr body = body_from_json(config.at("body"));
  FeatureMap fm =
      FeatureMap::from_json(config.at("features"), body->dim(), body->bounds().outer_radius);
  const int horizon = config.at("T").get<int>();
  if (horizon < 1) throw ConfigInvalid("regret: T must be positive");

  RegretMinimizerOptions opts;
  opts.horizon = horizon;
  if (config.contains("eta") && config.at("eta").is_number())
    opts.eta = config.at("eta").get<double>();
  if (config.contains("epsilon") && config.at("epsilon").is_number())
    opts.epsilon = config.at("epsilon").get<double>();
  else if (eps_default > 0)
    opts.epsilon = eps_default;
  if (config.contains("mode")) {
    const std::string mode = config.at("mode").get<std::string>();
    if (mode == "sweep") opts.mode = SweepMode::PaperSweep;
    else if (mode == "cutproject") opts.mode = SweepMode::CutProject;
    else throw ConfigInvalid("regret: unknown mode '" + mode + "'");
  }

  PhiRegretMinimizer learner(body, fm, opts);
  auto adversary = adversary_from_json(config.at("adversary"), body->dim(), seed);
  const int n_cands =
      config.contains("candidates") ? config.at("candidates").get<int>() : 64;
  std::vector<Vec> cands = candidate_deviations(*body, fm, n_cands, seed ^ 0xc0ffee);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> phi_sum(cands.size(), 0.0);
  std::vector<double> shell_sum(cands.size(), 0.0);
  std::string csv = "round,inst_utility,cum_phi_regret_estimate,shell_external_regret,cuts\n";
  for (int t = 0; t < horizon; ++t) {
    const SparseDistribution& mu = learner.next_strategy();
    Vec u = adversary->next(t, mu);
    const double inst = dot(u, mu.mean());
    learner.observe(u);
    const LedgerRound& row = learner.ledger().rounds().back();
    double phi_best = 0.0, shell_best = 0.0;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double pu = dot(cands[c], row.lifted_u);
      phi_sum[c] += pu - dot(row.u, row.mean_x);
      shell_sum[c] += pu - dot(row.params, row.lifted_u);
      phi_best = std::max(phi_best, phi_sum[c]);
      shell_best = std::max(shell_best, shell_sum[c]);
    }
    csv += std::to_string(t + 1) + "," + fmt(inst) + "," + fmt(phi_best) + "," +
           fmt(shell_best) + "," + std::to_string(row.cuts_total) + "\n";
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const RegretLedger& ledger = learner.ledger();
  const double phi_reg = ledger.regret_estimate(cands);
  const double shell_reg = ledger.shell_regret_estimate(cands);
  const double efp_total = ledger.efp_error_total();

  RunReport out;
  out.report = json{{"command", "regret"},
                    {"config_hash", config_hash(config)},
                    {"library_version", kLibraryVersion},
                    {"T", horizon},
                    {"seed", seed},
                    {"eta", learner.eta()},
                    {"epsilon", learner.epsilon()},
                    {"candidates", cands.size()},
                    {"phi_regret_estimate", phi_reg},
                    {"avg_phi_regret_estimate", phi_reg / horizon},
                    {"shell_external_regret", shell_reg},
                    {"efp_error_total", efp_total},
                    {"gordon_bound_holds", phi_reg <= shell_reg + efp_total + 1e-9},
                    {"shell_cuts", learner.shell().cuts.size()},
                    {"timings_ms", ms}};
  out.csv = std::move(csv);
  out.summary = "regret: avg_estimate=" + fmt(phi_reg / horizon) + " T=" +
                std::to_string(horizon) + " cuts=" + std::to_string(learner.shell().cuts.size());
  return out;
}

RunReport run_verify(const json& config, std::uint64_t seed, double epsilon) {
  check_fields(config, {"command", "name", "target", "report", "body", "features", "map", "game",
                        "epsilon", "seed"});
  const std::string target = config.at("target").get<std::string>();
  json report = config.at("report");
  if (report.is_string()) {
    std::ifstream in(report.get<std::string>());
    if (!in) throw IoError("verify: cannot open report " + report.get<std::string>());
    report = json::parse(in);
  }

  RunReport out;
  if (target == "efp") {
    BodyPtr body = body_from_json(config.at("body"));
    FeatureMap fm =
        FeatureMap::from_json(config.at("features"), body->dim(), body->bounds().outer_radius);
    DeviationParams params = map_from_config(config.at("map"), *body, fm, seed);
    SparseDistribution mu = SparseDistribution::from_json(report.at("distribution"));
    mu.validate(*body, 1e-6);
    Vec drift = mu.expect([&](const Vec& x) { return sub(apply_deviation(params, fm, x), x); });
    const double l1 = norm1(drift);
    out.report = json{{"command", "verify"},
                      {"target", "efp"},
                      {"l1_error", l1},
                      {"within_epsilon", l1 <= epsilon + 1e-12},
                      {"epsilon", epsilon},
                      {"support", mu.size()}};
    out.summary = "verify efp: l1_error=" + fmt(l1);
    out.ok = l1 <= epsilon + 1e-12;
    return out;
  }
  if (target == "equilibrium") {
    MultilinearGame game = game_from_json(config.at("game"));
    std::vector<json> specs;
    const auto& jf = config.at("features");
    if (jf.is_array()) {
      for (const auto& f : jf) specs.push_back(f);
    } else {
      specs.assign(game.players(), jf);
    }
    JointDistribution dist;
    dist.joint = SparseDistribution::from_json(report.at("distribution"));
    for (const auto& b : game.bodies) dist.block_dims.push_back(b->dim());
    bool all_simplex_linear = true;
    for (int i = 0; i < game.players(); ++i) {
      all_simplex_linear = all_simplex_linear && game.bodies[i]->kind() == "simplex" &&
                           specs[i].at("features").get<std::string>() == "linear";
    }
    EquilibriumOptions opts;
    opts.seed = seed;
    Vec gaps = all_simplex_linear
                   ? equilibrium_gap_exact_lp(game, dist)
                   : equilibrium_gap_sampled_lp(game, dist, specs, opts, nullptr);
    Vec values = equilibrium_values(game, dist);
    double worst = 0.0;
    for (double g : gaps) worst = std::max(worst, g);
    out.report = json{{"command", "verify"},
                      {"target", "equilibrium"},
                      {"mode", all_simplex_linear ? "exact_lp" : "sampled_lp"},
                      {"gaps", json(gaps)},
                      {"player_values", json(values)},
                      {"within_epsilon", worst <= epsilon + 1e-12},
                      {"epsilon", epsilon}};
    out.summary = "verify equilibrium: gap=" + fmt(worst);
    out.ok = worst <= epsilon + 1e-12;
    return out;
  }
  throw ConfigInvalid("verify: unknown target '" + target + "'");
}

}  // namespace

RunReport run_experiment(const json& config, std::optional<std::uint64_t> seed_override,
                         std::optional<double> eps_override) {
  if (!config.is_object() || !config.contains("command"))
    throw ConfigInvalid("config: missing command");
  const std::string command = config.at("command").get<std::string>();
  const std::uint64_t seed = get_seed(config, seed_override);

  RunReport out;
  if (command == "efp") {
    out = run_efp(config, seed, get_epsilon(config, eps_override, 1e-6));
  } else if (command == "equilibrium") {
    out = run_equilibrium(config, seed, get_epsilon(config, eps_override, 1e-4));
  } else if (command == "regret") {
    out = run_regret(config, seed, eps_override ? *eps_override : 0.0);
  } else if (command == "verify") {
    out = run_verify(config, seed, get_epsilon(config, eps_override, 1e-6));
  } else {
    throw ConfigInvalid("config: unknown command '" + command + "'");
  }
  out.name = config.contains("name") ? config.at("name").get<std::string>() : command;
  return out;
}

RunReport run_and_write(const json& config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override,
                        std::optional<double> eps_override) {
  RunReport report = run_experiment(config, seed_override, eps_override);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / (report.name + ".report.json"));
    if (!f) throw IoError("cannot write report for " + report.name);
    f << report.report.dump(2) << "\n";
  }
  if (!report.csv.empty()) {
    std::ofstream f(fs::path(out_dir) / (report.name + ".csv"), std::ios::binary);
    if (!f) throw IoError("cannot write csv for " + report.name);
    f << report.csv;
  }
  return report;
}

}  // namespace phieq
