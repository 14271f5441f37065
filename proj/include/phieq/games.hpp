#pragma once

#include "phieq/efp.hpp"

namespace phieq {

// Normal-form game; payoffs are rescaled into [-1, 1] at load.
class NormalFormGame {
 public:
  NormalFormGame(std::vector<int> action_counts, std::vector<std::vector<double>> payoffs);
  static NormalFormGame from_json(const nlohmann::json& spec);

  int players() const { return static_cast<int>(actions_.size()); }
  const std::vector<int>& action_counts() const { return actions_; }
  double payoff(int player, const std::vector<int>& profile) const;
  // g_i with <g_i, x_i> = E u_i under the product of the given mixed
  // strategies; exact tensor contraction, profile[i] is ignored.
  Vec gradient(int player, const std::vector<Vec>& profile) const;
  nlohmann::json to_json() const;

 private:
  std::size_t flat_index(const std::vector<int>& profile) const;

  std::vector<int> actions_;
  std::vector<std::vector<double>> payoffs_;  // per player, row-major over profiles
};

// n strategy bodies plus a gradient oracle g_i(x_{-i}); utilities are linear
// in the player's own strategy.
struct MultilinearGame {
  std::vector<BodyPtr> bodies;
  std::function<Vec(int, const std::vector<Vec>&)> gradient;
  double gradient_bound = 1.0;  // B with ||g_i|| <= B, asserted per query

  int players() const { return static_cast<int>(bodies.size()); }
  Vec checked_gradient(int player, const std::vector<Vec>& profile) const;
};

MultilinearGame multilinear_from_normal_form(std::shared_ptr<const NormalFormGame> game);
// Two-player payoffs u1 = x1' A x2, u2 = x1' B x2.
MultilinearGame bilinear_game(Mat a, Mat b, BodyPtr x1, BodyPtr x2);
MultilinearGame game_from_json(const nlohmann::json& spec);

enum class GapMode { ExactLP, SampledLP, None };

struct EquilibriumReport {
  Vec gaps;                     // per-player deviation gap estimate
  GapMode mode = GapMode::None;
  Vec player_values;
  int cuts = 0;
  int ger_count = 0;
  int sep_count = 0;
  double runtime_ms = 0.0;
  double certificate = 0.0;
  double pruning_error = 0.0;   // slack induced by product atom caps
  double cert_recheck_violation = 0.0;  // worst re-evaluated certificate violation
  int cert_recheck_samples = 0;
  nlohmann::json to_json() const;
};

// Correlated distribution over the product of the strategy sets, in original
// coordinates, with the per-player block layout recorded.
struct JointDistribution {
  SparseDistribution joint;
  std::vector<int> block_dims;

  Vec player_block(int player, std::size_t atom) const;
};

struct EquilibriumOptions {
  double tol = 1e-9;
  long long product_atom_cap = 100000;
  std::uint64_t seed = 1;
  int verification_samples = 1000;
  int gap_constraint_atoms = 1000;  // support atoms used as SampledLP constraints
  bool verify = true;
};

struct EquilibriumResult {
  JointDistribution distribution;
  EquilibriumReport report;
};

// GER-or-SEP oracle over the deviation parameter space, built from
// per-player semi-separation. Dual coordinates are shifted so the all-players
// identity profile sits at the origin; a candidate y decodes to parameters
// id_i - y_i per player. GoodEnough responses are product distributions kept
// in factored form; witnesses turn into parameter-space separation cuts.
struct GameGerOrSep {
  GerOrSepOracle oracle;
  int param_dim = 0;
  double r_y = 0.0;      // outer radius of the shifted dual set
  double g_bound = 0.0;  // bound on ||G(x)||
  double eps_prime = 0.0;
  std::vector<Vec> identity_flat;  // unshifted identity parameters per player
  std::shared_ptr<std::vector<std::vector<Vec>>> witness_points;  // per player
};

GameGerOrSep gerorsep_for_games(const MultilinearGame& game,
                                const std::vector<nlohmann::json>& feature_specs,
                                double eps_prime, double tol = 1e-9);

// Phi^m-equilibrium via ellipsoid-against-hope over the deviation parameter
// space, with the GER-or-SEP oracle built from per-player semi-separation.
// feature_specs: one JSON feature spec per player ({"features":"linear"} or
// {"features":"legendre","degree":l}).
EquilibriumResult compute_phi_equilibrium(const MultilinearGame& game,
                                          const std::vector<nlohmann::json>& feature_specs,
                                          double epsilon,
                                          const EquilibriumOptions& opts = {});

// Exact swap-deviation gap over column-stochastic matrices; simplex bodies
// with linear features only.
Vec equilibrium_gap_exact_lp(const MultilinearGame& game, const JointDistribution& dist);

// Optimistic upper bound: maximizes the deviation benefit subject to
// endomorphism constraints imposed at finitely many points (support atoms,
// seeded samples, and any extra points supplied). Polyhedral bodies only.
Vec equilibrium_gap_sampled_lp(const MultilinearGame& game, const JointDistribution& dist,
                               const std::vector<nlohmann::json>& feature_specs,
                               const EquilibriumOptions& opts,
                               const std::vector<std::vector<Vec>>* extra_points = nullptr);

Vec equilibrium_values(const MultilinearGame& game, const JointDistribution& dist);

}  // namespace phieq
