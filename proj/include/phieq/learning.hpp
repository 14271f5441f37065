#pragma once

#include "phieq/efp.hpp"

namespace phieq {

// Tractable convex superset of Phi^m: a parameter-space ball intersected
// with witness-derived halfspace cuts. Every cut comes from a verified
// witness, so no true endomorphism is ever excluded.
struct ShellSet {
  int dim = 0;
  double radius = 0.0;  // D
  std::vector<Halfspace> cuts;
  std::size_t cut_cap = 4096;  // oldest cuts are dropped beyond this; the
                               // shell only grows back toward the ball

  bool contains(const Vec& y, double tol = 1e-9) const;
  void add_cut(Halfspace h);
  // Euclidean projection onto ball ∩ cuts (Dykstra).
  Vec project(const Vec& y, double tol = 1e-11, int max_rounds = 4000) const;
  // Rigorous lower bound on dist(y, shell) from the ball and each cut.
  double distance_lower_bound(const Vec& y) const;
};

struct ShellEllipsoidOptions {
  double efp_eps = 1e-6;
  double vol_radius = 1e-9;  // stop when vol(E) < vol(B_{vol_radius})
  long iteration_cap = 0;
  double tol = 1e-9;
};

struct ShellFound {
  Vec params;
  SparseDistribution efp;
  double l1_error = 0.0;
};

// Searches F = shell ∩ B_q(center) for a transformation with an EFP; on
// failure the accumulated witness cuts certify the region has shrunk below
// the volume guard. new_cuts are valid for the whole endomorphism set and
// are returned in both outcomes.
struct ShellEllipsoidResult {
  std::optional<ShellFound> found;
  std::vector<Halfspace> new_cuts;
  int semi_sep_calls = 0;
  int ellipsoid_cuts = 0;
};

ShellEllipsoidResult shell_ellipsoid(const ShellSet& shell, const Vec& center, double q,
                                     const ConvexBody& body, const FeatureMap& fm,
                                     const ShellEllipsoidOptions& opts);

enum class SweepMode {
  PaperSweep,  // radius sweep q = 0, delta, 2 delta, ... via shell_ellipsoid
  CutProject,  // project-cut-reproject loop; exact projection onto the final shell
};

struct ShellProjectOptions {
  double eps = 1e-6;              // EFP precision and sweep precision target
  double eps_prime_override = 0;  // volume radius; default eps r / (32 M D^2)
  double delta_override = 0;      // sweep increment; default eps / (4 D)
  SweepMode mode = SweepMode::CutProject;
  double tol = 1e-9;
  int witness_cut_cap = 0;        // CutProject: default 64 k + 256
};

struct ShellProjectResult {
  Vec params;              // phi~ in the updated shell
  SparseDistribution efp;  // eps-EFP of its map
  double efp_error = 0.0;
  double precision = 0.0;  // certified ||params - Pi_shell(target)|| slack
  int witness_cuts_added = 0;
  int semi_sep_calls = 0;
};

// Approximate projection of target onto the (tightening) shell, together
// with an EFP of the returned transformation. Updates the shell in place.
ShellProjectResult shell_project(ShellSet& shell, const ConvexBody& body, const FeatureMap& fm,
                                 const Vec& target, const ShellProjectOptions& opts);

// ---------------------------------------------------------------------------
// Regret accounting. Everything reported is replayable from the per-round
// records; candidate transformations pair with the lifted utilities through
// <p, U> = E[<K m(x) + c, u>].

struct LedgerRound {
  Vec u;         // utility vector observed this round
  Vec params;    // y^(t), the shell point whose EFP was played
  Vec lifted_u;  // U^(t) = (E[u (x) m(x)], u)
  Vec mean_x;    // E_mu[x]
  double efp_error = 0.0;   // recomputed ||E[phi_t(x) - x]||_1
  double proj_slack = 0.0;  // projection precision of the step producing params
  int cuts_total = 0;
};

class RegretLedger {
 public:
  void record(LedgerRound round);
  const std::vector<LedgerRound>& rounds() const { return rounds_; }
  std::size_t size() const { return rounds_.size(); }

  // sum_t <u, E[phi_p(x) - x]> for the deviation with flattened params p.
  double phi_side(const Vec& params) const;
  // sum_t <p - y^(t), U^(t)>.
  double shell_side(const Vec& params) const;
  // sum_t <u, E[phi_t(x) - x]>, the Gordon slack; bounded by sum efp_error.
  double efp_residual() const;
  double efp_error_total() const;

  double regret_estimate(const std::vector<Vec>& candidates) const;
  double shell_regret_estimate(const std::vector<Vec>& candidates) const;

 private:
  std::vector<LedgerRound> rounds_;
};

// Deviations that are provably endomorphisms: identity, the zero map,
// constant maps to linopt vertices, inner-ball samples and mixtures.
std::vector<Vec> candidate_deviations(const ConvexBody& body, const FeatureMap& fm,
                                      int count, std::uint64_t seed);

struct RegretMinimizerOptions {
  int horizon = 1000;     // T
  double eta = 0.0;       // 0 -> D / sqrt(T k)
  double epsilon = 0.0;   // 0 -> 1 / (100 k T)
  SweepMode mode = SweepMode::CutProject;
  double tol = 1e-9;
};

// Online Phi^m-regret minimizer: shell gradient descent over the deviation
// parameter space, playing an EFP of the current shell point each round.
class PhiRegretMinimizer {
 public:
  PhiRegretMinimizer(BodyPtr body, FeatureMap fm, RegretMinimizerOptions opts);

  const SparseDistribution& next_strategy() const { return mu_; }
  void observe(const Vec& u);

  const RegretLedger& ledger() const { return ledger_; }
  const ShellSet& shell() const { return shell_; }
  const Vec& params() const { return params_; }
  double eta() const { return eta_; }
  double epsilon() const { return epsilon_; }
  int round() const { return round_; }

 private:
  BodyPtr body_;
  FeatureMap fm_;
  RegretMinimizerOptions opts_;
  ShellSet shell_;
  Vec params_;
  SparseDistribution mu_;
  RegretLedger ledger_;
  double eta_ = 0.0;
  double epsilon_ = 0.0;
  double last_proj_slack_ = 0.0;
  int round_ = 0;
};

// ---------------------------------------------------------------------------
// Gordon template: an external regret minimizer over a set of guaranteed
// endomorphisms, coupled with an EFP of each emitted transformation.

class ExternalParamsMinimizer {
 public:
  virtual ~ExternalParamsMinimizer() = default;
  virtual Vec next_params() = 0;                 // flattened (K, c), must be an endomorphism
  virtual void observe_lifted(const Vec& u) = 0; // lifted utility U
};

// Projected gradient descent over column-stochastic matrices (c = 0);
// simplex bodies with linear features. Exact per-column simplex projection.
class StochasticMatrixGd final : public ExternalParamsMinimizer {
 public:
  StochasticMatrixGd(int dim, double eta);
  Vec next_params() override;
  void observe_lifted(const Vec& u) override;

 private:
  int dim_;
  double eta_;
  Mat k_;
};

// Projected gradient descent over constant maps c in a box body (K = 0).
class ConstantMapGd final : public ExternalParamsMinimizer {
 public:
  ConstantMapGd(const Vec& lo, const Vec& hi, int kprime, double eta);
  Vec next_params() override;
  void observe_lifted(const Vec& u) override;

 private:
  Vec lo_, hi_, c_;
  int kprime_;
  double eta_;
};

class GordonEfpWrapper {
 public:
  GordonEfpWrapper(BodyPtr body, FeatureMap fm, ExternalParamsMinimizer& external, double eps,
                   double tol = 1e-9);

  const SparseDistribution& next_strategy() const { return mu_; }
  void observe(const Vec& u);
  const RegretLedger& ledger() const { return ledger_; }

 private:
  void refresh();

  BodyPtr body_;
  FeatureMap fm_;
  ExternalParamsMinimizer& external_;
  double eps_;
  double tol_;
  Vec params_;
  SparseDistribution mu_;
  RegretLedger ledger_;
};

// ---------------------------------------------------------------------------
// Adversaries; deterministic under a fixed seed, emitting u in [-1, 1]^d.

class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual Vec next(int round, const SparseDistribution& last_play) = 0;
};

class ConstantAdversary final : public Adversary {
 public:
  explicit ConstantAdversary(Vec u) : u_(std::move(u)) {}
  Vec next(int, const SparseDistribution&) override { return u_; }

 private:
  Vec u_;
};

class SinusoidalAdversary final : public Adversary {
 public:
  SinusoidalAdversary(int dim, double period) : dim_(dim), period_(period) {}
  Vec next(int round, const SparseDistribution&) override;

 private:
  int dim_;
  double period_;
};

class SeededRandomAdversary final : public Adversary {
 public:
  SeededRandomAdversary(int dim, std::uint64_t seed) : dim_(dim), rng_(seed) {}
  Vec next(int, const SparseDistribution&) override;

 private:
  int dim_;
  Rng rng_;
};

// Best response in a two-player zero-sum bilinear game u1 = x' A y; the
// adversary plays the utility gradient of the minimizing response to the
// learner's mean strategy.
class BestResponseAdversary final : public Adversary {
 public:
  BestResponseAdversary(Mat a, BodyPtr opponent_body);
  Vec next(int round, const SparseDistribution& last_play) override;

 private:
  Mat a_;
  BodyPtr opponent_;
};

std::unique_ptr<Adversary> adversary_from_json(const nlohmann::json& spec, int dim,
                                               std::uint64_t seed);

}  // namespace phieq
