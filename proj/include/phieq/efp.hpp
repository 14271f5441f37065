#pragma once

#include <unordered_map>
#include <variant>

#include "phieq/deviations.hpp"
#include "phieq/ellipsoid.hpp"
#include "phieq/geometry.hpp"

namespace phieq {

using MapFn = std::function<Vec(const Vec&)>;

// Memoizes map evaluations keyed by the exact input bits; nested ellipsoid
// loops re-query the same argmin points.
class PhiCache {
 public:
  explicit PhiCache(MapFn fn) : fn_(std::move(fn)) {}
  const Vec& operator()(const Vec& x);
  std::size_t evaluations() const { return cache_.size(); }

 private:
  MapFn fn_;
  std::unordered_map<std::string, Vec> cache_;
};

enum class CutType { Ger, Sep };

struct CutRecord {
  CutType type = CutType::Ger;
  Vec vector;          // GER: expected G column; SEP: unit normal
  double offset = 0.0; // SEP only
  int response = -1;   // index into responses for GER cuts
};

// Ordered cut history; the restricted dual set is the certificate box
// intersected with the recorded SEP halfspaces.
struct CutLog {
  int dim = 0;
  double radius = 0.0;          // R_y of the initial ellipsoid
  double box_halfwidth = 0.0;   // half-width of the certificate box
  std::vector<CutRecord> cuts;

  int ger_count() const;
  int sep_count() const;
};

// Product response nu_1 x ... x nu_n kept in factored form; atoms are only
// enumerated for the responses the certificate actually mixes.
struct FactoredResponse {
  std::vector<SparseDistribution> factors;
};

struct GoodEnough {
  SparseDistribution response;  // ignored when factored is set
  Vec gbar;                     // E_{x ~ response}[G(x)]
  std::shared_ptr<const FactoredResponse> factored;
};

struct SepAnswer {
  Halfspace h;
};

using GerOrSepAnswer = std::variant<GoodEnough, SepAnswer>;
using GerOrSepOracle = std::function<GerOrSepAnswer(const Vec&)>;

struct EahOptions {
  int dim = 0;                // k, dimension of the dual space
  double radius = 0.0;        // R_y with Y inside B_{R_y}(0)
  double bound = 1.0;         // B with ||G(x)|| <= B
  double epsilon = 1e-6;      // split half volume guard, half certificate slack
  double box_halfwidth = 0.0; // certificate box; defaults to radius
  long iteration_cap = 0;     // 0 derives the 20 k^2 log(R B / eps) cap
  long long product_atom_cap = 100000;  // per-response cap when enumerating products
};

struct EahResult {
  SparseDistribution mu;
  Vec lambda;                  // mixing weights over GER responses
  double certificate = 0.0;    // min over the restricted dual set (>= -epsilon)
  CutLog log;
  std::vector<SparseDistribution> responses;  // enumerated only where lambda > 0
  std::vector<std::shared_ptr<const FactoredResponse>> factored;  // pruned factors, aligned
  double pruned_mass = 0.0;    // lambda-weighted weight mass dropped by product caps
};

// Enumerates the product of the factors, pruning lightest atoms first until
// the product fits the cap; factors are renormalized after pruning. Returns
// the dropped weight mass (before renormalization).
double enumerate_product(const FactoredResponse& factors, long long atom_cap,
                         SparseDistribution& out,
                         std::vector<SparseDistribution>* pruned_factors = nullptr);

// Ellipsoid-against-hope under a GER-or-SEP oracle. Cuts centrally at the
// ellipsoid center, tracks log-volume, and extracts the mixture weights from
// the infeasibility certificate via an LP over the restricted dual set.
EahResult eah_solve(const GerOrSepOracle& oracle, const EahOptions& opts);

struct EfpResult {
  SparseDistribution mu;
  double l1_error = 0.0;  // recomputed from the atoms, not trusted state
  CutLog log;
};

// Uniform distribution over the orbit x0, phi(x0), ...; the telescoping sum
// makes the error exactly ||x_{T+1} - x_1||_1 / T. Distributions above
// materialize_cap atoms are not stored (steps and error still reported).
struct IterativeEfp {
  SparseDistribution mu;
  long long steps = 0;
  double l1_error = 0.0;
};
IterativeEfp efp_iterative(const ConvexBody& body, const MapFn& phi, double eps, const Vec& x0,
                           long long materialize_cap = 2000000, double tol = 1e-9);

// EAH-based expected fixed point for an endomorphism; throws NotEndomorphism
// with the witness when an image escapes the body.
EfpResult efp_eah(const ConvexBody& body, const MapFn& phi, double eps, double tol = 1e-9);

struct EfpFound {
  SparseDistribution mu;
  double l1_error = 0.0;
};
struct WitnessFound {
  Vec point;
  Vec image;
};
struct SemiSepResult {
  std::variant<EfpFound, WitnessFound> value;
  CutLog log;

  bool is_efp() const { return std::holds_alternative<EfpFound>(value); }
  const EfpFound& efp() const { return std::get<EfpFound>(value); }
  const WitnessFound& witness() const { return std::get<WitnessFound>(value); }
};

// Either an eps-expected fixed point of phi, or a point of the body whose
// image leaves it (verified against the membership oracle). phi may map
// anywhere; for true endomorphisms the EFP branch is guaranteed.
SemiSepResult semi_separate(const ConvexBody& body, const MapFn& phi, double eps,
                            double tol = 1e-9);

}  // namespace phieq
