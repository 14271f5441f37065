#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "phieq/numerics.hpp"

namespace phieq {

// Halfspace { x : <normal, x> <= offset } with a unit normal.
struct Halfspace {
  Vec normal;
  double offset = 0.0;

  Halfspace() = default;
  Halfspace(Vec n, double b);  // normalizes, throws on zero normal

  double violation(const Vec& x) const { return dot(normal, x) - offset; }
};

struct BallBounds {
  double inner_radius = 0.0;
  Vec inner_center;
  double outer_radius = 0.0;  // around the origin
};

class ConvexBody;
using BodyPtr = std::shared_ptr<const ConvexBody>;

// Oracle bundle for a convex compact set: membership, separation, linear
// optimization, plus certified inner/outer ball radii. Immutable; all oracle
// calls are pure and reentrant.
class ConvexBody {
 public:
  virtual ~ConvexBody() = default;

  int dim() const { return dim_; }
  const BallBounds& bounds() const { return bounds_; }
  const std::string& kind() const { return kind_; }
  // Simplices are flat in their ambient space; their inner radius is relative
  // to the affine hull.
  bool full_dimensional() const { return full_dim_; }

  virtual bool member(const Vec& x, double tol = 1e-9) const = 0;
  virtual std::optional<Halfspace> separate(const Vec& x, double tol = 1e-9) const = 0;
  virtual Vec linopt(const Vec& u) const = 0;
  virtual nlohmann::json to_json() const = 0;

  // Coordinate-wise sup-norm radius, via 2d linopt calls.
  double radius_inf() const;

 protected:
  ConvexBody(int dim, BallBounds bounds, std::string kind, bool full_dim = true)
      : dim_(dim), bounds_(std::move(bounds)), kind_(std::move(kind)), full_dim_(full_dim) {}

 private:
  int dim_;
  BallBounds bounds_;
  std::string kind_;
  bool full_dim_;
};

BodyPtr make_box(Vec lo, Vec hi);
BodyPtr make_ball(Vec center, double radius);
BodyPtr make_simplex(int dim);
// Rows of a are normalized at construction. Bounds derived via LP (Chebyshev
// center and coordinate extremes) unless supplied.
BodyPtr make_hpolytope(Mat a, Vec b, std::optional<BallBounds> bounds = std::nullopt);
BodyPtr make_product(std::vector<BodyPtr> parts);

// Invertible affine map x -> a x + b with a cached, verified inverse.
class AffineMap {
 public:
  AffineMap(Mat a, Vec b);

  int dim() const { return static_cast<int>(shift_.size()); }
  const Mat& matrix() const { return matrix_; }
  const Mat& inverse_matrix() const { return inverse_; }
  const Vec& shift() const { return shift_; }

  Vec apply(const Vec& x) const;
  Vec apply_inverse(const Vec& y) const;
  static AffineMap identity(int dim);
  static AffineMap translation(const Vec& shift);

 private:
  Mat matrix_;
  Mat inverse_;
  Vec shift_;
};

BodyPtr make_affine_image(AffineMap map, BodyPtr inner);

BodyPtr body_from_json(const nlohmann::json& spec);

// Finite mixed strategy over a body: list of (point, weight) atoms with
// weights summing to one. Stored flat for cache friendliness.
class SparseDistribution {
 public:
  SparseDistribution() = default;
  explicit SparseDistribution(int dim) : dim_(dim) {}

  static SparseDistribution point_mass(const Vec& x);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }

  void push_back(const Vec& point, double weight);
  const double* point(std::size_t i) const { return &points_[i * dim_]; }
  Vec point_vec(std::size_t i) const;
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }

  double total_weight() const;
  Vec mean() const;
  // Sum of w_i * f(x_i), evaluated left to right.
  Vec expect(const std::function<Vec(const Vec&)>& f) const;

  // Drops atoms below the weight floor, merges bit-identical points and
  // rescales so weights sum to exactly one.
  void compact(double weight_floor = 1e-15);

  // Checks weights and per-atom membership; throws on violation.
  void validate(const ConvexBody& body, double tol = 1e-7) const;

  nlohmann::json to_json() const;
  static SparseDistribution from_json(const nlohmann::json& j);

 private:
  int dim_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
};

// Rescales utilities through an affine change of coordinates and maps the
// inner minimizer's strategies back, preserving Phi-regret up to the factor
// 2 R sqrt(d). Inner must provide next_strategy() and observe(u).
template <class Inner>
class IsotropicTransfer {
 public:
  IsotropicTransfer(AffineMap psi, Inner inner, double outer_radius, int dim)
      : psi_(std::move(psi)),
        inner_(std::move(inner)),
        scale_(1.0 / (2.0 * outer_radius * std::sqrt(static_cast<double>(dim)))) {}

  double utility_scale() const { return scale_; }

  SparseDistribution next_strategy() {
    SparseDistribution tilde = inner_.next_strategy();
    SparseDistribution out(tilde.dim());
    for (std::size_t i = 0; i < tilde.size(); ++i) {
      out.push_back(psi_.apply_inverse(tilde.point_vec(i)), tilde.weight(i));
    }
    return out;
  }

  void observe(const Vec& u) {
    inner_.observe(scale(mat_tvec(psi_.inverse_matrix(), u), scale_));
  }

  Inner& inner() { return inner_; }

 private:
  AffineMap psi_;
  Inner inner_;
  double scale_;
};

}  // namespace phieq
