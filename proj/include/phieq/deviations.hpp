#pragma once

#include "phieq/geometry.hpp"

namespace phieq {

// Legendre polynomial P_l via the three-term recurrence, iteratively.
double legendre_eval(int ell, double x);
// Rescaled variant sqrt(2l+1) P_l, orthonormal on [-1, 1].
double legendre_rescaled(int ell, double x);

enum class FeatureKind { Linear, Legendre };

// Feature map m : X -> R^{k'}. Linear is the identity lift; Legendre is the
// tensor basis of rescaled Legendre products over multi-indices with total
// degree in [1, ell], evaluated at sqrt(d) * x. Multi-indices are frozen in
// graded order (total degree ascending, tuples lexicographically decreasing
// within a grade) for serialization stability.
class FeatureMap {
 public:
  static FeatureMap linear(int dim, double outer_radius);
  static FeatureMap legendre(int dim, int degree, double outer_radius);
  static FeatureMap from_json(const nlohmann::json& spec, int dim, double outer_radius);

  FeatureKind kind() const { return kind_; }
  int ambient_dim() const { return dim_; }
  int output_dim() const { return kprime_; }
  int degree() const { return degree_; }
  int param_dim() const { return kprime_ * dim_ + dim_; }  // k = k' d + d
  // sup of ||m(x)|| over the outer ball this map was built for.
  double norm_bound() const { return norm_bound_; }
  // delta with co m(B_1) containing B_delta; 1/M for Legendre, r supplied at
  // radii time for Linear.
  double inner_radius_delta() const { return inner_delta_; }
  double built_for_radius() const { return built_radius_; }
  // ||m(0)||; nonzero for Legendre (even-order factors survive at zero), see
  // the README notes. Recorded, not patched.
  double measured_norm_at_zero() const { return norm_at_zero_; }
  const std::vector<std::vector<int>>& multi_indices() const { return indices_; }

  Vec eval(const Vec& x) const;
  nlohmann::json to_json() const;

 private:
  FeatureMap() = default;

  FeatureKind kind_ = FeatureKind::Linear;
  int dim_ = 0;
  int degree_ = 0;
  int kprime_ = 0;
  double rescale_ = 1.0;  // sqrt(d) for Legendre
  double norm_bound_ = 1.0;
  double inner_delta_ = 0.0;
  double built_radius_ = 1.0;
  double norm_at_zero_ = 0.0;
  std::vector<std::vector<int>> indices_;
};

// A deviation phi(x) = K m(x) + c, identified with the flattened point
// (row-major K, then c) in R^k.
struct DeviationParams {
  Mat k;  // d x k'
  Vec c;  // d

  int param_dim() const { return k.rows * k.cols + static_cast<int>(c.size()); }
};

Vec apply_deviation(const DeviationParams& params, const FeatureMap& fm, const Vec& x);

DeviationParams identity_params(const FeatureMap& fm);

Vec flatten(const DeviationParams& params);
DeviationParams unflatten(const FeatureMap& fm, const Vec& flat);

// Frobenius-on-K plus Euclidean-on-c norm of the parameter point.
double params_norm(const DeviationParams& params);

struct PhiRadii {
  double inner = 0.0;  // r' = r / (2 M(R))
  double outer = 0.0;  // R' = R (2 sqrt(d) / delta + 1)
};

PhiRadii phi_radii(const FeatureMap& fm, const BallBounds& bounds, int dim);

}  // namespace phieq
