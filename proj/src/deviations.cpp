#include "phieq/deviations.hpp"

#include <algorithm>

namespace phieq {

using nlohmann::json;

double legendre_eval(int ell, double x) {
  if (ell < 0) throw DimensionMismatch("legendre: negative order");
  if (ell == 0) return 1.0;
  double prev = 1.0;  // P_0
  double cur = x;     // P_1
  for (int n = 1; n < ell; ++n) {
    const double next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double legendre_rescaled(int ell, double x) {
  return std::sqrt(2.0 * ell + 1.0) * legendre_eval(ell, x);
}

namespace {

// Total degree ascending; within a grade, tuples lexicographically
// decreasing, e.g. d=2, ell=2: (1,0) (0,1) (2,0) (1,1) (0,2).
void enumerate_grade(int d, int remaining, std::vector<int>& prefix,
                     std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == d - 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    prefix.push_back(v);
    enumerate_grade(d, remaining - v, prefix, out);
    prefix.pop_back();
  }
}

std::vector<std::vector<int>> enumerate_multi_indices(int d, int ell) {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  for (int grade = 1; grade <= ell; ++grade) {
    enumerate_grade(d, grade, prefix, out);
  }
  return out;
}

long long binomial(int n, int k) {
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

FeatureMap FeatureMap::linear(int dim, double outer_radius) {
  if (dim < 1) throw DimensionMismatch("feature map: dim must be positive");
  if (!(outer_radius > 0)) throw BadBounds("feature map: outer radius must be positive");
  FeatureMap fm;
  fm.kind_ = FeatureKind::Linear;
  fm.dim_ = dim;
  fm.kprime_ = dim;
  fm.rescale_ = 1.0;
  fm.norm_bound_ = std::max(outer_radius, 1.0);
  fm.inner_delta_ = 0.0;  // taken from the body's inner radius at radii time
  fm.built_radius_ = outer_radius;
  fm.norm_at_zero_ = 0.0;
  return fm;
}

FeatureMap FeatureMap::legendre(int dim, int degree, double outer_radius) {
  if (dim < 1) throw DimensionMismatch("feature map: dim must be positive");
  if (degree < 1) throw BadBounds("feature map: legendre degree must be >= 1");
  if (!(outer_radius > 0)) throw BadBounds("feature map: outer radius must be positive");
  FeatureMap fm;
  fm.kind_ = FeatureKind::Legendre;
  fm.dim_ = dim;
  fm.degree_ = degree;
  fm.indices_ = enumerate_multi_indices(dim, degree);
  fm.kprime_ = static_cast<int>(fm.indices_.size());
  if (fm.kprime_ != binomial(dim + degree, degree) - 1)
    throw Error("feature map: multi-index count mismatch");
  fm.rescale_ = std::sqrt(static_cast<double>(dim));
  fm.built_radius_ = outer_radius;

  // Numerical sup of ||m|| over B_R: deterministic ball sampling plus axis
  // probes, inflated by 10%. Tighter than the generic d^{O(ell)} bound and
  // that directly enlarges the usable inner radius.
  Rng rng(0x9e3779b97f4a7c15ULL);
  double peak = 0.0;
  auto probe = [&](const Vec& x) { peak = std::max(peak, norm2(fm.eval(x))); };
  Vec axis(dim, 0.0);
  for (int j = 0; j < dim; ++j) {
    axis[j] = outer_radius;
    probe(axis);
    axis[j] = -outer_radius;
    probe(axis);
    axis[j] = 0.0;
  }
  Vec diag(dim, outer_radius / std::sqrt(static_cast<double>(dim)));
  probe(diag);
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) probe(rng.in_ball(dim, outer_radius));
  fm.norm_bound_ = std::max(1.1 * peak, 1.0);
  fm.inner_delta_ = 1.0 / fm.norm_bound_;
  fm.norm_at_zero_ = norm2(fm.eval(Vec(dim, 0.0)));
  return fm;
}

FeatureMap FeatureMap::from_json(const json& spec, int dim, double outer_radius) {
  if (!spec.is_object() || !spec.contains("features"))
    throw ConfigInvalid("feature map: missing 'features' field");
  const std::string kind = spec.at("features").get<std::string>();
  if (kind == "linear") {
    for (auto it = spec.begin(); it != spec.end(); ++it) {
      if (it.key() != "features") throw ConfigInvalid("feature map: unknown field " + it.key());
    }
    return linear(dim, outer_radius);
  }
  if (kind == "legendre") {
    int degree = -1;
    for (auto it = spec.begin(); it != spec.end(); ++it) {
      if (it.key() == "features") continue;
      if (it.key() == "degree") {
        degree = it.value().get<int>();
        continue;
      }
      throw ConfigInvalid("feature map: unknown field " + it.key());
    }
    if (degree < 1) throw ConfigInvalid("feature map: legendre requires degree >= 1");
    return legendre(dim, degree, outer_radius);
  }
  throw ConfigInvalid("feature map: unknown kind '" + kind + "'");
}

Vec FeatureMap::eval(const Vec& x) const {
  check_dim(x, dim_, "feature eval");
  if (kind_ == FeatureKind::Linear) return x;
  Vec scaled = scale(x, rescale_);
  // Per-coordinate table of rescaled Legendre values up to the degree.
  std::vector<double> table(static_cast<std::size_t>(dim_) * (degree_ + 1));
  for (int j = 0; j < dim_; ++j) {
    for (int l = 0; l <= degree_; ++l) {
      table[static_cast<std::size_t>(j) * (degree_ + 1) + l] = legendre_rescaled(l, scaled[j]);
    }
  }
  Vec out(kprime_);
  for (int i = 0; i < kprime_; ++i) {
    double prod = 1.0;
    const auto& idx = indices_[i];
    for (int j = 0; j < dim_; ++j) {
      if (idx[j] == 0) continue;
      prod *= table[static_cast<std::size_t>(j) * (degree_ + 1) + idx[j]];
    }
    out[i] = prod;
  }
  return out;
}

json FeatureMap::to_json() const {
  if (kind_ == FeatureKind::Linear) return json{{"features", "linear"}};
  return json{{"features", "legendre"}, {"degree", degree_}};
}

Vec apply_deviation(const DeviationParams& params, const FeatureMap& fm, const Vec& x) {
  if (params.k.cols != fm.output_dim() || params.k.rows != static_cast<int>(params.c.size()))
    throw DimensionMismatch("apply_deviation: shape mismatch");
  return add(matvec(params.k, fm.eval(x)), params.c);
}

DeviationParams identity_params(const FeatureMap& fm) {
  const int d = fm.ambient_dim();
  DeviationParams p;
  p.c.assign(d, 0.0);
  if (fm.kind() == FeatureKind::Linear) {
    p.k = Mat::identity(d);
    return p;
  }
  // Component for multi-index e_j equals P1_bar(sqrt(d) x_j) = sqrt(3 d) x_j.
  p.k = Mat(d, fm.output_dim());
  const double inv = 1.0 / (std::sqrt(3.0) * std::sqrt(static_cast<double>(d)));
  const auto& indices = fm.multi_indices();
  for (int j = 0; j < d; ++j) {
    int found = -1;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      int total = 0;
      for (int v : indices[i]) total += v;
      if (total == 1 && indices[i][j] == 1) {
        found = static_cast<int>(i);
        break;
      }
    }
    if (found < 0) throw IdentityUnrepresentable("identity_params: degree-1 index missing");
    p.k(j, found) = inv;
  }
  return p;
}

Vec flatten(const DeviationParams& params) {
  Vec flat;
  flat.reserve(params.param_dim());
  flat.insert(flat.end(), params.k.a.begin(), params.k.a.end());
  flat.insert(flat.end(), params.c.begin(), params.c.end());
  return flat;
}

DeviationParams unflatten(const FeatureMap& fm, const Vec& flat) {
  const int d = fm.ambient_dim();
  const int kp = fm.output_dim();
  check_dim(flat, static_cast<std::size_t>(d) * kp + d, "unflatten params");
  DeviationParams p;
  p.k = Mat(d, kp);
  std::copy(flat.begin(), flat.begin() + static_cast<std::size_t>(d) * kp, p.k.a.begin());
  p.c.assign(flat.end() - d, flat.end());
  return p;
}

double params_norm(const DeviationParams& params) {
  double s = 0.0;
  for (double v : params.k.a) s += v * v;
  for (double v : params.c) s += v * v;
  return std::sqrt(s);
}

PhiRadii phi_radii(const FeatureMap& fm, const BallBounds& bounds, int dim) {
  const double r = bounds.inner_radius;
  const double big_r = bounds.outer_radius;
  if (!(r < big_r)) throw BadBounds("phi_radii: requires r < R");
  if (!(r > 0)) throw BadBounds("phi_radii: requires r > 0");
  const double m = fm.norm_bound();
  const double delta = fm.kind() == FeatureKind::Linear ? r : fm.inner_radius_delta();
  if (!(delta > 0)) throw BadBounds("phi_radii: delta must be positive");
  PhiRadii radii;
  radii.inner = r / (2.0 * m);
  radii.outer = big_r * (2.0 * std::sqrt(static_cast<double>(dim)) / delta + 1.0);
  return radii;
}

}  // namespace phieq
