#include "phieq/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace phieq {

using nlohmann::json;

Halfspace::Halfspace(Vec n, double b) : normal(std::move(n)), offset(b) {
  const double len = norm2(normal);
  if (len <= 0 || !std::isfinite(len)) throw BadBounds("halfspace: zero or non-finite normal");
  for (auto& v : normal) v /= len;
  offset /= len;
}

double ConvexBody::radius_inf() const {
  double r = 0.0;
  Vec u(dim_, 0.0);
  for (int j = 0; j < dim_; ++j) {
    u[j] = 1.0;
    r = std::max(r, std::fabs(linopt(u)[j]));
    u[j] = -1.0;
    r = std::max(r, std::fabs(linopt(u)[j]));
    u[j] = 0.0;
  }
  return r;
}

namespace {

json vec_to_json(const Vec& v) { return json(v); }

Vec vec_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigInvalid(std::string(what) + ": expected array");
  Vec v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigInvalid(std::string(what) + ": expected numbers");
    v.push_back(e.get<double>());
  }
  check_finite(v, what);
  return v;
}

Mat mat_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigInvalid(std::string(what) + ": expected matrix");
  const int rows = static_cast<int>(j.size());
  Vec first = vec_from_json(j[0], what);
  Mat m(rows, static_cast<int>(first.size()));
  for (int i = 0; i < rows; ++i) {
    Vec row = vec_from_json(j[i], what);
    if (static_cast<int>(row.size()) != m.cols)
      throw ConfigInvalid(std::string(what) + ": ragged matrix");
    for (int c = 0; c < m.cols; ++c) m(i, c) = row[c];
  }
  return m;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

class BoxBody final : public ConvexBody {
 public:
  BoxBody(Vec lo, Vec hi, BallBounds bounds)
      : ConvexBody(static_cast<int>(lo.size()), std::move(bounds), "box"),
        lo_(std::move(lo)),
        hi_(std::move(hi)) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, lo_.size(), "box member");
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      if (x[j] < lo_[j] - tol || x[j] > hi_[j] + tol) return false;
    }
    return true;
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, lo_.size(), "box separate");
    int worst = -1;
    double worst_violation = tol;
    bool upper = false;
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      if (x[j] - hi_[j] > worst_violation) {
        worst_violation = x[j] - hi_[j];
        worst = static_cast<int>(j);
        upper = true;
      }
      if (lo_[j] - x[j] > worst_violation) {
        worst_violation = lo_[j] - x[j];
        worst = static_cast<int>(j);
        upper = false;
      }
    }
    if (worst < 0) return std::nullopt;
    Vec n(lo_.size(), 0.0);
    n[worst] = upper ? 1.0 : -1.0;
    return Halfspace(std::move(n), upper ? hi_[worst] : -lo_[worst]);
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, lo_.size(), "box linopt");
    Vec x(lo_.size());
    for (std::size_t j = 0; j < lo_.size(); ++j) x[j] = u[j] > 0 ? hi_[j] : lo_[j];
    return x;
  }

  json to_json() const override {
    return json{{"type", "box"}, {"lo", vec_to_json(lo_)}, {"hi", vec_to_json(hi_)}};
  }

 private:
  Vec lo_, hi_;
};

class BallBody final : public ConvexBody {
 public:
  BallBody(Vec center, double radius, BallBounds bounds)
      : ConvexBody(static_cast<int>(center.size()), std::move(bounds), "ball"),
        center_(std::move(center)),
        radius_(radius) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, center_.size(), "ball member");
    return norm2(sub(x, center_)) <= radius_ + tol;
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, center_.size(), "ball separate");
    Vec diff = sub(x, center_);
    const double d = norm2(diff);
    if (d <= radius_ + tol) return std::nullopt;
    for (auto& v : diff) v /= d;
    return Halfspace(diff, dot(diff, center_) + radius_);
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, center_.size(), "ball linopt");
    const double n = norm2(u);
    if (n <= 0) return center_;
    Vec x = center_;
    axpy(radius_ / n, u, x);
    return x;
  }

  json to_json() const override {
    return json{{"type", "ball"}, {"center", vec_to_json(center_)}, {"radius", radius_}};
  }

 private:
  Vec center_;
  double radius_;
};

class SimplexBody final : public ConvexBody {
 public:
  SimplexBody(int dim, BallBounds bounds)
      : ConvexBody(dim, std::move(bounds), "simplex", /*full_dim=*/false) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, dim(), "simplex member");
    double sum = 0.0;
    for (double v : x) {
      if (v < -tol) return false;
      sum += v;
    }
    return std::fabs(sum - 1.0) <= tol * std::sqrt(static_cast<double>(dim()));
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, dim(), "simplex separate");
    if (member(x, tol)) return std::nullopt;
    const int d = dim();
    int worst = -1;
    double worst_violation = 0.0;
    for (int j = 0; j < d; ++j) {
      if (-x[j] > worst_violation) {
        worst_violation = -x[j];
        worst = j;
      }
    }
    double sum = 0.0;
    for (double v : x) sum += v;
    const double rd = std::sqrt(static_cast<double>(d));
    if ((sum - 1.0) / rd > worst_violation) {
      return Halfspace(Vec(d, 1.0), 1.0);  // normalized by the ctor
    }
    if (worst >= 0) {
      Vec n(d, 0.0);
      n[worst] = -1.0;
      return Halfspace(std::move(n), 0.0);
    }
    return Halfspace(Vec(d, -1.0), -1.0);  // sum < 1 side
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, dim(), "simplex linopt");
    int best = 0;
    for (int j = 1; j < dim(); ++j) {
      if (u[j] > u[best]) best = j;
    }
    Vec x(dim(), 0.0);
    x[best] = 1.0;
    return x;
  }

  json to_json() const override { return json{{"type", "simplex"}, {"dim", dim()}}; }
};

class HPolytopeBody final : public ConvexBody {
 public:
  HPolytopeBody(Mat a, Vec b, BallBounds bounds)
      : ConvexBody(a.cols, std::move(bounds), "hpolytope"), a_(std::move(a)), b_(std::move(b)) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, a_.cols, "hpolytope member");
    const Vec ax = matvec(a_, x);
    for (int i = 0; i < a_.rows; ++i) {
      if (ax[i] > b_[i] + tol) return false;
    }
    return true;
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, a_.cols, "hpolytope separate");
    const Vec ax = matvec(a_, x);
    int worst = -1;
    double worst_violation = tol;
    for (int i = 0; i < a_.rows; ++i) {
      if (ax[i] - b_[i] > worst_violation) {
        worst_violation = ax[i] - b_[i];
        worst = i;
      }
    }
    if (worst < 0) return std::nullopt;
    Vec n(a_.cols);
    for (int j = 0; j < a_.cols; ++j) n[j] = a_(worst, j);
    return Halfspace(std::move(n), b_[worst]);
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, a_.cols, "hpolytope linopt");
    LpProblem lp;
    lp.sense = Sense::Max;
    lp.objective = u;
    lp.lower.assign(a_.cols, -std::numeric_limits<double>::infinity());
    lp.upper.assign(a_.cols, std::numeric_limits<double>::infinity());
    for (int i = 0; i < a_.rows; ++i) {
      LpRow row;
      row.coeffs.assign(a_.cols, 0.0);
      for (int j = 0; j < a_.cols; ++j) row.coeffs[j] = a_(i, j);
      row.rel = Rel::Le;
      row.rhs = b_[i];
      lp.rows.push_back(std::move(row));
    }
    LpResult res = lp_solve(lp);
    if (res.status != LpStatus::Optimal)
      throw NumericalBreakdown("hpolytope linopt: LP did not solve");
    return res.x;
  }

  json to_json() const override {
    return json{{"type", "hpolytope"}, {"A", mat_to_json(a_)}, {"b", vec_to_json(b_)}};
  }

  const Mat& rows() const { return a_; }
  const Vec& rhs() const { return b_; }

 private:
  Mat a_;
  Vec b_;
};

class AffineImageBody final : public ConvexBody {
 public:
  AffineImageBody(AffineMap map, BodyPtr inner, BallBounds bounds)
      : ConvexBody(map.dim(), std::move(bounds), "affine"),
        map_(std::move(map)),
        inner_(std::move(inner)) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, dim(), "affine member");
    return inner_->member(map_.apply_inverse(x), tol);
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, dim(), "affine separate");
    auto h = inner_->separate(map_.apply_inverse(x), tol);
    if (!h) return std::nullopt;
    // <n, psi^{-1}(y)> <= b  becomes  <A^{-T} n, y> <= b + <A^{-T} n, shift>.
    Vec n = mat_tvec(map_.inverse_matrix(), h->normal);
    const double off = h->offset + dot(n, map_.shift());
    return Halfspace(std::move(n), off);
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, dim(), "affine linopt");
    return map_.apply(inner_->linopt(mat_tvec(map_.matrix(), u)));
  }

  json to_json() const override {
    return json{{"type", "affine"},
                {"A", mat_to_json(map_.matrix())},
                {"b", vec_to_json(map_.shift())},
                {"inner", inner_->to_json()}};
  }

 private:
  AffineMap map_;
  BodyPtr inner_;
};

class ProductBody final : public ConvexBody {
 public:
  ProductBody(std::vector<BodyPtr> parts, BallBounds bounds, int dim, bool full_dim)
      : ConvexBody(dim, std::move(bounds), "product", full_dim), parts_(std::move(parts)) {}

  bool member(const Vec& x, double tol) const override {
    check_dim(x, dim(), "product member");
    std::size_t at = 0;
    for (const auto& part : parts_) {
      Vec block(x.begin() + at, x.begin() + at + part->dim());
      if (!part->member(block, tol)) return false;
      at += part->dim();
    }
    return true;
  }

  std::optional<Halfspace> separate(const Vec& x, double tol) const override {
    check_dim(x, dim(), "product separate");
    std::size_t at = 0;
    for (const auto& part : parts_) {
      Vec block(x.begin() + at, x.begin() + at + part->dim());
      if (auto h = part->separate(block, tol)) {
        Vec n(dim(), 0.0);
        std::copy(h->normal.begin(), h->normal.end(), n.begin() + at);
        return Halfspace(std::move(n), h->offset);
      }
      at += part->dim();
    }
    return std::nullopt;
  }

  Vec linopt(const Vec& u) const override {
    check_dim(u, dim(), "product linopt");
    Vec x;
    x.reserve(dim());
    std::size_t at = 0;
    for (const auto& part : parts_) {
      Vec block(u.begin() + at, u.begin() + at + part->dim());
      Vec opt = part->linopt(block);
      x.insert(x.end(), opt.begin(), opt.end());
      at += part->dim();
    }
    return x;
  }

  json to_json() const override {
    json parts = json::array();
    for (const auto& p : parts_) parts.push_back(p->to_json());
    return json{{"type", "product"}, {"parts", parts}};
  }

  const std::vector<BodyPtr>& parts() const { return parts_; }

 private:
  std::vector<BodyPtr> parts_;
};

}  // namespace

BodyPtr make_box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.empty()) throw BadBounds("box: lo/hi size mismatch");
  check_finite(lo, "box lo");
  check_finite(hi, "box hi");
  BallBounds bounds;
  bounds.inner_center.resize(lo.size());
  bounds.inner_radius = std::numeric_limits<double>::infinity();
  double outer_sq = 0.0;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    if (!(lo[j] < hi[j])) throw BadBounds("box: requires lo < hi per coordinate");
    bounds.inner_center[j] = 0.5 * (lo[j] + hi[j]);
    bounds.inner_radius = std::min(bounds.inner_radius, 0.5 * (hi[j] - lo[j]));
    outer_sq += std::max(lo[j] * lo[j], hi[j] * hi[j]);
  }
  bounds.outer_radius = std::sqrt(outer_sq);
  return std::make_shared<BoxBody>(std::move(lo), std::move(hi), std::move(bounds));
}

BodyPtr make_ball(Vec center, double radius) {
  if (center.empty()) throw BadBounds("ball: empty center");
  if (!(radius > 0)) throw BadBounds("ball: radius must be positive");
  check_finite(center, "ball center");
  BallBounds bounds{radius, center, norm2(center) + radius};
  return std::make_shared<BallBody>(std::move(center), radius, std::move(bounds));
}

BodyPtr make_simplex(int dim) {
  if (dim < 2) throw BadBounds("simplex: dim must be >= 2");
  BallBounds bounds;
  bounds.inner_center.assign(dim, 1.0 / dim);
  // Relative to the affine hull {sum x = 1}.
  bounds.inner_radius = 1.0 / std::sqrt(static_cast<double>(dim) * (dim - 1));
  bounds.outer_radius = 1.0;
  return std::make_shared<SimplexBody>(dim, std::move(bounds));
}

BodyPtr make_hpolytope(Mat a, Vec b, std::optional<BallBounds> bounds) {
  if (a.rows == 0 || a.cols == 0 || a.rows != static_cast<int>(b.size()))
    throw BadBounds("hpolytope: shape mismatch");
  check_finite(b, "hpolytope rhs");
  for (int i = 0; i < a.rows; ++i) {
    double len = 0.0;
    for (int j = 0; j < a.cols; ++j) len += a(i, j) * a(i, j);
    len = std::sqrt(len);
    if (len <= 0 || !std::isfinite(len)) throw BadBounds("hpolytope: zero row");
    for (int j = 0; j < a.cols; ++j) a(i, j) /= len;
    b[i] /= len;
  }
  const int d = a.cols;
  if (!bounds) {
    // Chebyshev center: max rho s.t. A c + rho <= b (rows are unit).
    LpProblem cheb;
    cheb.sense = Sense::Max;
    cheb.objective.assign(d + 1, 0.0);
    cheb.objective[d] = 1.0;
    cheb.lower.assign(d + 1, -std::numeric_limits<double>::infinity());
    cheb.lower[d] = 0.0;
    cheb.upper.assign(d + 1, std::numeric_limits<double>::infinity());
    for (int i = 0; i < a.rows; ++i) {
      LpRow row;
      row.coeffs.assign(d + 1, 0.0);
      for (int j = 0; j < d; ++j) row.coeffs[j] = a(i, j);
      row.coeffs[d] = 1.0;
      row.rel = Rel::Le;
      row.rhs = b[i];
      cheb.rows.push_back(std::move(row));
    }
    LpResult cres = lp_solve(cheb);
    if (cres.status == LpStatus::Unbounded)
      throw BadBounds("hpolytope: unbounded (no outer ball)");
    if (cres.status != LpStatus::Optimal || cres.value <= 1e-12)
      throw BadBounds("hpolytope: empty or lower-dimensional");
    BallBounds derived;
    derived.inner_radius = cres.value;
    derived.inner_center.assign(cres.x.begin(), cres.x.begin() + d);
    double outer_sq = 0.0;
    for (int j = 0; j < d; ++j) {
      LpProblem ext;
      ext.sense = Sense::Max;
      ext.objective.assign(d, 0.0);
      ext.objective[j] = 1.0;
      ext.lower.assign(d, -std::numeric_limits<double>::infinity());
      ext.upper.assign(d, std::numeric_limits<double>::infinity());
      for (int i = 0; i < a.rows; ++i) {
        LpRow row;
        row.coeffs.assign(d, 0.0);
        for (int jj = 0; jj < d; ++jj) row.coeffs[jj] = a(i, jj);
        row.rel = Rel::Le;
        row.rhs = b[i];
        ext.rows.push_back(std::move(row));
      }
      LpResult hi = lp_solve(ext);
      ext.sense = Sense::Min;
      LpResult lo = lp_solve(ext);
      if (hi.status != LpStatus::Optimal || lo.status != LpStatus::Optimal)
        throw BadBounds("hpolytope: unbounded coordinate");
      outer_sq += std::max(hi.value * hi.value, lo.value * lo.value);
    }
    derived.outer_radius = std::sqrt(outer_sq);
    bounds = std::move(derived);
  }
  return std::make_shared<HPolytopeBody>(std::move(a), std::move(b), std::move(*bounds));
}

BodyPtr make_product(std::vector<BodyPtr> parts) {
  if (parts.empty()) throw BadBounds("product: empty part list");
  BallBounds bounds;
  bounds.inner_radius = std::numeric_limits<double>::infinity();
  double outer_sq = 0.0;
  int dim = 0;
  bool full_dim = true;
  for (const auto& p : parts) {
    bounds.inner_radius = std::min(bounds.inner_radius, p->bounds().inner_radius);
    outer_sq += p->bounds().outer_radius * p->bounds().outer_radius;
    bounds.inner_center.insert(bounds.inner_center.end(), p->bounds().inner_center.begin(),
                               p->bounds().inner_center.end());
    dim += p->dim();
    full_dim = full_dim && p->full_dimensional();
  }
  bounds.outer_radius = std::sqrt(outer_sq);
  return std::make_shared<ProductBody>(std::move(parts), std::move(bounds), dim, full_dim);
}

AffineMap::AffineMap(Mat a, Vec b) : matrix_(std::move(a)), shift_(std::move(b)) {
  if (matrix_.rows != matrix_.cols || matrix_.rows != static_cast<int>(shift_.size()))
    throw DimensionMismatch("affine map: shape mismatch");
  check_finite(shift_, "affine shift");
  inverse_ = invert(matrix_);
  Mat check = matmat(matrix_, inverse_);
  for (int i = 0; i < check.rows; ++i) check(i, i) -= 1.0;
  if (frobenius(check) > 1e-10) throw SingularMap("affine map: inverse verification failed");
}

Vec AffineMap::apply(const Vec& x) const { return add(matvec(matrix_, x), shift_); }

Vec AffineMap::apply_inverse(const Vec& y) const {
  return matvec(inverse_, sub(y, shift_));
}

AffineMap AffineMap::identity(int dim) { return AffineMap(Mat::identity(dim), Vec(dim, 0.0)); }

AffineMap AffineMap::translation(const Vec& shift) {
  return AffineMap(Mat::identity(static_cast<int>(shift.size())), shift);
}

BodyPtr make_affine_image(AffineMap map, BodyPtr inner) {
  if (map.dim() != inner->dim()) throw DimensionMismatch("affine image: dim mismatch");
  BallBounds bounds;
  const BallBounds& in = inner->bounds();
  bounds.inner_center = map.apply(in.inner_center);
  const double inv_norm = frobenius(map.inverse_matrix());
  bounds.inner_radius = in.inner_radius / std::max(inv_norm, 1e-300);
  bounds.outer_radius = norm2(map.shift()) + frobenius(map.matrix()) * in.outer_radius;
  return std::make_shared<AffineImageBody>(std::move(map), std::move(inner), std::move(bounds));
}

BodyPtr body_from_json(const json& spec) {
  if (!spec.is_object() || !spec.contains("type"))
    throw ConfigInvalid("body: missing type field");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "box") {
    return make_box(vec_from_json(spec.at("lo"), "box lo"), vec_from_json(spec.at("hi"), "box hi"));
  }
  if (type == "ball") {
    return make_ball(vec_from_json(spec.at("center"), "ball center"),
                     spec.at("radius").get<double>());
  }
  if (type == "simplex") {
    return make_simplex(spec.at("dim").get<int>());
  }
  if (type == "hpolytope") {
    std::optional<BallBounds> bounds;
    if (spec.contains("inner_radius")) {
      BallBounds b;
      b.inner_radius = spec.at("inner_radius").get<double>();
      b.inner_center = vec_from_json(spec.at("inner_center"), "hpolytope inner_center");
      b.outer_radius = spec.at("outer_radius").get<double>();
      bounds = std::move(b);
    }
    return make_hpolytope(mat_from_json(spec.at("A"), "hpolytope A"),
                          vec_from_json(spec.at("b"), "hpolytope b"), std::move(bounds));
  }
  if (type == "product") {
    std::vector<BodyPtr> parts;
    for (const auto& p : spec.at("parts")) parts.push_back(body_from_json(p));
    return make_product(std::move(parts));
  }
  if (type == "affine") {
    AffineMap map(mat_from_json(spec.at("A"), "affine A"),
                  vec_from_json(spec.at("b"), "affine b"));
    return make_affine_image(std::move(map), body_from_json(spec.at("inner")));
  }
  throw ConfigInvalid("body: unknown type '" + type + "'");
}

// ---------------------------------------------------------------------------
// SparseDistribution

SparseDistribution SparseDistribution::point_mass(const Vec& x) {
  SparseDistribution d(static_cast<int>(x.size()));
  d.push_back(x, 1.0);
  return d;
}

void SparseDistribution::push_back(const Vec& point, double weight) {
  if (dim_ == 0) dim_ = static_cast<int>(point.size());
  check_dim(point, dim_, "distribution atom");
  if (weight < 0) throw BadBounds("distribution: negative weight");
  points_.insert(points_.end(), point.begin(), point.end());
  weights_.push_back(weight);
}

Vec SparseDistribution::point_vec(std::size_t i) const {
  return Vec(points_.begin() + i * dim_, points_.begin() + (i + 1) * dim_);
}

double SparseDistribution::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

Vec SparseDistribution::mean() const {
  Vec m(dim_, 0.0);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double* p = point(i);
    for (int j = 0; j < dim_; ++j) m[j] += weights_[i] * p[j];
  }
  return m;
}

Vec SparseDistribution::expect(const std::function<Vec(const Vec&)>& f) const {
  Vec acc;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    Vec v = f(point_vec(i));
    if (acc.empty()) acc.assign(v.size(), 0.0);
    axpy(weights_[i], v, acc);
  }
  return acc;
}

void SparseDistribution::compact(double weight_floor) {
  std::map<std::string, double> merged;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] <= weight_floor) continue;
    std::string key(reinterpret_cast<const char*>(point(i)), dim_ * sizeof(double));
    auto it = merged.find(key);
    if (it == merged.end()) {
      merged.emplace(key, weights_[i]);
      order.push_back(std::move(key));
    } else {
      it->second += weights_[i];
    }
  }
  std::vector<double> points;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& key : order) total += merged[key];
  if (total <= 0) throw BadBounds("distribution: all weight removed by compaction");
  for (const auto& key : order) {
    const double* p = reinterpret_cast<const double*>(key.data());
    points.insert(points.end(), p, p + dim_);
    weights.push_back(merged[key] / total);
  }
  points_ = std::move(points);
  weights_ = std::move(weights);
}

void SparseDistribution::validate(const ConvexBody& body, double tol) const {
  if (dim_ != body.dim()) throw DimensionMismatch("distribution: dim mismatch with body");
  const double total = total_weight();
  if (std::fabs(total - 1.0) > 1e-9)
    throw BadBounds("distribution: weights sum to " + std::to_string(total));
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!body.member(point_vec(i), tol))
      throw BadBounds("distribution: atom " + std::to_string(i) + " outside body");
  }
}

json SparseDistribution::to_json() const {
  json atoms = json::array();
  for (std::size_t i = 0; i < weights_.size(); ++i) atoms.push_back(vec_to_json(point_vec(i)));
  return json{{"dim", dim_}, {"atoms", atoms}, {"weights", json(weights_)}};
}

SparseDistribution SparseDistribution::from_json(const json& j) {
  SparseDistribution d(j.at("dim").get<int>());
  const auto& atoms = j.at("atoms");
  const auto& weights = j.at("weights");
  if (atoms.size() != weights.size()) throw ConfigInvalid("distribution: atom/weight mismatch");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    d.push_back(vec_from_json(atoms[i], "distribution atom"), weights[i].get<double>());
  }
  return d;
}

}  // namespace phieq
