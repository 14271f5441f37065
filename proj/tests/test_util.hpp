#pragma once

// Shared test oracles: body samplers, quadrature, brute-force LP by vertex
// enumeration, zero-sum values. These stay independent of the solver paths
// they are used to check.

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <vector>

#include "phieq/deviations.hpp"
#include "phieq/geometry.hpp"
#include "phieq/numerics.hpp"

namespace testutil {

using phieq::BodyPtr;
using phieq::ConvexBody;
using phieq::FeatureMap;
using phieq::LpProblem;
using phieq::LpStatus;
using phieq::Mat;
using phieq::Rng;
using phieq::Vec;

inline Vec sample_simplex(Rng& rng, int d) {
  Vec cuts(d - 1);
  for (auto& c : cuts) c = rng.uniform01();
  std::sort(cuts.begin(), cuts.end());
  Vec x(d);
  double prev = 0.0;
  for (int j = 0; j < d - 1; ++j) {
    x[j] = cuts[j] - prev;
    prev = cuts[j];
  }
  x[d - 1] = 1.0 - prev;
  return x;
}

inline Vec sample_body_json(const nlohmann::json& spec, Rng& rng);

inline Vec sample_body(const ConvexBody& body, Rng& rng) {
  return sample_body_json(body.to_json(), rng);
}

inline Vec sample_body_json(const nlohmann::json& spec, Rng& rng) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "box") {
    Vec lo = spec.at("lo").get<Vec>();
    Vec hi = spec.at("hi").get<Vec>();
    Vec x(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) x[j] = rng.uniform(lo[j], hi[j]);
    return x;
  }
  if (type == "ball") {
    Vec c = spec.at("center").get<Vec>();
    Vec x = rng.in_ball(static_cast<int>(c.size()), spec.at("radius").get<double>());
    for (std::size_t j = 0; j < c.size(); ++j) x[j] += c[j];
    return x;
  }
  if (type == "simplex") {
    return sample_simplex(rng, spec.at("dim").get<int>());
  }
  if (type == "product") {
    Vec x;
    for (const auto& part : spec.at("parts")) {
      Vec block = sample_body_json(part, rng);
      x.insert(x.end(), block.begin(), block.end());
    }
    return x;
  }
  if (type == "affine") {
    phieq::AffineMap map(
        [&] {
          const auto& ja = spec.at("A");
          Mat m(static_cast<int>(ja.size()), static_cast<int>(ja.at(0).size()));
          for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) m(i, j) = ja.at(i).at(j).get<double>();
          return m;
        }(),
        spec.at("b").get<Vec>());
    return map.apply(sample_body_json(spec.at("inner"), rng));
  }
  if (type == "hpolytope") {
    // Rejection from the bounding box of the recreated body.
    BodyPtr body = phieq::body_from_json(spec);
    const double r = body->bounds().outer_radius;
    const int d = body->dim();
    for (int tries = 0; tries < 4096; ++tries) {
      Vec x(d);
      for (int j = 0; j < d; ++j) x[j] = rng.uniform(-r, r);
      if (body->member(x, 1e-12)) return x;
    }
    // Fall back to a random mixture of two vertices and the inner center.
    Vec u = rng.unit_vector(d);
    Vec v1 = body->linopt(u);
    Vec v2 = body->linopt(phieq::scale(u, -1.0));
    const double a = rng.uniform01(), b = rng.uniform01() * (1.0 - a);
    Vec x = phieq::scale(v1, a);
    phieq::axpy(b, v2, x);
    phieq::axpy(1.0 - a - b, body->bounds().inner_center, x);
    return x;
  }
  throw std::runtime_error("sample_body: unsupported body " + type);
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
// Legendre recurrence.
struct Quadrature {
  Vec nodes;
  Vec weights;
};

inline Quadrature gauss_legendre(int n) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const double p = phieq::legendre_eval(n, x);
      const double pm1 = phieq::legendre_eval(n - 1, x);
      const double dp = n * (x * p - pm1) / (x * x - 1.0);
      const double step = p / dp;
      x -= step;
      if (std::fabs(step) < 1e-15) break;
    }
    const double p = phieq::legendre_eval(n, x);
    const double pm1 = phieq::legendre_eval(n - 1, x);
    const double dp = n * (x * p - pm1) / (x * x - 1.0);
    q.nodes[i] = x;
    q.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

// Brute-force LP over bounded feasible regions: enumerate basic solutions of
// every n-subset of the constraint rows (bounds included) and keep the best
// feasible one.
struct BruteLp {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
};

inline BruteLp brute_force_lp(const LpProblem& lp, double tol = 1e-9) {
  const int n = lp.num_vars();
  struct Row {
    Vec a;
    double b;
    phieq::Rel rel;
  };
  std::vector<Row> rows;
  for (const auto& r : lp.rows) rows.push_back({r.coeffs, r.rhs, r.rel});
  const double inf = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower.empty() ? 0.0 : lp.lower[j];
    const double hi = lp.upper.empty() ? inf : lp.upper[j];
    Vec e(n, 0.0);
    if (std::isfinite(lo)) {
      e[j] = -1.0;
      rows.push_back({e, -lo, phieq::Rel::Le});
      e[j] = 0.0;
    }
    if (std::isfinite(hi)) {
      e[j] = 1.0;
      rows.push_back({e, hi, phieq::Rel::Le});
      e[j] = 0.0;
    }
  }
  const int m = static_cast<int>(rows.size());
  auto feasible = [&](const Vec& x) {
    for (const auto& r : rows) {
      const double v = phieq::dot(r.a, x);
      if (r.rel == phieq::Rel::Le && v > r.b + tol) return false;
      if (r.rel == phieq::Rel::Ge && v < r.b - tol) return false;
      if (r.rel == phieq::Rel::Eq && std::fabs(v - r.b) > tol) return false;
    }
    return true;
  };

  BruteLp out;
  bool any = false;
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Mat a(n, n);
      Vec b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = rows[pick[i]].a[j];
        b[i] = rows[pick[i]].b;
      }
      Mat inv;
      try {
        inv = phieq::invert(a);
      } catch (const phieq::SingularMap&) {
        return;
      }
      Vec x = phieq::matvec(inv, b);
      if (!feasible(x)) return;
      const double v = phieq::dot(lp.objective, x);
      if (!any) {
        out.value = v;
        any = true;
      } else if (lp.sense == phieq::Sense::Max) {
        out.value = std::max(out.value, v);
      } else {
        out.value = std::min(out.value, v);
      }
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  out.status = any ? LpStatus::Optimal : LpStatus::Infeasible;
  return out;
}

// Row player's maximin value of the zero-sum game with payoff matrix a.
inline double zero_sum_value(const Mat& a) {
  LpProblem lp;
  const int rows = a.rows, cols = a.cols;
  lp.sense = phieq::Sense::Max;
  lp.objective.assign(rows + 1, 0.0);
  lp.objective[rows] = 1.0;
  lp.lower.assign(rows + 1, 0.0);
  lp.lower[rows] = -std::numeric_limits<double>::infinity();
  lp.upper.assign(rows + 1, std::numeric_limits<double>::infinity());
  for (int j = 0; j < cols; ++j) {
    phieq::LpRow row;
    row.coeffs.assign(rows + 1, 0.0);
    for (int i = 0; i < rows; ++i) row.coeffs[i] = a(i, j);
    row.coeffs[rows] = -1.0;
    row.rel = phieq::Rel::Ge;
    row.rhs = 0.0;
    lp.rows.push_back(std::move(row));
  }
  phieq::LpRow sum_row;
  sum_row.coeffs.assign(rows + 1, 0.0);
  for (int i = 0; i < rows; ++i) sum_row.coeffs[i] = 1.0;
  sum_row.rel = phieq::Rel::Eq;
  sum_row.rhs = 1.0;
  lp.rows.push_back(std::move(sum_row));
  auto res = phieq::lp_solve(lp);
  REQUIRE(res.status == LpStatus::Optimal);
  return res.value;
}

// Random bounded H-polytope containing the unit ball at the origin.
inline BodyPtr random_hpolytope(int d, int extra_rows, Rng& rng) {
  const int m = 2 * d + extra_rows;
  Mat a(m, d);
  Vec b(m);
  int at = 0;
  for (int j = 0; j < d; ++j) {
    a(at, j) = 1.0;
    b[at++] = rng.uniform(1.2, 2.5);
    a(at, j) = -1.0;
    b[at++] = rng.uniform(1.2, 2.5);
  }
  for (int i = 0; i < extra_rows; ++i) {
    Vec u = rng.unit_vector(d);
    for (int j = 0; j < d; ++j) a(at, j) = u[j];
    b[at++] = rng.uniform(1.1, 2.0);
  }
  return phieq::make_hpolytope(std::move(a), std::move(b));
}

// Deterministic endomorphism inside Phi^m: identity mixed with an inner-ball
// sample (convexity keeps the mixture inside). Bodies with r = R (balls at
// the origin) get a slightly shrunk certified inner radius.
inline phieq::DeviationParams shrunk_random_endo(const ConvexBody& body, const FeatureMap& fm,
                                                 Rng& rng, double scale = 0.9,
                                                 double identity_mix = 0.5) {
  phieq::BallBounds bounds = body.bounds();
  bounds.inner_radius = std::min(bounds.inner_radius, 0.999 * bounds.outer_radius);
  const phieq::PhiRadii radii = phieq::phi_radii(fm, bounds, body.dim());
  Vec p = rng.in_ball(fm.param_dim(), radii.inner * scale);
  Vec id = phieq::flatten(phieq::identity_params(fm));
  Vec mixed = phieq::scale(p, 1.0 - identity_mix);
  phieq::axpy(identity_mix, id, mixed);
  return phieq::unflatten(fm, mixed);
}

}  // namespace testutil
