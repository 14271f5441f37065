#include "phieq/ellipsoid.hpp"

#include <algorithm>

namespace phieq {

EllipsoidState init_ball(int dim, double radius) {
  if (dim < 1) throw DimensionMismatch("init_ball: dim must be positive");
  if (!(radius > 0)) throw BadBounds("init_ball: radius must be positive");
  EllipsoidState e;
  e.center.assign(dim, 0.0);
  e.shape = Mat::identity(dim);
  for (double& v : e.shape.a) v *= radius * radius;
  return e;
}

namespace {

void symmetrize(Mat& q) {
  for (int i = 0; i < q.rows; ++i) {
    for (int j = i + 1; j < q.cols; ++j) {
      const double v = 0.5 * (q(i, j) + q(j, i));
      q(i, j) = v;
      q(j, i) = v;
    }
  }
}

Mat checked_cholesky(const Mat& q) {
  auto l = cholesky(q);
  if (l) return *l;
  // One shot of diagonal jitter, then fail loudly.
  Mat jittered = q;
  double trace = 0.0;
  for (int i = 0; i < q.rows; ++i) trace += q(i, i);
  const double jitter = 1e-14 * trace / q.rows;
  for (int i = 0; i < q.rows; ++i) jittered(i, i) += jitter;
  l = cholesky(jittered);
  if (l) return *l;
  throw NotPositiveDefinite("ellipsoid shape lost positive definiteness");
}

}  // namespace

EllipsoidState central_cut(const EllipsoidState& e, const Vec& w) {
  const int k = e.dim();
  check_dim(w, k, "central_cut normal");
  if (norm2(w) <= 0) throw DegenerateCut("central_cut: zero normal");

  const Vec qw = matvec(e.shape, w);
  const double wqw = dot(w, qw);
  if (wqw <= 1e-300) throw DegenerateCut("central_cut: w^T Q w vanished");
  const double s = std::sqrt(wqw);

  EllipsoidState out;
  if (k == 1) {
    // Interval [c - sqrt(Q), c + sqrt(Q)]: keep the half on the <= side.
    const double half = std::sqrt(e.shape(0, 0));
    const double dir = w[0] > 0 ? 1.0 : -1.0;
    out.center = {e.center[0] - dir * half / 2.0};
    out.shape = Mat(1, 1);
    out.shape(0, 0) = e.shape(0, 0) / 4.0;
    return out;
  }

  const double kk = static_cast<double>(k);
  Vec b = scale(qw, 1.0 / s);
  out.center = e.center;
  axpy(-1.0 / (kk + 1.0), b, out.center);

  out.shape = e.shape;
  const double factor = kk * kk / (kk * kk - 1.0);
  const double coef = 2.0 / (kk + 1.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out.shape(i, j) = factor * (e.shape(i, j) - coef * b[i] * b[j]);
    }
  }
  symmetrize(out.shape);
  checked_cholesky(out.shape);  // PD verified every update
  return out;
}

double log_unit_ball_volume(int k) {
  return 0.5 * k * std::log(M_PI) - std::lgamma(0.5 * k + 1.0);
}

double log_volume(const EllipsoidState& e) {
  Mat l = checked_cholesky(e.shape);
  return log_unit_ball_volume(e.dim()) + 0.5 * logdet_from_cholesky(l);
}

double cut_volume_ratio(int k) {
  if (k < 1) throw DimensionMismatch("cut_volume_ratio: dim must be positive");
  if (k == 1) return 0.5;
  const double kk = static_cast<double>(k);
  return (kk / (kk + 1.0)) * std::pow(kk * kk / (kk * kk - 1.0), (kk - 1.0) / 2.0);
}

long ellipsoid_iteration_cap(int k, double radius, double bound, double eps) {
  const double arg = std::max(radius * bound / std::max(eps, 1e-300), M_E);
  const double cap = 20.0 * k * k * std::log(arg);
  return static_cast<long>(std::ceil(std::max(cap, 64.0)));
}

FactoredEllipsoid init_factored_ball(int dim, double radius) {
  if (dim < 1) throw DimensionMismatch("init_factored_ball: dim must be positive");
  if (!(radius > 0)) throw BadBounds("init_factored_ball: radius must be positive");
  FactoredEllipsoid e;
  e.center.assign(dim, 0.0);
  e.l = Mat::identity(dim);
  for (double& v : e.l.a) v *= radius;
  e.logdet = 2.0 * dim * std::log(radius);
  return e;
}

void factored_central_cut(FactoredEllipsoid& e, const Vec& w) {
  const int k = e.dim();
  check_dim(w, k, "factored cut normal");
  if (k == 1) {
    const double half = std::fabs(e.l(0, 0));
    if (half <= 1e-300) throw DegenerateCut("factored cut: width vanished");
    const double dir = w[0] > 0 ? 1.0 : -1.0;
    e.center[0] -= dir * half / 2.0;
    e.l(0, 0) = half / 2.0;
    e.logdet += 2.0 * std::log(0.5);
    return;
  }
  Vec v = mat_tvec(e.l, w);  // L^T w
  const double s = norm2(v);
  if (s <= 1e-280 || !std::isfinite(s)) throw DegenerateCut("factored cut: L^T w vanished");
  Vec u = scale(v, 1.0 / s);
  Vec lu = matvec(e.l, u);  // = Q w / sqrt(w^T Q w)

  const double kk = static_cast<double>(k);
  axpy(-1.0 / (kk + 1.0), lu, e.center);

  const double beta = kk * kk / (kk * kk - 1.0);
  const double root_beta = std::sqrt(beta);
  const double c = 1.0 - std::sqrt((kk - 1.0) / (kk + 1.0));  // so (1-c)^2 = (k-1)/(k+1)
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      e.l(i, j) = root_beta * (e.l(i, j) - c * lu[i] * u[j]);
    }
  }
  e.logdet += kk * std::log(beta) + std::log((kk - 1.0) / (kk + 1.0));
}

double log_volume(const FactoredEllipsoid& e) {
  return log_unit_ball_volume(e.dim()) + 0.5 * e.logdet;
}

}  // namespace phieq
