#pragma once

#include "phieq/numerics.hpp"

namespace phieq {

// Central-cut ellipsoid state: E = { x : (x - center)^T Q^{-1} (x - center) <= 1 }.
struct EllipsoidState {
  Vec center;
  Mat shape;  // Q, symmetric positive definite

  int dim() const { return static_cast<int>(center.size()); }
};

EllipsoidState init_ball(int dim, double radius);

// Minimum-volume ellipsoid containing { y in E : <w, y - center> <= 0 }.
// Dimension 1 degenerates to interval bisection.
EllipsoidState central_cut(const EllipsoidState& e, const Vec& w);

double log_volume(const EllipsoidState& e);

// Per-cut volume ratio: (k/(k+1)) * (k^2/(k^2-1))^((k-1)/2); 1/2 for k = 1.
double cut_volume_ratio(int k);

double log_unit_ball_volume(int k);

// Hard cap for any ellipsoid loop, from the shrink budget log(R*B/eps).
long ellipsoid_iteration_cap(int k, double radius, double bound, double eps);

// Square-root form of the same ellipsoid: Q = L L^T with rank-one updates on
// L and the log-determinant tracked incrementally. Algebraically identical to
// central_cut but free of the cancellation that kills small eigenvalues when
// uncut directions stretch the shape matrix.
struct FactoredEllipsoid {
  Vec center;
  Mat l;               // Q = l l^T
  double logdet = 0.0; // log det Q

  int dim() const { return static_cast<int>(center.size()); }
  Mat shape() const { return matmat(l, transpose(l)); }
};

FactoredEllipsoid init_factored_ball(int dim, double radius);
void factored_central_cut(FactoredEllipsoid& e, const Vec& w);
double log_volume(const FactoredEllipsoid& e);

}  // namespace phieq
