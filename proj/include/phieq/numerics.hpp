#pragma once

#include <optional>

#include "phieq/common.hpp"

namespace phieq {

// Row-major dense matrix. All kernels below use a fixed left-to-right
// summation order so results are bit-reproducible.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Mat identity(int n);
};

double dot(const Vec& x, const Vec& y);
Vec add(const Vec& x, const Vec& y);
Vec sub(const Vec& x, const Vec& y);
Vec scale(const Vec& x, double s);
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x

Vec matvec(const Mat& m, const Vec& x);
Vec mat_tvec(const Mat& m, const Vec& x);  // m^T x
Mat matmat(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);
Mat outer(const Vec& u, const Vec& v);

double norm1(const Vec& x);
double norm2(const Vec& x);
double norm_inf(const Vec& x);
double frobenius(const Mat& m);

// Gauss-Jordan inverse with partial pivoting; throws SingularMap.
Mat invert(const Mat& m);

// Cholesky factorization of a symmetric matrix; returns the lower factor or
// nullopt when the matrix is not positive definite.
std::optional<Mat> cholesky(const Mat& q);
double logdet_from_cholesky(const Mat& lower);

// ---------------------------------------------------------------------------
// Dense LP solver: two-phase primal simplex with Bland's anti-cycling rule.
// Small certificate programs only; robustness over asymptotics.

enum class Rel { Le, Ge, Eq };
enum class Sense { Min, Max };

struct LpRow {
  Vec coeffs;
  Rel rel = Rel::Le;
  double rhs = 0.0;
};

struct LpProblem {
  Sense sense = Sense::Max;
  Vec objective;
  std::vector<LpRow> rows;
  // Per-variable bounds; when empty, defaults to [0, +inf). Use -inf for free.
  Vec lower;
  Vec upper;

  int num_vars() const { return static_cast<int>(objective.size()); }
  void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double value = 0.0;
  // Farkas-style infeasibility witness over the preprocessed rows (same order
  // as LpProblem::rows): y with y^T b > 0 and y^T A dominated by zero costs.
  Vec farkas;
};

LpResult lp_solve(const LpProblem& problem, double tol = 1e-9);

}  // namespace phieq
