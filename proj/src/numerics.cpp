#include "phieq/numerics.hpp"

#include <algorithm>
#include <limits>

namespace phieq {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

Vec add(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw DimensionMismatch("add: size mismatch");
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
  return r;
}

Vec sub(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw DimensionMismatch("sub: size mismatch");
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

Vec scale(const Vec& x, double s) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] * s;
  return r;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw DimensionMismatch("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec matvec(const Mat& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols) throw DimensionMismatch("matvec: size mismatch");
  Vec r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    const double* row = &m.a[static_cast<std::size_t>(i) * m.cols];
    for (int j = 0; j < m.cols; ++j) s += row[j] * x[j];
    r[i] = s;
  }
  return r;
}

Vec mat_tvec(const Mat& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.rows) throw DimensionMismatch("mat_tvec: size mismatch");
  Vec r(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double* row = &m.a[static_cast<std::size_t>(i) * m.cols];
    for (int j = 0; j < m.cols; ++j) r[j] += row[j] * x[i];
  }
  return r;
}

Mat matmat(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw DimensionMismatch("matmat: size mismatch");
  Mat r(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int l = 0; l < a.cols; ++l) s += a(i, l) * b(l, j);
      r(i, j) = s;
    }
  }
  return r;
}

Mat transpose(const Mat& m) {
  Mat r(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) r(j, i) = m(i, j);
  return r;
}

Mat outer(const Vec& u, const Vec& v) {
  Mat r(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) r(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
  return r;
}

double norm1(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double norm_inf(const Vec& x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::fabs(v));
  return s;
}

double frobenius(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

Mat invert(const Mat& m) {
  if (m.rows != m.cols) throw DimensionMismatch("invert: matrix not square");
  const int n = m.rows;
  Mat work = m;
  Mat inv = Mat::identity(n);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(work(col, col));
    for (int i = col + 1; i < n; ++i) {
      if (std::fabs(work(i, col)) > best) {
        best = std::fabs(work(i, col));
        piv = i;
      }
    }
    if (best < 1e-250) throw SingularMap("invert: pivot vanished");
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(work(piv, j), work(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    }
    const double d = work(col, col);
    for (int j = 0; j < n; ++j) {
      work(col, j) /= d;
      inv(col, j) /= d;
    }
    for (int i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = work(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        work(i, j) -= f * work(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

std::optional<Mat> cholesky(const Mat& q) {
  if (q.rows != q.cols) throw DimensionMismatch("cholesky: matrix not square");
  const int n = q.rows;
  Mat l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = q(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return std::nullopt;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

double logdet_from_cholesky(const Mat& lower) {
  double s = 0.0;
  for (int i = 0; i < lower.rows; ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

// ---------------------------------------------------------------------------
// Simplex LP.

void LpProblem::validate() const {
  const int n = num_vars();
  if (n == 0) throw DimensionMismatch("lp: empty objective");
  check_finite(objective, "lp objective");
  for (const auto& row : rows) {
    if (static_cast<int>(row.coeffs.size()) != n)
      throw DimensionMismatch("lp: row width mismatch");
    check_finite(row.coeffs, "lp row");
    if (!std::isfinite(row.rhs)) throw DimensionMismatch("lp: non-finite rhs");
  }
  if (!lower.empty() && static_cast<int>(lower.size()) != n)
    throw DimensionMismatch("lp: lower bound width mismatch");
  if (!upper.empty() && static_cast<int>(upper.size()) != n)
    throw DimensionMismatch("lp: upper bound width mismatch");
}

namespace {

constexpr double kPivotTol = 1e-11;

struct Tableau {
  int m = 0;           // rows
  int n = 0;           // columns (without rhs)
  std::vector<double> t;  // m x (n + 1)
  std::vector<int> basis;

  double& at(int i, int j) { return t[static_cast<std::size_t>(i) * (n + 1) + j]; }
  double at(int i, int j) const { return t[static_cast<std::size_t>(i) * (n + 1) + j]; }
  double& rhs(int i) { return at(i, n); }
  double rhs(int i) const { return at(i, n); }
};

struct CostRow {
  std::vector<double> z;  // n + 1 entries, last = -objective value
  double& at(int j) { return z[j]; }
};

void pivot(Tableau& tab, CostRow& z1, CostRow* z2, int row, int col) {
  const int width = tab.n + 1;
  double* pr = &tab.t[static_cast<std::size_t>(row) * width];
  const double p = pr[col];
  for (int j = 0; j < width; ++j) pr[j] /= p;
  pr[col] = 1.0;
  for (int i = 0; i < tab.m; ++i) {
    if (i == row) continue;
    double* ri = &tab.t[static_cast<std::size_t>(i) * width];
    const double f = ri[col];
    if (f == 0.0) continue;
    for (int j = 0; j < width; ++j) ri[j] -= f * pr[j];
    ri[col] = 0.0;
  }
  auto apply = [&](CostRow& z) {
    const double f = z.z[col];
    if (f == 0.0) return;
    for (int j = 0; j < width; ++j) z.z[j] -= f * pr[j];
    z.z[col] = 0.0;
  };
  apply(z1);
  if (z2 != nullptr) apply(*z2);
  tab.basis[row] = col;
}

// Bland's rule: smallest eligible entering index, leaving row breaks ratio
// ties by smallest basis index. Columns with no positive pivot entry signal
// an unbounded ray only when allowed (phase 2) and the reduced cost is
// solidly negative; otherwise they are numerical noise and get skipped.
enum class StepOutcome { Done, Pivoted, Unbounded };

StepOutcome simplex_step(Tableau& tab, CostRow& cost, CostRow* other, double tol,
                         const std::vector<bool>& allowed, bool allow_unbounded) {
  for (int j = 0; j < tab.n; ++j) {
    if (!allowed[j] || cost.z[j] >= -tol) continue;
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < tab.m; ++i) {
      const double aij = tab.at(i, j);
      if (aij <= kPivotTol) continue;
      const double ratio = tab.rhs(i) / aij;
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && (leave == -1 || tab.basis[i] < tab.basis[leave]))) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave == -1) {
      if (allow_unbounded && cost.z[j] < -1e-7) return StepOutcome::Unbounded;
      continue;
    }
    pivot(tab, cost, other, leave, j);
    return StepOutcome::Pivoted;
  }
  return StepOutcome::Done;
}

}  // namespace

LpResult lp_solve(const LpProblem& problem, double tol) {
  problem.validate();
  const int n_orig = problem.num_vars();
  const double inf = std::numeric_limits<double>::infinity();

  Vec lo(n_orig, 0.0), up(n_orig, inf);
  if (!problem.lower.empty()) lo = problem.lower;
  if (!problem.upper.empty()) up = problem.upper;

  // Standard-form columns: shifted variables, with free variables split.
  struct VarMap {
    int pos = -1;   // column of positive part
    int neg = -1;   // column of negative part (free variables only)
    double shift = 0.0;
  };
  std::vector<VarMap> vmap(n_orig);
  int n_struct = 0;
  for (int j = 0; j < n_orig; ++j) {
    if (std::isfinite(lo[j])) {
      vmap[j].pos = n_struct++;
      vmap[j].shift = lo[j];
    } else {
      vmap[j].pos = n_struct++;
      vmap[j].neg = n_struct++;
    }
  }

  // Rows: user rows first, then synthesized upper-bound rows.
  struct StdRow {
    Vec coeffs;  // over structural columns
    Rel rel;
    double rhs;
    bool negated = false;
    int source = -1;  // index into problem.rows, or -1 for a bound row
  };
  std::vector<StdRow> srows;
  auto expand = [&](const Vec& coeffs) {
    Vec c(n_struct, 0.0);
    double shift_rhs = 0.0;
    for (int j = 0; j < n_orig; ++j) {
      const double v = coeffs[j];
      if (v == 0.0) continue;
      c[vmap[j].pos] += v;
      if (vmap[j].neg >= 0) c[vmap[j].neg] -= v;
      shift_rhs += v * vmap[j].shift;
    }
    return std::make_pair(c, shift_rhs);
  };
  for (std::size_t r = 0; r < problem.rows.size(); ++r) {
    auto [c, shift] = expand(problem.rows[r].coeffs);
    srows.push_back({std::move(c), problem.rows[r].rel, problem.rows[r].rhs - shift,
                     false, static_cast<int>(r)});
  }
  for (int j = 0; j < n_orig; ++j) {
    if (!std::isfinite(up[j])) continue;
    Vec unit(n_orig, 0.0);
    unit[j] = 1.0;
    auto [c, shift] = expand(unit);
    srows.push_back({std::move(c), Rel::Le, up[j] - shift, false, -1});
  }

  const int m = static_cast<int>(srows.size());
  for (auto& row : srows) {
    if (row.rhs < 0.0) {
      for (auto& v : row.coeffs) v = -v;
      row.rhs = -row.rhs;
      row.rel = row.rel == Rel::Le ? Rel::Ge : (row.rel == Rel::Ge ? Rel::Le : Rel::Eq);
      row.negated = true;
    }
  }

  // Column layout: structural | slacks/surplus | artificials.
  int n_slack = 0, n_art = 0;
  for (const auto& row : srows) {
    if (row.rel != Rel::Eq) ++n_slack;
    if (row.rel != Rel::Le) ++n_art;
  }
  const int n_total = n_struct + n_slack + n_art;

  Tableau tab;
  tab.m = m;
  tab.n = n_total;
  tab.t.assign(static_cast<std::size_t>(m) * (n_total + 1), 0.0);
  tab.basis.assign(m, -1);

  std::vector<int> init_col(m, -1);   // identity column introduced for each row
  std::vector<double> init_cost1(n_total, 0.0);
  int slack_at = n_struct, art_at = n_struct + n_slack;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n_struct; ++j) tab.at(i, j) = srows[i].coeffs[j];
    tab.rhs(i) = srows[i].rhs;
    if (srows[i].rel == Rel::Le) {
      tab.at(i, slack_at) = 1.0;
      tab.basis[i] = slack_at;
      init_col[i] = slack_at;
      ++slack_at;
    } else if (srows[i].rel == Rel::Ge) {
      tab.at(i, slack_at) = -1.0;
      ++slack_at;
      tab.at(i, art_at) = 1.0;
      tab.basis[i] = art_at;
      init_col[i] = art_at;
      init_cost1[art_at] = 1.0;
      ++art_at;
    } else {
      tab.at(i, art_at) = 1.0;
      tab.basis[i] = art_at;
      init_col[i] = art_at;
      init_cost1[art_at] = 1.0;
      ++art_at;
    }
  }

  // Phase-2 costs in min form over structural columns.
  std::vector<double> cost2(n_total, 0.0);
  const double obj_sign = problem.sense == Sense::Max ? -1.0 : 1.0;
  for (int j = 0; j < n_orig; ++j) {
    cost2[vmap[j].pos] += obj_sign * problem.objective[j];
    if (vmap[j].neg >= 0) cost2[vmap[j].neg] -= obj_sign * problem.objective[j];
  }

  CostRow z1, z2;
  z1.z.assign(n_total + 1, 0.0);
  z2.z.assign(n_total + 1, 0.0);
  for (int j = 0; j < n_total; ++j) {
    z1.z[j] = init_cost1[j];
    z2.z[j] = cost2[j];
  }
  // Canonicalize cost rows against the initial basis.
  for (int i = 0; i < m; ++i) {
    const int b = tab.basis[i];
    auto reduce = [&](CostRow& z, double cb) {
      if (cb == 0.0) return;
      for (int j = 0; j <= n_total; ++j) z.z[j] -= cb * tab.at(i, j);
    };
    reduce(z1, init_cost1[b]);
    reduce(z2, cost2[b]);
  }

  const long iter_cap = 20000 + 200L * (m + n_total);
  long iters = 0;

  std::vector<bool> allow_all(n_total, true);
  while (true) {
    if (++iters > iter_cap) throw NumericalBreakdown("lp: phase-1 iteration cap");
    StepOutcome s = simplex_step(tab, z1, &z2, tol, allow_all, /*allow_unbounded=*/false);
    if (s == StepOutcome::Done) break;
    if (s == StepOutcome::Unbounded)
      throw NumericalBreakdown("lp: phase-1 unbounded (inconsistent tableau)");
  }

  const double phase1_val = -z1.z[n_total];
  LpResult result;
  if (phase1_val > std::max(tol, 1e-8)) {
    result.status = LpStatus::Infeasible;
    // Duals of phase 1 give the Farkas witness: y_i = cost(init col) - z1(init col),
    // sign-flipped for rows that were negated during rhs normalization.
    result.farkas.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double y = init_cost1[init_col[i]] - z1.z[init_col[i]];
      if (srows[i].negated) y = -y;
      result.farkas[i] = y;
    }
    return result;
  }

  // Drive remaining artificial columns out of the basis where possible.
  const int art_begin = n_struct + n_slack;
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] < art_begin) continue;
    int target = -1;
    for (int j = 0; j < art_begin; ++j) {
      if (std::fabs(tab.at(i, j)) > kPivotTol) {
        target = j;
        break;
      }
    }
    if (target >= 0) pivot(tab, z1, &z2, i, target);
    // Otherwise the row is redundant; its artificial stays basic at zero.
  }

  std::vector<bool> allow2(n_total, true);
  for (int j = art_begin; j < n_total; ++j) allow2[j] = false;

  while (true) {
    if (++iters > iter_cap) throw NumericalBreakdown("lp: phase-2 iteration cap");
    StepOutcome s = simplex_step(tab, z2, &z1, tol, allow2, /*allow_unbounded=*/true);
    if (s == StepOutcome::Done) break;
    if (s == StepOutcome::Unbounded) {
      result.status = LpStatus::Unbounded;
      return result;
    }
  }

  Vec xstd(n_total, 0.0);
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] >= 0) xstd[tab.basis[i]] = tab.rhs(i);
  }
  result.x.assign(n_orig, 0.0);
  for (int j = 0; j < n_orig; ++j) {
    double v = xstd[vmap[j].pos] + vmap[j].shift;
    if (vmap[j].neg >= 0) v -= xstd[vmap[j].neg];
    result.x[j] = v;
  }
  result.value = dot(problem.objective, result.x);
  result.status = LpStatus::Optimal;
  return result;
}

}  // namespace phieq
