#include "phieq/learning.hpp"

#include <algorithm>

namespace phieq {

// ---------------------------------------------------------------------------
// ShellSet

bool ShellSet::contains(const Vec& y, double tol) const {
  if (norm2(y) > radius + tol) return false;
  for (const auto& h : cuts) {
    if (h.violation(y) > tol) return false;
  }
  return true;
}

void ShellSet::add_cut(Halfspace h) {
  check_dim(h.normal, dim, "shell cut");
  cuts.push_back(std::move(h));
  if (cuts.size() > cut_cap) cuts.erase(cuts.begin());
}

Vec ShellSet::project(const Vec& y, double tol, int max_rounds) const {
  check_dim(y, dim, "shell project");
  const std::size_t m = cuts.size() + 1;
  std::vector<Vec> corrections(m, Vec(dim, 0.0));
  Vec x = y;
  for (int round = 0; round < max_rounds; ++round) {
    double moved = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      Vec z = add(x, corrections[s]);
      Vec px;
      if (s == 0) {
        const double n = norm2(z);
        px = n > radius ? scale(z, radius / n) : z;
      } else {
        const auto& h = cuts[s - 1];
        const double v = h.violation(z);
        px = z;
        if (v > 0) axpy(-v, h.normal, px);
      }
      corrections[s] = sub(z, px);
      moved += norm2(sub(px, x));
      x = std::move(px);
    }
    if (moved <= tol) break;
  }
  return x;
}

double ShellSet::distance_lower_bound(const Vec& y) const {
  double d = std::max(0.0, norm2(y) - radius);
  for (const auto& h : cuts) d = std::max(d, h.violation(y));
  return d;
}

// ---------------------------------------------------------------------------
// Witness cut in parameter space: an image K m(z) + c escaping the body and a
// separating halfspace <w, .> <= b on the body give the parameter-space cut
// <(w m(z)^T, w), (K, c)> <= b, valid for every endomorphism.

namespace {

Halfspace witness_param_cut(const FeatureMap& fm, const Vec& witness_point,
                            const Halfspace& body_halfspace) {
  Vec m = fm.eval(witness_point);
  Vec normal;
  normal.reserve(fm.param_dim());
  for (double w : body_halfspace.normal) {
    for (double mc : m) normal.push_back(w * mc);
  }
  normal.insert(normal.end(), body_halfspace.normal.begin(), body_halfspace.normal.end());
  return Halfspace(std::move(normal), body_halfspace.offset);
}

}  // namespace

ShellEllipsoidResult shell_ellipsoid(const ShellSet& shell, const Vec& center, double q,
                                     const ConvexBody& body, const FeatureMap& fm,
                                     const ShellEllipsoidOptions& opts) {
  const int k = shell.dim;
  check_dim(center, k, "shell_ellipsoid center");
  if (!(q > 0)) throw BadBounds("shell_ellipsoid: search radius must be positive");
  if (!(opts.vol_radius > 0) || opts.vol_radius >= q)
    throw BadBounds("shell_ellipsoid: volume radius must be in (0, q)");

  ShellEllipsoidResult out;
  EllipsoidState ell;
  ell.center = center;
  ell.shape = Mat::identity(k);
  for (double& v : ell.shape.a) v *= q * q;

  const double threshold = log_unit_ball_volume(k) + k * std::log(opts.vol_radius);
  const long cap = opts.iteration_cap > 0
                       ? opts.iteration_cap
                       : ellipsoid_iteration_cap(k, q, 1.0, opts.vol_radius / q);

  while (log_volume(ell) >= threshold) {
    if (out.ellipsoid_cuts > cap)
      throw IterationCapExceeded("shell_ellipsoid: cut cap exceeded");
    const Vec& c = ell.center;

    // Feasibility cuts keep the center inside F = shell ∩ B_q(center0);
    // they never enter the returned polytope.
    std::optional<Vec> feas_normal;
    if (norm2(c) > shell.radius + opts.tol) {
      feas_normal = scale(c, 1.0 / norm2(c));
    } else {
      Vec off = sub(c, center);
      if (norm2(off) > q + opts.tol) {
        feas_normal = scale(off, 1.0 / norm2(off));
      } else {
        for (const auto& h : shell.cuts) {
          if (h.violation(c) > opts.tol) {
            feas_normal = h.normal;
            break;
          }
        }
        if (!feas_normal) {
          for (const auto& h : out.new_cuts) {
            if (h.violation(c) > opts.tol) {
              feas_normal = h.normal;
              break;
            }
          }
        }
      }
    }
    if (feas_normal) {
      ell = central_cut(ell, *feas_normal);
      ++out.ellipsoid_cuts;
      continue;
    }

    DeviationParams params = unflatten(fm, c);
    ++out.semi_sep_calls;
    SemiSepResult res = semi_separate(
        body, [&](const Vec& z) { return apply_deviation(params, fm, z); }, opts.efp_eps,
        opts.tol);
    if (res.is_efp()) {
      out.found = ShellFound{c, res.efp().mu, res.efp().l1_error};
      return out;
    }
    const auto& w = res.witness();
    auto hx = body.separate(w.image, opts.tol);
    if (!hx) throw Error("shell_ellipsoid: witness image not separated");
    Halfspace cut = witness_param_cut(fm, w.point, *hx);
    ell = central_cut(ell, cut.normal);
    ++out.ellipsoid_cuts;
    out.new_cuts.push_back(std::move(cut));
  }
  return out;
}

// ---------------------------------------------------------------------------
// shell_project

namespace {

ShellProjectResult project_paper_sweep(ShellSet& shell, const ConvexBody& body,
                                       const FeatureMap& fm, const Vec& target,
                                       const ShellProjectOptions& opts) {
  const double d_radius = shell.radius;
  const double delta = opts.delta_override > 0 ? opts.delta_override : opts.eps / (4.0 * d_radius);
  const double m_bound = fm.norm_bound();
  const double r = body.bounds().inner_radius;
  const double eps_prime = opts.eps_prime_override > 0
                               ? opts.eps_prime_override
                               : opts.eps * r / (32.0 * m_bound * d_radius * d_radius);

  ShellProjectResult out;

  // q = 0 degenerates the ellipsoid; test the target directly instead.
  if (shell.contains(target, opts.tol)) {
    DeviationParams params = unflatten(fm, target);
    ++out.semi_sep_calls;
    SemiSepResult res = semi_separate(
        body, [&](const Vec& z) { return apply_deviation(params, fm, z); }, opts.eps, opts.tol);
    if (res.is_efp()) {
      out.params = target;
      out.efp = res.efp().mu;
      out.efp_error = res.efp().l1_error;
      out.precision = 0.0;
      return out;
    }
    const auto& w = res.witness();
    auto hx = body.separate(w.image, opts.tol);
    if (!hx) throw Error("shell_project: witness image not separated");
    shell.add_cut(witness_param_cut(fm, w.point, *hx));
    ++out.witness_cuts_added;
  }

  // Start the sweep where the shell could first intersect the ball; smaller
  // radii are certified empty by the shell constraints themselves.
  const double skip = shell.distance_lower_bound(target);
  double q = delta;
  while (q + delta <= skip) q += delta;

  ShellEllipsoidOptions eopts;
  eopts.efp_eps = opts.eps;
  eopts.vol_radius = std::min(eps_prime, q / 2.0);
  eopts.tol = opts.tol;

  for (; q <= 2.0 * d_radius + delta; q += delta) {
    eopts.vol_radius = std::min(eps_prime, q / 2.0);
    ShellEllipsoidResult res = shell_ellipsoid(shell, target, q, body, fm, eopts);
    out.semi_sep_calls += res.semi_sep_calls;
    for (auto& cut : res.new_cuts) {
      shell.add_cut(std::move(cut));
      ++out.witness_cuts_added;
    }
    if (res.found) {
      out.params = res.found->params;
      out.efp = std::move(res.found->efp);
      out.efp_error = res.found->l1_error;
      out.precision = delta;  // no EFP-admitting point at radius q - delta
      return out;
    }
  }
  throw SweepExhausted("shell_project: sweep passed 2D without an EFP-admitting point");
}

ShellProjectResult project_cut_reproject(ShellSet& shell, const ConvexBody& body,
                                         const FeatureMap& fm, const Vec& target,
                                         const ShellProjectOptions& opts) {
  const int cap = opts.witness_cut_cap > 0 ? opts.witness_cut_cap : 64 * shell.dim + 256;
  ShellProjectResult out;

  Vec y = shell.contains(target, opts.tol) ? target : shell.project(target);
  for (int iter = 0; iter < cap; ++iter) {
    DeviationParams params = unflatten(fm, y);
    ++out.semi_sep_calls;
    SemiSepResult res = semi_separate(
        body, [&](const Vec& z) { return apply_deviation(params, fm, z); }, opts.eps, opts.tol);
    if (res.is_efp()) {
      out.params = y;
      out.efp = res.efp().mu;
      out.efp_error = res.efp().l1_error;
      out.precision = 0.0;  // y is the exact projection onto the final shell
      return out;
    }
    const auto& w = res.witness();
    auto hx = body.separate(w.image, opts.tol);
    if (!hx) throw Error("shell_project: witness image not separated");
    shell.add_cut(witness_param_cut(fm, w.point, *hx));
    ++out.witness_cuts_added;
    y = shell.project(target);
  }

  // Cut budget exhausted: retreat along the segment toward the identity
  // transformation, which always admits an exact expected fixed point. The
  // retreat distance is logged as the round's projection slack.
  Vec id_flat = flatten(identity_params(fm));
  double lo = 0.0, hi = 1.0;
  Vec best = id_flat;
  SparseDistribution best_mu;
  double best_err = 0.0;
  for (int step = 0; step < 24; ++step) {
    const double t = 0.5 * (lo + hi);
    Vec p = scale(y, 1.0 - t);
    axpy(t, id_flat, p);
    DeviationParams params = unflatten(fm, p);
    ++out.semi_sep_calls;
    SemiSepResult res = semi_separate(
        body, [&](const Vec& z) { return apply_deviation(params, fm, z); }, opts.eps, opts.tol);
    if (res.is_efp()) {
      best = p;
      best_mu = res.efp().mu;
      best_err = res.efp().l1_error;
      hi = t;
    } else {
      lo = t;
    }
  }
  if (best_mu.empty()) {
    DeviationParams params = unflatten(fm, id_flat);
    SemiSepResult res = semi_separate(
        body, [&](const Vec& z) { return apply_deviation(params, fm, z); }, opts.eps, opts.tol);
    if (!res.is_efp()) throw Error("shell_project: identity map lost its fixed point");
    best_mu = res.efp().mu;
    best_err = res.efp().l1_error;
  }
  out.params = best;
  out.efp = std::move(best_mu);
  out.efp_error = best_err;
  out.precision = norm2(sub(best, y));
  return out;
}

}  // namespace

ShellProjectResult shell_project(ShellSet& shell, const ConvexBody& body, const FeatureMap& fm,
                                 const Vec& target, const ShellProjectOptions& opts) {
  check_dim(target, shell.dim, "shell_project target");
  if (!(opts.eps > 0)) throw BadBounds("shell_project: eps must be positive");
  if (opts.mode == SweepMode::PaperSweep) {
    return project_paper_sweep(shell, body, fm, target, opts);
  }
  return project_cut_reproject(shell, body, fm, target, opts);
}

// ---------------------------------------------------------------------------
// RegretLedger

void RegretLedger::record(LedgerRound round) { rounds_.push_back(std::move(round)); }

double RegretLedger::phi_side(const Vec& params) const {
  double s = 0.0;
  for (const auto& r : rounds_) {
    s += dot(params, r.lifted_u) - dot(r.u, r.mean_x);
  }
  return s;
}

double RegretLedger::shell_side(const Vec& params) const {
  double s = 0.0;
  for (const auto& r : rounds_) {
    s += dot(params, r.lifted_u) - dot(r.params, r.lifted_u);
  }
  return s;
}

double RegretLedger::efp_residual() const {
  double s = 0.0;
  for (const auto& r : rounds_) {
    s += dot(r.params, r.lifted_u) - dot(r.u, r.mean_x);
  }
  return s;
}

double RegretLedger::efp_error_total() const {
  double s = 0.0;
  for (const auto& r : rounds_) s += r.efp_error;
  return s;
}

double RegretLedger::regret_estimate(const std::vector<Vec>& candidates) const {
  double best = 0.0;
  for (const auto& c : candidates) best = std::max(best, phi_side(c));
  return best;
}

double RegretLedger::shell_regret_estimate(const std::vector<Vec>& candidates) const {
  double best = 0.0;
  for (const auto& c : candidates) best = std::max(best, shell_side(c));
  return best;
}

std::vector<Vec> candidate_deviations(const ConvexBody& body, const FeatureMap& fm, int count,
                                      std::uint64_t seed) {
  std::vector<Vec> out;
  const int k = fm.param_dim();
  const int d = body.dim();
  Vec id_flat = flatten(identity_params(fm));
  out.push_back(id_flat);
  out.push_back(Vec(k, 0.0));  // the zero map; the body's inner ball holds 0

  // Constant maps to linopt vertices.
  Rng rng(seed);
  auto constant_map = [&](const Vec& point) {
    Vec p(k, 0.0);
    std::copy(point.begin(), point.end(), p.end() - d);
    return p;
  };
  Vec axis(d, 0.0);
  for (int j = 0; j < d && static_cast<int>(out.size()) < count; ++j) {
    axis[j] = 1.0;
    out.push_back(constant_map(body.linopt(axis)));
    axis[j] = -1.0;
    if (static_cast<int>(out.size()) < count) out.push_back(constant_map(body.linopt(axis)));
    axis[j] = 0.0;
  }

  // Inner-ball deviations and mixtures with the identity; both stay inside
  // Phi^m by the inner-radius bound and convexity.
  BallBounds bounds = body.bounds();
  bounds.inner_radius = std::min(bounds.inner_radius, 0.999 * bounds.outer_radius);
  const PhiRadii radii = phi_radii(fm, bounds, d);
  while (static_cast<int>(out.size()) < count) {
    Vec p = rng.in_ball(k, radii.inner * 0.95);
    if (rng.uniform01() < 0.5) {
      const double t = rng.uniform01();
      p = scale(p, t * 0.95);
      axpy(1.0 - t, id_flat, p);
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PhiRegretMinimizer

PhiRegretMinimizer::PhiRegretMinimizer(BodyPtr body, FeatureMap fm, RegretMinimizerOptions opts)
    : body_(std::move(body)), fm_(std::move(fm)), opts_(opts) {
  BallBounds bounds = body_->bounds();
  if (norm2(bounds.inner_center) > 1e-9)
    throw BadBounds("regret minimizer: body inner ball must sit at the origin");
  bounds.inner_radius = std::min(bounds.inner_radius, 0.999 * bounds.outer_radius);
  const int k = fm_.param_dim();
  const PhiRadii radii = phi_radii(fm_, bounds, body_->dim());
  shell_.dim = k;
  shell_.radius = radii.outer;
  epsilon_ = opts_.epsilon > 0 ? opts_.epsilon
                               : 1.0 / (100.0 * k * std::max(1, opts_.horizon));
  eta_ = opts_.eta > 0 ? opts_.eta
                       : shell_.radius / std::sqrt(static_cast<double>(opts_.horizon) * k);
  params_ = flatten(identity_params(fm_));
  mu_ = SparseDistribution::point_mass(bounds.inner_center);
}

void PhiRegretMinimizer::observe(const Vec& u) {
  check_dim(u, body_->dim(), "utility vector");
  for (double v : u) {
    if (!std::isfinite(v) || v < -1.0 - 1e-12 || v > 1.0 + 1e-12)
      throw BadBounds("utility vector outside [-1, 1]");
  }

  const FeatureMap& fm = fm_;
  Vec mexp = mu_.expect([&fm](const Vec& x) { return fm.eval(x); });
  Vec mean_x = mu_.mean();

  Vec lifted;
  lifted.reserve(fm_.param_dim());
  for (double uv : u) {
    for (double mv : mexp) lifted.push_back(uv * mv);
  }
  lifted.insert(lifted.end(), u.begin(), u.end());

  // Recomputed EFP error of the played transformation, by linearity of the
  // deviation in the feature expectations.
  DeviationParams cur = unflatten(fm_, params_);
  const double efp_err = norm1(sub(add(matvec(cur.k, mexp), cur.c), mean_x));

  LedgerRound round;
  round.u = u;
  round.params = params_;
  round.lifted_u = lifted;
  round.mean_x = mean_x;
  round.efp_error = efp_err;
  round.proj_slack = last_proj_slack_;
  round.cuts_total = static_cast<int>(shell_.cuts.size());
  ledger_.record(std::move(round));

  Vec target = params_;
  axpy(eta_, lifted, target);

  ShellProjectOptions popts;
  popts.eps = epsilon_;
  popts.mode = opts_.mode;
  popts.tol = opts_.tol;
  ShellProjectResult res = shell_project(shell_, *body_, fm_, target, popts);
  params_ = res.params;
  mu_ = std::move(res.efp);
  last_proj_slack_ = res.precision;
  ++round_;
}

// ---------------------------------------------------------------------------
// Gordon template

namespace {

// Euclidean projection onto the probability simplex (sort-based).
Vec project_simplex(const Vec& v) {
  const int d = static_cast<int>(v.size());
  Vec u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double tau = 0.0;
  int rho = 0;
  for (int j = 0; j < d; ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / (j + 1);
    if (u[j] - t > 0) {
      rho = j + 1;
      tau = t;
    }
  }
  (void)rho;
  Vec x(d);
  for (int j = 0; j < d; ++j) x[j] = std::max(v[j] - tau, 0.0);
  return x;
}

}  // namespace

StochasticMatrixGd::StochasticMatrixGd(int dim, double eta)
    : dim_(dim), eta_(eta), k_(Mat::identity(dim)) {}

Vec StochasticMatrixGd::next_params() {
  Vec flat;
  flat.reserve(dim_ * dim_ + dim_);
  flat.insert(flat.end(), k_.a.begin(), k_.a.end());
  flat.insert(flat.end(), static_cast<std::size_t>(dim_), 0.0);
  return flat;
}

void StochasticMatrixGd::observe_lifted(const Vec& u) {
  check_dim(u, static_cast<std::size_t>(dim_) * dim_ + dim_, "lifted utility");
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) k_(i, j) += eta_ * u[static_cast<std::size_t>(i) * dim_ + j];
  }
  // Columns live on the simplex.
  for (int j = 0; j < dim_; ++j) {
    Vec col(dim_);
    for (int i = 0; i < dim_; ++i) col[i] = k_(i, j);
    col = project_simplex(col);
    for (int i = 0; i < dim_; ++i) k_(i, j) = col[i];
  }
}

ConstantMapGd::ConstantMapGd(const Vec& lo, const Vec& hi, int kprime, double eta)
    : lo_(lo), hi_(hi), kprime_(kprime), eta_(eta) {
  c_.resize(lo.size());
  for (std::size_t j = 0; j < lo.size(); ++j) c_[j] = 0.5 * (lo[j] + hi[j]);
}

Vec ConstantMapGd::next_params() {
  Vec flat(static_cast<std::size_t>(c_.size()) * kprime_, 0.0);
  flat.insert(flat.end(), c_.begin(), c_.end());
  return flat;
}

void ConstantMapGd::observe_lifted(const Vec& u) {
  const std::size_t d = c_.size();
  check_dim(u, d * kprime_ + d, "lifted utility");
  for (std::size_t j = 0; j < d; ++j) {
    c_[j] = std::clamp(c_[j] + eta_ * u[d * kprime_ + j], lo_[j], hi_[j]);
  }
}

GordonEfpWrapper::GordonEfpWrapper(BodyPtr body, FeatureMap fm, ExternalParamsMinimizer& external,
                                   double eps, double tol)
    : body_(std::move(body)), fm_(std::move(fm)), external_(external), eps_(eps), tol_(tol) {
  refresh();
}

void GordonEfpWrapper::refresh() {
  params_ = external_.next_params();
  DeviationParams p = unflatten(fm_, params_);
  EfpResult res = efp_eah(
      *body_, [&](const Vec& x) { return apply_deviation(p, fm_, x); }, eps_, tol_);
  mu_ = std::move(res.mu);
}

void GordonEfpWrapper::observe(const Vec& u) {
  const FeatureMap& fm = fm_;
  Vec mexp = mu_.expect([&fm](const Vec& x) { return fm.eval(x); });
  Vec mean_x = mu_.mean();
  Vec lifted;
  lifted.reserve(fm_.param_dim());
  for (double uv : u) {
    for (double mv : mexp) lifted.push_back(uv * mv);
  }
  lifted.insert(lifted.end(), u.begin(), u.end());

  DeviationParams cur = unflatten(fm_, params_);
  LedgerRound round;
  round.u = u;
  round.params = params_;
  round.lifted_u = lifted;
  round.mean_x = mean_x;
  round.efp_error = norm1(sub(add(matvec(cur.k, mexp), cur.c), mean_x));
  ledger_.record(std::move(round));

  external_.observe_lifted(lifted);
  refresh();
}

// ---------------------------------------------------------------------------
// Adversaries

Vec SinusoidalAdversary::next(int round, const SparseDistribution&) {
  Vec u(dim_);
  for (int j = 0; j < dim_; ++j) {
    u[j] = std::sin(2.0 * M_PI * (round / period_ + static_cast<double>(j) / dim_));
  }
  return u;
}

Vec SeededRandomAdversary::next(int, const SparseDistribution&) {
  Vec u(dim_);
  for (int j = 0; j < dim_; ++j) u[j] = rng_.uniform(-1.0, 1.0);
  return u;
}

BestResponseAdversary::BestResponseAdversary(Mat a, BodyPtr opponent_body)
    : a_(std::move(a)), opponent_(std::move(opponent_body)) {
  if (a_.cols != opponent_->dim()) throw DimensionMismatch("best response: matrix/body mismatch");
}

Vec BestResponseAdversary::next(int, const SparseDistribution& last_play) {
  Vec xbar = last_play.empty() ? Vec(a_.rows, 0.0) : last_play.mean();
  // Opponent minimizes <xbar, A y> over their body.
  Vec direction = mat_tvec(a_, xbar);
  Vec y = opponent_->linopt(scale(direction, -1.0));
  Vec u = matvec(a_, y);
  for (double& v : u) v = std::clamp(v, -1.0, 1.0);
  return u;
}

std::unique_ptr<Adversary> adversary_from_json(const nlohmann::json& spec, int dim,
                                               std::uint64_t seed) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "constant") {
    Vec u = spec.at("u").get<Vec>();
    check_dim(u, dim, "constant adversary u");
    return std::make_unique<ConstantAdversary>(std::move(u));
  }
  if (type == "sinusoidal") {
    const double period = spec.contains("period") ? spec.at("period").get<double>() : 64.0;
    return std::make_unique<SinusoidalAdversary>(dim, period);
  }
  if (type == "seeded_random") {
    return std::make_unique<SeededRandomAdversary>(dim, seed);
  }
  if (type == "best_response") {
    const auto& jm = spec.at("matrix");
    Mat a(static_cast<int>(jm.size()), static_cast<int>(jm.at(0).size()));
    for (int i = 0; i < a.rows; ++i)
      for (int j = 0; j < a.cols; ++j) a(i, j) = jm.at(i).at(j).get<double>();
    return std::make_unique<BestResponseAdversary>(std::move(a),
                                                   body_from_json(spec.at("opponent")));
  }
  throw ConfigInvalid("adversary: unknown type '" + type + "'");
}

}  // namespace phieq
