#include "phieq/games.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace phieq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// NormalFormGame

NormalFormGame::NormalFormGame(std::vector<int> action_counts,
                               std::vector<std::vector<double>> payoffs)
    : actions_(std::move(action_counts)), payoffs_(std::move(payoffs)) {
  if (actions_.empty()) throw ConfigInvalid("normal form: no players");
  std::size_t total = 1;
  for (int a : actions_) {
    if (a < 1) throw ConfigInvalid("normal form: player needs at least one action");
    total *= static_cast<std::size_t>(a);
  }
  if (payoffs_.size() != actions_.size())
    throw ConfigInvalid("normal form: one payoff tensor per player required");
  double peak = 0.0;
  for (auto& tensor : payoffs_) {
    if (tensor.size() != total) throw ConfigInvalid("normal form: tensor size mismatch");
    check_finite(tensor, "normal form payoffs");
    for (double v : tensor) peak = std::max(peak, std::fabs(v));
  }
  if (peak > 1.0) {
    for (auto& tensor : payoffs_) {
      for (double& v : tensor) v /= peak;
    }
  }
}

std::size_t NormalFormGame::flat_index(const std::vector<int>& profile) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < actions_.size(); ++j) {
    if (profile[j] < 0 || profile[j] >= actions_[j])
      throw DimensionMismatch("normal form: action out of range");
    idx = idx * static_cast<std::size_t>(actions_[j]) + static_cast<std::size_t>(profile[j]);
  }
  return idx;
}

double NormalFormGame::payoff(int player, const std::vector<int>& profile) const {
  return payoffs_[player][flat_index(profile)];
}

Vec NormalFormGame::gradient(int player, const std::vector<Vec>& profile) const {
  const int n = players();
  if (static_cast<int>(profile.size()) != n)
    throw DimensionMismatch("normal form gradient: profile size");
  for (int j = 0; j < n; ++j) {
    if (j == player) continue;
    check_dim(profile[j], actions_[j], "normal form gradient: strategy");
  }
  Vec g(actions_[player], 0.0);
  std::vector<int> idx(n, 0);
  while (true) {
    double w = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == player) continue;
      w *= profile[j][idx[j]];
    }
    if (w != 0.0) g[idx[player]] += w * payoffs_[player][flat_index(idx)];
    int j = n - 1;
    while (j >= 0) {
      if (++idx[j] < actions_[j]) break;
      idx[j] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return g;
}

json NormalFormGame::to_json() const {
  // Flat tensors with the action counts; round-trips through from_json.
  json tensors = json::array();
  for (const auto& t : payoffs_) tensors.push_back(json(t));
  return json{{"type", "normal_form"}, {"actions", json(actions_)}, {"payoffs", tensors}};
}

namespace {

void flatten_tensor(const json& node, const std::vector<int>& shape, std::size_t depth,
                    std::vector<double>& out) {
  if (depth == shape.size()) {
    if (!node.is_number()) throw ConfigInvalid("normal form: payoff tensor too shallow");
    out.push_back(node.get<double>());
    return;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != shape[depth])
    throw ConfigInvalid("normal form: payoff tensor shape mismatch");
  for (const auto& child : node) flatten_tensor(child, shape, depth + 1, out);
}

std::vector<int> infer_shape(const json& node) {
  std::vector<int> shape;
  const json* cur = &node;
  while (cur->is_array()) {
    if (cur->empty()) throw ConfigInvalid("normal form: empty payoff axis");
    shape.push_back(static_cast<int>(cur->size()));
    cur = &(*cur)[0];
  }
  return shape;
}

}  // namespace

NormalFormGame NormalFormGame::from_json(const json& spec) {
  const auto& tensors = spec.at("payoffs");
  if (!tensors.is_array() || tensors.empty())
    throw ConfigInvalid("normal form: payoffs must be a non-empty array");
  std::vector<int> shape;
  if (spec.contains("actions")) {
    for (const auto& a : spec.at("actions")) shape.push_back(a.get<int>());
  } else {
    shape = infer_shape(tensors[0]);
  }
  std::vector<std::vector<double>> payoffs;
  for (const auto& tensor : tensors) {
    std::vector<double> flat;
    if (tensor.is_array() && !tensor.empty() && tensor[0].is_number() &&
        shape.size() > 1) {
      // already flat
      for (const auto& v : tensor) flat.push_back(v.get<double>());
    } else {
      flatten_tensor(tensor, shape, 0, flat);
    }
    payoffs.push_back(std::move(flat));
  }
  return NormalFormGame(std::move(shape), std::move(payoffs));
}

// ---------------------------------------------------------------------------
// MultilinearGame

Vec MultilinearGame::checked_gradient(int player, const std::vector<Vec>& profile) const {
  Vec g = gradient(player, profile);
  check_dim(g, bodies[player]->dim(), "gradient");
  const double n = norm2(g);
  if (n > gradient_bound + 1e-7)
    throw Error("gradient bound violated: ||g||=" + std::to_string(n) + " > B=" +
                std::to_string(gradient_bound));
  return g;
}

MultilinearGame multilinear_from_normal_form(std::shared_ptr<const NormalFormGame> game) {
  MultilinearGame g;
  double bound = 1.0;
  for (int i = 0; i < game->players(); ++i) {
    const int a = game->action_counts()[i];
    g.bodies.push_back(make_simplex(a));
    bound = std::max(bound, std::sqrt(static_cast<double>(a)));
  }
  g.gradient_bound = bound;
  g.gradient = [game](int player, const std::vector<Vec>& profile) {
    return game->gradient(player, profile);
  };
  return g;
}

MultilinearGame bilinear_game(Mat a, Mat b, BodyPtr x1, BodyPtr x2) {
  if (a.rows != x1->dim() || a.cols != x2->dim() || b.rows != x1->dim() || b.cols != x2->dim())
    throw DimensionMismatch("bilinear game: payoff matrix shape mismatch");
  MultilinearGame g;
  g.bodies = {std::move(x1), std::move(x2)};
  const double r1 = g.bodies[0]->bounds().outer_radius;
  const double r2 = g.bodies[1]->bounds().outer_radius;
  g.gradient_bound = std::max(frobenius(a) * r2, frobenius(b) * r1) + 1e-12;
  auto am = std::make_shared<Mat>(std::move(a));
  auto bm = std::make_shared<Mat>(std::move(b));
  g.gradient = [am, bm](int player, const std::vector<Vec>& profile) {
    if (player == 0) return matvec(*am, profile[1]);
    return mat_tvec(*bm, profile[0]);
  };
  return g;
}

MultilinearGame game_from_json(const json& spec) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "normal_form") {
    return multilinear_from_normal_form(
        std::make_shared<const NormalFormGame>(NormalFormGame::from_json(spec)));
  }
  if (type == "multilinear") {
    const std::string grad = spec.at("gradient").get<std::string>();
    if (grad != "bilinear")
      throw ConfigInvalid("multilinear game: only 'bilinear' gradients are supported");
    const auto& bodies = spec.at("bodies");
    if (bodies.size() != 2) throw ConfigInvalid("bilinear game: exactly two bodies");
    const auto& mats = spec.at("matrices");
    if (mats.size() != 2) throw ConfigInvalid("bilinear game: exactly two matrices");
    auto to_mat = [](const json& jm) {
      const int rows = static_cast<int>(jm.size());
      const int cols = static_cast<int>(jm.at(0).size());
      Mat m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = jm.at(i).at(j).get<double>();
      return m;
    };
    return bilinear_game(to_mat(mats[0]), to_mat(mats[1]), body_from_json(bodies[0]),
                         body_from_json(bodies[1]));
  }
  throw ConfigInvalid("game: unknown type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Player normalization: every strategy set is brought to a full-dimensional
// body whose certified inner ball sits at the origin (simplices are reduced
// to d-1 coordinates first). The lift x = A z + b returns to original
// coordinates; its top block is the identity, so undoing it is a truncation.

namespace {

struct PlayerSpace {
  BodyPtr solver;
  Mat lift_a;
  Vec lift_b;
  double grad_factor = 1.0;  // upper bound on the spectral norm of lift_a
  std::function<Vec(Rng&)> sampler;

  Vec lift(const Vec& z) const { return add(matvec(lift_a, z), lift_b); }
  Vec unlift(const Vec& x) const {
    Vec z(solver->dim());
    for (int j = 0; j < solver->dim(); ++j) z[j] = x[j] - lift_b[j];
    return z;
  }
};

Vec sample_simplex_uniform(Rng& rng, int d) {
  // Uniform over the standard simplex by sorted uniform gaps.
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

PlayerSpace normalize_player(const BodyPtr& body) {
  PlayerSpace ps;
  const std::string& kind = body->kind();
  const json desc = body->to_json();
  if (kind == "box") {
    Vec lo = desc.at("lo").get<Vec>();
    Vec hi = desc.at("hi").get<Vec>();
    const int d = static_cast<int>(lo.size());
    Vec center(d);
    Vec clo(d), chi(d);
    for (int j = 0; j < d; ++j) {
      center[j] = 0.5 * (lo[j] + hi[j]);
      clo[j] = lo[j] - center[j];
      chi[j] = hi[j] - center[j];
    }
    ps.solver = make_box(clo, chi);
    ps.lift_a = Mat::identity(d);
    ps.lift_b = center;
    ps.sampler = [clo, chi, d](Rng& rng) {
      Vec z(d);
      for (int j = 0; j < d; ++j) z[j] = rng.uniform(clo[j], chi[j]);
      return z;
    };
    return ps;
  }
  if (kind == "ball") {
    Vec center = desc.at("center").get<Vec>();
    const double radius = desc.at("radius").get<double>();
    const int d = static_cast<int>(center.size());
    ps.solver = make_ball(Vec(d, 0.0), radius);
    ps.lift_a = Mat::identity(d);
    ps.lift_b = center;
    ps.sampler = [d, radius](Rng& rng) { return rng.in_ball(d, radius); };
    return ps;
  }
  if (kind == "simplex") {
    const int d = body->dim();
    const int m = d - 1;
    // Corner simplex { z >= 0, sum z <= 1 } shifted so its Chebyshev center
    // is the origin.
    Mat a(m + 1, m);
    Vec b(m + 1, 0.0);
    for (int i = 0; i < m; ++i) a(i, i) = -1.0;
    for (int j = 0; j < m; ++j) a(m, j) = 1.0;
    b[m] = 1.0;
    BodyPtr corner = make_hpolytope(a, b, std::nullopt);
    Vec cheb = corner->bounds().inner_center;
    // Shift rows: A (z + cheb) <= b. Rows of `corner` are normalized already;
    // rebuild from the raw rows for clarity.
    Vec b_shift(m + 1);
    for (int i = 0; i <= m; ++i) {
      double dotv = 0.0;
      for (int j = 0; j < m; ++j) dotv += a(i, j) * cheb[j];
      b_shift[i] = b[i] - dotv;
    }
    BodyPtr centered = make_hpolytope(a, b_shift, std::nullopt);
    // Pin the inner ball at the origin; its radius is the smallest row slack
    // at zero, with rows rescaled to unit length.
    BallBounds bounds = centered->bounds();
    double r0 = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= m; ++i) {
      Vec row(m);
      for (int j = 0; j < m; ++j) row[j] = a(i, j);
      r0 = std::min(r0, b_shift[i] / norm2(row));
    }
    bounds.inner_center.assign(m, 0.0);
    bounds.inner_radius = r0;
    centered = make_hpolytope(a, b_shift, bounds);

    ps.solver = centered;
    ps.lift_a = Mat(d, m);
    for (int j = 0; j < m; ++j) {
      ps.lift_a(j, j) = 1.0;
      ps.lift_a(d - 1, j) = -1.0;
    }
    ps.lift_b.assign(d, 0.0);
    double csum = 0.0;
    for (int j = 0; j < m; ++j) {
      ps.lift_b[j] = cheb[j];
      csum += cheb[j];
    }
    ps.lift_b[d - 1] = 1.0 - csum;
    ps.grad_factor = std::sqrt(static_cast<double>(d));
    Vec cheb_copy = cheb;
    ps.sampler = [d, m, cheb_copy](Rng& rng) {
      Vec x = sample_simplex_uniform(rng, d);
      Vec z(m);
      for (int j = 0; j < m; ++j) z[j] = x[j] - cheb_copy[j];
      return z;
    };
    return ps;
  }
  if (kind == "hpolytope") {
    Mat a(0, 0);
    {
      const auto& ja = desc.at("A");
      const int rows = static_cast<int>(ja.size());
      const int cols = static_cast<int>(ja.at(0).size());
      a = Mat(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) a(i, j) = ja.at(i).at(j).get<double>();
    }
    Vec b = desc.at("b").get<Vec>();
    const Vec center = body->bounds().inner_center;
    Vec b_shift(b.size());
    for (int i = 0; i < a.rows; ++i) {
      double dotv = 0.0;
      for (int j = 0; j < a.cols; ++j) dotv += a(i, j) * center[j];
      b_shift[i] = b[i] - dotv;
    }
    BodyPtr centered = make_hpolytope(a, b_shift, std::nullopt);
    BallBounds bounds = centered->bounds();
    double r0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b_shift.size(); ++i) r0 = std::min(r0, b_shift[i]);
    if (!(r0 > 0)) throw BadBounds("game: strategy polytope has no inner ball at its center");
    bounds.inner_center.assign(a.cols, 0.0);
    bounds.inner_radius = r0;
    centered = make_hpolytope(a, b_shift, bounds);

    const int d = a.cols;
    ps.solver = centered;
    ps.lift_a = Mat::identity(d);
    ps.lift_b = center;
    // Rejection from the coordinate box, falling back to mixtures of
    // vertices; constraint points need validity, not uniformity.
    BodyPtr solver_copy = centered;
    ps.sampler = [solver_copy, d](Rng& rng) {
      const double r = solver_copy->bounds().outer_radius;
      for (int tries = 0; tries < 256; ++tries) {
        Vec z(d);
        for (int j = 0; j < d; ++j) z[j] = rng.uniform(-r, r);
        if (solver_copy->member(z, 1e-12)) return z;
      }
      Vec u = rng.unit_vector(d);
      Vec v1 = solver_copy->linopt(u);
      Vec v2 = solver_copy->linopt(scale(u, -1.0));
      const double t = rng.uniform01();
      Vec z = scale(v1, t);
      axpy(1.0 - t, v2, z);
      return z;
    };
    return ps;
  }
  throw ModeUnavailable("game: unsupported strategy body kind '" + kind + "'");
}

struct SolveSpace {
  std::vector<PlayerSpace> players;
  std::vector<FeatureMap> fms;
  std::vector<Vec> id_flat;
  std::vector<int> offsets;  // parameter block offsets, plus total at the end
  double r_y = 0.0;
  double g_bound = 0.0;
  double solver_grad_bound = 0.0;

  int total_dim() const { return offsets.back(); }
  int player_count() const { return static_cast<int>(players.size()); }
};

SolveSpace build_solve_space(const MultilinearGame& game,
                             const std::vector<json>& feature_specs) {
  if (static_cast<int>(feature_specs.size()) != game.players())
    throw ConfigInvalid("equilibrium: one feature spec per player required");
  SolveSpace space;
  double outer_sq = 0.0;
  double gb_sq = 0.0;
  double max_factor = 1.0;
  space.offsets.push_back(0);
  for (int i = 0; i < game.players(); ++i) {
    PlayerSpace ps = normalize_player(game.bodies[i]);
    BallBounds bounds = ps.solver->bounds();
    // Balls at the origin have r = R; the radii formulas want r < R.
    bounds.inner_radius = std::min(bounds.inner_radius, 0.999 * bounds.outer_radius);
    FeatureMap fm =
        FeatureMap::from_json(feature_specs[i], ps.solver->dim(), bounds.outer_radius);
    PhiRadii radii = phi_radii(fm, bounds, ps.solver->dim());
    DeviationParams id = identity_params(fm);
    outer_sq += radii.outer * radii.outer;
    const double bf = ps.grad_factor * game.gradient_bound;
    gb_sq += bf * bf * (1.0 + fm.norm_bound() * fm.norm_bound());
    max_factor = std::max(max_factor, ps.grad_factor);
    space.offsets.push_back(space.offsets.back() + fm.param_dim());
    space.id_flat.push_back(flatten(id));
    space.fms.push_back(std::move(fm));
    space.players.push_back(std::move(ps));
  }
  space.r_y = 2.0 * std::sqrt(outer_sq);
  space.g_bound = std::sqrt(gb_sq);
  space.solver_grad_bound = max_factor * game.gradient_bound;
  return space;
}

// Gradient in solver coordinates at a solver-coordinate profile.
Vec solver_gradient(const MultilinearGame& game, const SolveSpace& space, int player,
                    const std::vector<Vec>& z_profile) {
  std::vector<Vec> xs(z_profile.size());
  for (std::size_t j = 0; j < z_profile.size(); ++j) xs[j] = space.players[j].lift(z_profile[j]);
  Vec g = game.checked_gradient(player, xs);
  return mat_tvec(space.players[player].lift_a, g);
}

}  // namespace

// ---------------------------------------------------------------------------
// GER-or-SEP oracle for the parameter-space EAH run. Dual coordinates are
// shifted so the identity deviation profile sits at the origin: a candidate y
// decodes to per-player parameters p_i = id_i - y_i, making the pairing
// <y, G(x)> exactly linear with G blocks (g_i m_i(x_i)^T, g_i).

namespace {

struct GameOracle {
  MultilinearGame game;
  SolveSpace space;
  double eps_prime = 0.0;
  double tol = 1e-9;
  // Witness points per player, recorded for the sampled-LP verifier.
  std::shared_ptr<std::vector<std::vector<Vec>>> witnesses;

  GerOrSepAnswer operator()(const Vec& y) const {
    const int n = space.player_count();
    std::vector<SparseDistribution> factors(n);
    for (int i = 0; i < n; ++i) {
      const int at = space.offsets[i];
      const int len = space.offsets[i + 1] - at;
      Vec p_flat(len);
      for (int j = 0; j < len; ++j) p_flat[j] = space.id_flat[i][j] - y[at + j];
      DeviationParams params = unflatten(space.fms[i], p_flat);
      const FeatureMap& fm = space.fms[i];
      const ConvexBody& body = *space.players[i].solver;
      MapFn map = [&params, &fm](const Vec& z) { return apply_deviation(params, fm, z); };
      SemiSepResult res = semi_separate(body, map, eps_prime, tol);
      if (!res.is_efp()) {
        const auto& w = res.witness();
        auto hx = body.separate(w.image, tol);
        if (!hx) throw Error("game oracle: witness image not separated");
        (*witnesses)[i].push_back(w.point);
        // <w, K m(z) + c> <= hx.offset for every true endomorphism; in the
        // shifted dual coordinates that reads <-a, y_i> <= offset - <a, id_i>.
        Vec mz = fm.eval(w.point);
        Vec a_block;
        a_block.reserve(len);
        for (double wr : hx->normal) {
          for (double mc : mz) a_block.push_back(wr * mc);
        }
        a_block.insert(a_block.end(), hx->normal.begin(), hx->normal.end());
        Vec normal(y.size(), 0.0);
        for (int j = 0; j < len; ++j) normal[at + j] = -a_block[j];
        const double offset = hx->offset - dot(a_block, space.id_flat[i]);
        return SepAnswer{Halfspace(std::move(normal), offset)};
      }
      factors[i] = res.efp().mu;
    }

    // Product response: the multilinear gradient at the factor means equals
    // the expected gradient, so the G column needs no product enumeration.
    std::vector<Vec> means(n);
    for (int i = 0; i < n; ++i) means[i] = factors[i].mean();
    Vec gbar(space.total_dim(), 0.0);
    for (int i = 0; i < n; ++i) {
      Vec g = solver_gradient(game, space, i, means);
      const FeatureMap& fm = space.fms[i];
      Vec mbar = factors[i].expect([&fm](const Vec& z) { return fm.eval(z); });
      int at = space.offsets[i];
      for (double gr : g) {
        for (double mc : mbar) gbar[at++] = gr * mc;
      }
      for (double gr : g) gbar[at++] = gr;
    }
    GoodEnough ge;
    ge.gbar = std::move(gbar);
    ge.factored = std::make_shared<FactoredResponse>(FactoredResponse{std::move(factors)});
    return ge;
  }
};

}  // namespace

GameGerOrSep gerorsep_for_games(const MultilinearGame& game,
                                const std::vector<json>& feature_specs, double eps_prime,
                                double tol) {
  if (!(eps_prime > 0)) throw BadBounds("gerorsep: eps_prime must be positive");
  auto state = std::make_shared<GameOracle>();
  state->game = game;
  state->space = build_solve_space(game, feature_specs);
  state->eps_prime = eps_prime;
  state->tol = tol;
  state->witnesses = std::make_shared<std::vector<std::vector<Vec>>>(game.players());

  GameGerOrSep out;
  out.oracle = [state](const Vec& y) { return (*state)(y); };
  out.param_dim = state->space.total_dim();
  out.r_y = state->space.r_y;
  out.g_bound = state->space.g_bound;
  out.eps_prime = eps_prime;
  out.identity_flat = state->space.id_flat;
  out.witness_points = state->witnesses;
  return out;
}

EquilibriumResult compute_phi_equilibrium(const MultilinearGame& game,
                                          const std::vector<json>& feature_specs,
                                          double epsilon, const EquilibriumOptions& opts) {
  if (!(epsilon > 0)) throw BadBounds("equilibrium: epsilon must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  GameOracle oracle;
  oracle.game = game;
  oracle.space = build_solve_space(game, feature_specs);
  oracle.tol = opts.tol;
  const int n = game.players();
  oracle.eps_prime = epsilon / (4.0 * n * oracle.space.solver_grad_bound);
  oracle.witnesses = std::make_shared<std::vector<std::vector<Vec>>>(n);

  EahOptions eopts;
  eopts.dim = oracle.space.total_dim();
  eopts.radius = oracle.space.r_y;
  eopts.bound = oracle.space.g_bound;
  eopts.epsilon = epsilon;
  eopts.box_halfwidth = oracle.space.r_y;
  eopts.product_atom_cap = opts.product_atom_cap;

  const SolveSpace& space = oracle.space;
  EahResult eah = eah_solve([&oracle](const Vec& y) { return oracle(y); }, eopts);

  EquilibriumResult out;
  out.distribution.block_dims.resize(n);
  int joint_dim = 0;
  for (int i = 0; i < n; ++i) {
    out.distribution.block_dims[i] = game.bodies[i]->dim();
    joint_dim += game.bodies[i]->dim();
  }
  out.distribution.joint = SparseDistribution(joint_dim);
  for (std::size_t a = 0; a < eah.mu.size(); ++a) {
    Vec z = eah.mu.point_vec(a);
    Vec x;
    x.reserve(joint_dim);
    int at = 0;
    for (int i = 0; i < n; ++i) {
      const int zd = space.players[i].solver->dim();
      Vec zi(z.begin() + at, z.begin() + at + zd);
      Vec xi = space.players[i].lift(zi);
      x.insert(x.end(), xi.begin(), xi.end());
      at += zd;
    }
    out.distribution.joint.push_back(x, eah.mu.weight(a));
  }
  // Atoms must pass the original membership oracles.
  for (int i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < out.distribution.joint.size(); ++a) {
      if (!game.bodies[i]->member(out.distribution.player_block(i, a), 1e-6))
        throw VerificationFailed("equilibrium: atom outside player body");
    }
  }

  EquilibriumReport& rep = out.report;
  rep.cuts = static_cast<int>(eah.log.cuts.size());
  rep.ger_count = eah.log.ger_count();
  rep.sep_count = eah.log.sep_count();
  rep.certificate = eah.certificate;
  rep.pruning_error = eah.pruned_mass * 2.0 * oracle.space.g_bound * oracle.space.r_y;

  if (opts.verify) {
    // Re-evaluate the aggregate certificate from the final atoms on sampled
    // dual vectors inside the outer ball that satisfy the recorded SEP cuts.
    Vec gbar_mu(space.total_dim(), 0.0);
    for (std::size_t a = 0; a < eah.mu.size(); ++a) {
      Vec z = eah.mu.point_vec(a);
      std::vector<Vec> zs(n);
      int at = 0;
      for (int i = 0; i < n; ++i) {
        const int zd = space.players[i].solver->dim();
        zs[i].assign(z.begin() + at, z.begin() + at + zd);
        at += zd;
      }
      const double w = eah.mu.weight(a);
      int pos = 0;
      for (int i = 0; i < n; ++i) {
        Vec g = solver_gradient(game, space, i, zs);
        Vec m = space.fms[i].eval(zs[i]);
        for (double gr : g) {
          for (double mc : m) gbar_mu[pos++] += w * gr * mc;
        }
        for (double gr : g) gbar_mu[pos++] += w * gr;
      }
    }
    Rng rng(opts.seed ^ 0xabcdef1234567890ULL);
    int kept = 0;
    double violation = 0.0;
    const auto& cuts = eah.log.cuts;
    for (int s = 0; s < opts.verification_samples; ++s) {
      Vec y = rng.in_ball(space.total_dim(), space.r_y);
      bool ok = true;
      for (const auto& c : cuts) {
        if (c.type == CutType::Sep && dot(c.vector, y) > c.offset + 1e-12) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      ++kept;
      const double value = dot(y, gbar_mu);
      violation = std::max(violation, -(value) - epsilon);
    }
    rep.cert_recheck_samples = kept;
    rep.cert_recheck_violation = std::max(0.0, violation);

    bool all_simplex_linear = true;
    for (int i = 0; i < n; ++i) {
      all_simplex_linear = all_simplex_linear && game.bodies[i]->kind() == "simplex" &&
                           space.fms[i].kind() == FeatureKind::Linear;
    }
    if (all_simplex_linear) {
      rep.mode = GapMode::ExactLP;
      rep.gaps = equilibrium_gap_exact_lp(game, out.distribution);
    } else {
      bool polyhedral = true;
      for (int i = 0; i < n; ++i) {
        const std::string& kind = space.players[i].solver->kind();
        polyhedral = polyhedral && (kind == "box" || kind == "hpolytope");
      }
      if (polyhedral) {
        rep.mode = GapMode::SampledLP;
        rep.gaps = equilibrium_gap_sampled_lp(game, out.distribution, feature_specs, opts,
                                              oracle.witnesses.get());
      } else {
        rep.mode = GapMode::None;
      }
    }
    for (double gap : rep.gaps) {
      if (gap > 2.0 * epsilon + rep.pruning_error) {
        throw VerificationFailed("equilibrium: post-hoc gap " + std::to_string(gap) +
                                 " exceeds 2*epsilon");
      }
    }
  }

  if (out.distribution.joint.size() <= 100000) {
    rep.player_values = equilibrium_values(game, out.distribution);
  }
  rep.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

Vec JointDistribution::player_block(int player, std::size_t atom) const {
  int at = 0;
  for (int i = 0; i < player; ++i) at += block_dims[i];
  const double* p = joint.point(atom);
  return Vec(p + at, p + at + block_dims[player]);
}

Vec equilibrium_values(const MultilinearGame& game, const JointDistribution& dist) {
  const int n = game.players();
  Vec values(n, 0.0);
  for (std::size_t a = 0; a < dist.joint.size(); ++a) {
    std::vector<Vec> profile(n);
    for (int i = 0; i < n; ++i) profile[i] = dist.player_block(i, a);
    for (int i = 0; i < n; ++i) {
      values[i] += dist.joint.weight(a) * dot(game.checked_gradient(i, profile), profile[i]);
    }
  }
  return values;
}

Vec equilibrium_gap_exact_lp(const MultilinearGame& game, const JointDistribution& dist) {
  const int n = game.players();
  Vec gaps(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (game.bodies[i]->kind() != "simplex")
      throw ModeUnavailable("exact LP gap: player " + std::to_string(i) + " is not a simplex");
    const int d = game.bodies[i]->dim();
    // W = E_mu[g_i x_i^T]; the best column-stochastic deviation decomposes
    // column-wise into simplex LPs.
    Mat w(d, d);
    for (std::size_t a = 0; a < dist.joint.size(); ++a) {
      std::vector<Vec> profile(n);
      for (int j = 0; j < n; ++j) profile[j] = dist.player_block(j, a);
      Vec g = game.checked_gradient(i, profile);
      const double wt = dist.joint.weight(a);
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) w(r, c) += wt * g[r] * profile[i][c];
      }
    }
    double best = 0.0;
    double trace = 0.0;
    for (int c = 0; c < d; ++c) {
      LpProblem lp;
      lp.sense = Sense::Max;
      lp.objective.resize(d);
      for (int r = 0; r < d; ++r) lp.objective[r] = w(r, c);
      LpRow row;
      row.coeffs.assign(d, 1.0);
      row.rel = Rel::Eq;
      row.rhs = 1.0;
      lp.rows.push_back(std::move(row));
      LpResult res = lp_solve(lp);
      if (res.status != LpStatus::Optimal)
        throw NumericalBreakdown("exact LP gap: column LP failed");
      best += res.value;
      trace += w(c, c);
    }
    gaps[i] = best - trace;
  }
  return gaps;
}

Vec equilibrium_gap_sampled_lp(const MultilinearGame& game, const JointDistribution& dist,
                               const std::vector<json>& feature_specs,
                               const EquilibriumOptions& opts,
                               const std::vector<std::vector<Vec>>* extra_points) {
  SolveSpace space = build_solve_space(game, feature_specs);
  const int n = game.players();
  Vec gaps(n, 0.0);

  // Solver-coordinate atoms and their gradients, shared across players.
  std::vector<std::vector<Vec>> z_atoms(dist.joint.size());
  for (std::size_t a = 0; a < dist.joint.size(); ++a) {
    z_atoms[a].resize(n);
    for (int i = 0; i < n; ++i) {
      z_atoms[a][i] = space.players[i].unlift(dist.player_block(i, a));
    }
  }

  for (int i = 0; i < n; ++i) {
    const FeatureMap& fm = space.fms[i];
    const ConvexBody& body = *space.players[i].solver;
    const int d = body.dim();
    const int kp = fm.output_dim();
    const int kdim = fm.param_dim();

    // Objective: E_mu[<g'_i, K m(z_i) + c>]; the -<g'_i, z_i> part is constant.
    Vec obj(kdim, 0.0);
    double constant = 0.0;
    for (std::size_t a = 0; a < dist.joint.size(); ++a) {
      const double wt = dist.joint.weight(a);
      Vec g = solver_gradient(game, space, i, z_atoms[a]);
      Vec m = fm.eval(z_atoms[a][i]);
      int at = 0;
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < kp; ++c) obj[at++] += wt * g[r] * m[c];
      }
      for (int r = 0; r < d; ++r) obj[at++] += wt * g[r];
      constant -= wt * dot(g, z_atoms[a][i]);
    }

    // Endomorphism constraint points: heaviest support atoms, seeded samples,
    // and any recorded witness points.
    std::vector<Vec> points;
    {
      std::vector<std::size_t> order(dist.joint.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return dist.joint.weight(x) > dist.joint.weight(y);
      });
      const std::size_t cap = std::min<std::size_t>(order.size(), opts.gap_constraint_atoms);
      for (std::size_t s = 0; s < cap; ++s) points.push_back(z_atoms[order[s]][i]);
    }
    Rng rng(opts.seed ^ (0x51eb851eb851eb85ULL + static_cast<std::uint64_t>(i)));
    for (int s = 0; s < opts.verification_samples; ++s) points.push_back(space.players[i].sampler(rng));
    if (extra_points != nullptr && i < static_cast<int>(extra_points->size())) {
      for (const auto& p : (*extra_points)[i]) points.push_back(p);
    }

    // Facet rows of the solver body.
    std::vector<std::pair<Vec, double>> facets;
    const json desc = body.to_json();
    if (body.kind() == "box") {
      Vec lo = desc.at("lo").get<Vec>();
      Vec hi = desc.at("hi").get<Vec>();
      for (int j = 0; j < d; ++j) {
        Vec e(d, 0.0);
        e[j] = 1.0;
        facets.push_back({e, hi[j]});
        e[j] = -1.0;
        facets.push_back({e, -lo[j]});
      }
    } else if (body.kind() == "hpolytope") {
      const auto& ja = desc.at("A");
      Vec jb = desc.at("b").get<Vec>();
      for (std::size_t r = 0; r < jb.size(); ++r) {
        Vec row(d);
        for (int j = 0; j < d; ++j) row[j] = ja.at(r).at(j).get<double>();
        facets.push_back({row, jb[r]});
      }
    } else {
      throw ModeUnavailable("sampled LP gap: player body is not polyhedral");
    }

    LpProblem lp;
    lp.sense = Sense::Max;
    lp.objective = obj;
    lp.lower.resize(kdim);
    lp.upper.resize(kdim);
    for (int j = 0; j < kdim; ++j) {
      lp.lower[j] = space.id_flat[i][j] - space.r_y;
      lp.upper[j] = space.id_flat[i][j] + space.r_y;
    }
    for (const auto& point : points) {
      Vec m = fm.eval(point);
      for (const auto& [normal, offset] : facets) {
        LpRow row;
        row.coeffs.assign(kdim, 0.0);
        int at = 0;
        for (int r = 0; r < d; ++r) {
          for (int c = 0; c < kp; ++c) row.coeffs[at++] = normal[r] * m[c];
        }
        for (int r = 0; r < d; ++r) row.coeffs[at++] = normal[r];
        row.rel = Rel::Le;
        row.rhs = offset;
        lp.rows.push_back(std::move(row));
      }
    }
    LpResult res = lp_solve(lp);
    if (res.status != LpStatus::Optimal)
      throw NumericalBreakdown("sampled LP gap: LP failed for player " + std::to_string(i));
    gaps[i] = res.value + constant;
  }
  return gaps;
}

json EquilibriumReport::to_json() const {
  const char* mode_tag = mode == GapMode::ExactLP ? "exact_lp"
                         : mode == GapMode::SampledLP ? "sampled_lp"
                                                      : "none";
  return json{{"gaps", json(gaps)},
              {"mode", mode_tag},
              {"player_values", json(player_values)},
              {"cuts", cuts},
              {"ger", ger_count},
              {"sep", sep_count},
              {"runtime_ms", runtime_ms},
              {"certificate", certificate},
              {"pruning_error", pruning_error},
              {"cert_recheck_violation", cert_recheck_violation},
              {"cert_recheck_samples", cert_recheck_samples}};
}

}  // namespace phieq
