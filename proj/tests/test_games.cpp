#include <doctest.h>

#include "phieq/games.hpp"
#include "test_util.hpp"

using namespace phieq;
using nlohmann::json;

namespace {

// Matching pennies: matcher wins +1 on a match, the other player the
// opposite. Tensors are flat over profiles, player-0-major.
json matching_pennies_json() {
  return json{{"type", "normal_form"},
              {"actions", {2, 2}},
              {"payoffs", {{1.0, -1.0, -1.0, 1.0}, {-1.0, 1.0, 1.0, -1.0}}}};
}

json rock_paper_scissors_json() {
  // 0 = rock, 1 = paper, 2 = scissors; +1 win, -1 loss.
  return json{
      {"type", "normal_form"},
      {"actions", {3, 3}},
      {"payoffs",
       {{0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0},
        {0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0}}}};
}

Mat payoff_matrix_player0(const NormalFormGame& g) {
  Mat a(g.action_counts()[0], g.action_counts()[1]);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) a(i, j) = g.payoff(0, {i, j});
  return a;
}

}  // namespace

TEST_CASE("normal-form gradients by tensor contraction") {
  auto game = NormalFormGame::from_json(matching_pennies_json());

  // Opponent uniform: the matcher is indifferent.
  std::vector<Vec> profile = {Vec{0.0, 0.0}, Vec{0.5, 0.5}};
  Vec g = game.gradient(0, profile);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(0.0));

  // Opponent pure Heads: matching pays +1, mismatching -1.
  profile[1] = Vec{1.0, 0.0};
  g = game.gradient(0, profile);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(-1.0));

  // Bilinear consistency: <g_i, x_i> equals the tensor payoff.
  Rng rng(5);
  for (int s = 0; s < 50; ++s) {
    std::vector<Vec> mixed = {testutil::sample_simplex(rng, 2), testutil::sample_simplex(rng, 2)};
    double direct = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) direct += mixed[0][a] * mixed[1][b] * game.payoff(0, {a, b});
    CHECK(dot(game.gradient(0, mixed), mixed[0]) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("single-player gradients ignore the empty opponent product") {
  json spec{{"type", "normal_form"}, {"actions", {3}}, {"payoffs", {{0.5, -0.25, 1.0}}}};
  auto game = NormalFormGame::from_json(spec);
  std::vector<Vec> profile = {Vec{0.0, 0.0, 0.0}};
  CHECK(game.gradient(0, profile) == Vec{0.5, -0.25, 1.0});
}

TEST_CASE("payoffs are rescaled into [-1, 1]") {
  json spec{{"type", "normal_form"}, {"actions", {2}}, {"payoffs", {{4.0, -2.0}}}};
  auto game = NormalFormGame::from_json(spec);
  CHECK(game.payoff(0, {0}) == doctest::Approx(1.0));
  CHECK(game.payoff(0, {1}) == doctest::Approx(-0.5));
}

TEST_CASE("bilinear game adapter") {
  Mat a(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -0.5;
  Mat b(2, 2);
  b(0, 1) = 0.25;
  auto game = bilinear_game(a, b, make_box(Vec{0.0, 0.0}, Vec{1.0, 1.0}),
                            make_box(Vec{0.0, 0.0}, Vec{1.0, 1.0}));
  std::vector<Vec> profile = {Vec{0.5, 0.5}, Vec{1.0, 0.25}};
  CHECK(game.gradient(0, profile) == Vec{1.0, -0.125});  // A x2
  CHECK(game.gradient(1, profile) == Vec{0.0, 0.125});   // B^T x1
  CHECK(dot(game.checked_gradient(0, profile), profile[0]) ==
        doctest::Approx(1.0 * 0.5 * 1.0 - 0.5 * 0.5 * 0.25));
}

TEST_CASE("gerorsep oracle: identity candidate responds good-enough with value zero") {
  auto game = multilinear_from_normal_form(
      std::make_shared<const NormalFormGame>(NormalFormGame::from_json(matching_pennies_json())));
  auto handle = gerorsep_for_games(
      game, {json{{"features", "linear"}}, json{{"features", "linear"}}}, 1e-6);
  Vec y(handle.param_dim, 0.0);  // shifted origin = all-players identity
  auto ans = handle.oracle(y);
  REQUIRE(std::holds_alternative<GoodEnough>(ans));
  const auto& ge = std::get<GoodEnough>(ans);
  CHECK(dot(y, ge.gbar) == 0.0);
  REQUIRE(ge.factored != nullptr);
  // Identity deviations have exact fixed points: every factor is a point mass.
  for (const auto& factor : ge.factored->factors) CHECK(factor.size() == 1);
}

TEST_CASE("gerorsep oracle: outside-mapping candidate separates on the first query") {
  auto game = multilinear_from_normal_form(
      std::make_shared<const NormalFormGame>(NormalFormGame::from_json(matching_pennies_json())));
  auto handle = gerorsep_for_games(
      game, {json{{"features", "linear"}}, json{{"features", "linear"}}}, 1e-6);
  // Candidate decodes as p = id - y; choosing y = id gives p = 0 shifted by a
  // far constant block, a map sending everything outside the strategy set.
  Vec y(handle.param_dim, 0.0);
  const int k1 = static_cast<int>(handle.identity_flat[0].size());
  for (int j = 0; j < k1; ++j) y[j] = handle.identity_flat[0][j];
  y[k1 - 1] -= 50.0;  // p_1 = constant map to a point 50 units away
  auto ans = handle.oracle(y);
  REQUIRE(std::holds_alternative<SepAnswer>(ans));
  const auto& sep = std::get<SepAnswer>(ans);
  // Candidate violates the halfspace; the true identity profile satisfies it.
  CHECK(dot(sep.h.normal, y) > sep.h.offset - 1e-12);
  CHECK(dot(sep.h.normal, Vec(handle.param_dim, 0.0)) <= sep.h.offset + 1e-12);
  CHECK((*handle.witness_points)[0].size() == 1);
}

TEST_CASE("gerorsep oracle: product response factorizes the aggregate payoff") {
  // Two players on one-dimensional boxes; phi_1(x) = -x, phi_2 = id.
  Mat a(1, 1), b(1, 1);
  a(0, 0) = 0.8;
  b(0, 0) = -0.6;
  auto game = bilinear_game(a, b, make_box(Vec{-1.0}, Vec{1.0}), make_box(Vec{-1.0}, Vec{1.0}));
  const double eps_prime = 1e-7;
  auto handle = gerorsep_for_games(
      game, {json{{"features", "linear"}}, json{{"features", "linear"}}}, eps_prime);

  // Shifted candidate: p1 = -id, p2 = id.
  Vec y(handle.param_dim, 0.0);
  y[0] = handle.identity_flat[0][0] * 2.0;  // id - (-id) in the K block
  auto ans = handle.oracle(y);
  REQUIRE(std::holds_alternative<GoodEnough>(ans));
  const auto& ge = std::get<GoodEnough>(ans);
  // |E_nu <y, G>| <= n B eps'.
  CHECK(std::fabs(dot(y, ge.gbar)) <= 2.0 * game.gradient_bound * eps_prime + 1e-12);

  // Factorization identity: enumerating the product and pushing the
  // expectation through per-player blocks agree to 1e-9.
  REQUIRE(ge.factored != nullptr);
  SparseDistribution product;
  enumerate_product(*ge.factored, 1 << 20, product);
  Vec gbar_enum(handle.param_dim, 0.0);
  for (std::size_t at = 0; at < product.size(); ++at) {
    Vec z = product.point_vec(at);
    std::vector<Vec> profile = {Vec{z[0]}, Vec{z[1]}};
    const double w = product.weight(at);
    Vec g0 = game.gradient(0, profile);
    Vec g1 = game.gradient(1, profile);
    gbar_enum[0] += w * g0[0] * z[0];
    gbar_enum[1] += w * g0[0];
    gbar_enum[2] += w * g1[0] * z[1];
    gbar_enum[3] += w * g1[0];
  }
  for (int j = 0; j < handle.param_dim; ++j) {
    CHECK(gbar_enum[j] == doctest::Approx(ge.gbar[j]).epsilon(1e-9));
  }
}

TEST_CASE("identity deviations contribute exactly zero aggregate payoff") {
  auto game = multilinear_from_normal_form(std::make_shared<const NormalFormGame>(
      NormalFormGame::from_json(rock_paper_scissors_json())));
  Rng rng(71);
  for (int s = 0; s < 20; ++s) {
    std::vector<Vec> profile = {testutil::sample_simplex(rng, 3),
                                testutil::sample_simplex(rng, 3)};
    double total = 0.0;
    for (int i = 0; i < 2; ++i) {
      Vec g = game.checked_gradient(i, profile);
      total += dot(g, sub(profile[i], profile[i]));
    }
    CHECK(total == 0.0);
  }
}

TEST_CASE("matching pennies equilibrium with linear features") {
  auto game = multilinear_from_normal_form(
      std::make_shared<const NormalFormGame>(NormalFormGame::from_json(matching_pennies_json())));
  const double eps = 1e-4;
  EquilibriumOptions opts;
  opts.seed = 3;
  auto res = compute_phi_equilibrium(
      game, {json{{"features", "linear"}}, json{{"features", "linear"}}}, eps, opts);

  REQUIRE(res.report.mode == GapMode::ExactLP);
  REQUIRE(res.report.gaps.size() == 2);
  CHECK(res.report.gaps[0] <= eps);
  CHECK(res.report.gaps[1] <= eps);

  // Zero-sum sanity: player values within eps of the LP game value (0).
  auto nf = NormalFormGame::from_json(matching_pennies_json());
  const double value = testutil::zero_sum_value(payoff_matrix_player0(nf));
  CHECK(value == doctest::Approx(0.0).epsilon(1e-9));
  REQUIRE(res.report.player_values.size() == 2);
  CHECK(std::fabs(res.report.player_values[0] - value) <= eps);
  CHECK(std::fabs(res.report.player_values[1] + value) <= eps);

  CHECK(res.report.cert_recheck_violation == 0.0);
  res.distribution.joint.validate(*make_product({game.bodies[0], game.bodies[1]}), 1e-6);
}

TEST_CASE("single-player box game reaches the linopt optimum") {
  // One player, constant gradient; constant deviations pin the expected
  // utility to the best point of the box.
  MultilinearGame game;
  game.bodies = {make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0})};
  const Vec grad{0.6, -0.3};
  game.gradient = [grad](int, const std::vector<Vec>&) { return grad; };
  game.gradient_bound = norm2(grad) + 1e-12;
  const double eps = 1e-5;
  auto res = compute_phi_equilibrium(game, {json{{"features", "linear"}}}, eps);
  const double best = dot(game.bodies[0]->linopt(grad), grad);
  REQUIRE(res.report.player_values.size() == 1);
  CHECK(res.report.player_values[0] >= best - eps);
  CHECK(res.report.mode == GapMode::SampledLP);
  CHECK(res.report.gaps[0] <= eps);
}

TEST_CASE("equilibrium gap oracles") {
  auto game = multilinear_from_normal_form(
      std::make_shared<const NormalFormGame>(NormalFormGame::from_json(matching_pennies_json())));

  // Uniform x uniform play has exact swap gap zero by symmetry.
  JointDistribution uniform;
  uniform.block_dims = {2, 2};
  uniform.joint = SparseDistribution(4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      uniform.joint.push_back(Vec{a == 0 ? 1.0 : 0.0, a == 0 ? 0.0 : 1.0, b == 0 ? 1.0 : 0.0,
                                  b == 0 ? 0.0 : 1.0},
                              0.25);
  Vec gaps = equilibrium_gap_exact_lp(game, uniform);
  CHECK(gaps[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(gaps[1] == doctest::Approx(0.0).epsilon(1e-12));

  // Point mass on a strictly dominated profile: the gap equals the margin.
  json dominated{{"type", "normal_form"},
                 {"actions", {2, 2}},
                 {"payoffs",
                  {{1.0, 0.5, 0.25, -0.25},  // action 0 dominates action 1
                   {0.0, 0.0, 0.0, 0.0}}}};
  auto dom_game = multilinear_from_normal_form(
      std::make_shared<const NormalFormGame>(NormalFormGame::from_json(dominated)));
  JointDistribution pt;
  pt.block_dims = {2, 2};
  pt.joint = SparseDistribution(4);
  pt.joint.push_back(Vec{0.0, 1.0, 1.0, 0.0}, 1.0);  // profile (1, 0)
  Vec dom_gaps = equilibrium_gap_exact_lp(dom_game, pt);
  CHECK(dom_gaps[0] == doctest::Approx(1.0 - 0.25));
  CHECK(dom_gaps[1] == doctest::Approx(0.0));
}

TEST_CASE("legendre features on a bilinear box game") {
  Mat a(2, 2), b(2, 2);
  a(0, 0) = 0.5;
  a(0, 1) = -0.25;
  a(1, 0) = 0.125;
  a(1, 1) = 0.5;
  b(0, 0) = -0.5;
  b(1, 1) = 0.375;
  auto game = bilinear_game(a, b, make_box(Vec{0.0, 0.0}, Vec{1.0, 1.0}),
                            make_box(Vec{0.0, 0.0}, Vec{1.0, 1.0}));
  const double eps = 1e-2;  // the acceptance suite runs the tight version
  json spec{{"features", "legendre"}, {"degree", 2}};
  auto res = compute_phi_equilibrium(game, {spec, spec}, eps);
  REQUIRE(res.report.mode == GapMode::SampledLP);
  for (double gap : res.report.gaps) CHECK(gap <= eps);
  CHECK(res.report.cert_recheck_violation == 0.0);
  CHECK(res.report.cert_recheck_samples > 0);
  res.distribution.joint.validate(*make_product({game.bodies[0], game.bodies[1]}), 1e-6);
}

TEST_CASE("game json round trips") {
  auto game = game_from_json(matching_pennies_json());
  CHECK(game.players() == 2);
  CHECK(game.bodies[0]->kind() == "simplex");

  json bilinear{{"type", "multilinear"},
                {"gradient", "bilinear"},
                {"bodies",
                 {{{"type", "box"}, {"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}},
                  {{"type", "box"}, {"lo", {0.0, 0.0}}, {"hi", {1.0, 1.0}}}}},
                {"matrices", {{{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}}}}};
  auto bg = game_from_json(bilinear);
  CHECK(bg.players() == 2);
  CHECK(bg.bodies[0]->kind() == "box");
  CHECK_THROWS_AS(game_from_json(json{{"type", "extensive"}}), ConfigInvalid);
}
