#include <doctest.h>

#include "phieq/efp.hpp"
#include "test_util.hpp"

using namespace phieq;

namespace {

double recompute_l1(const SparseDistribution& mu, const MapFn& phi) {
  Vec drift = mu.expect([&](const Vec& x) { return sub(phi(x), x); });
  return norm1(drift);
}

}  // namespace

TEST_CASE("efp_iterative: identity, reflection, constant") {
  auto seg = make_box(Vec{-1.0}, Vec{1.0});

  MapFn id = [](const Vec& x) { return x; };
  auto res_id = efp_iterative(*seg, id, 0.5, Vec{0.3});
  CHECK(res_id.l1_error == 0.0);
  CHECK(recompute_l1(res_id.mu, id) == 0.0);

  // phi(x) = -x from x0 = 1 with eps = 1: T = 2, uniform on {1, -1}, error 0.
  MapFn reflect = [](const Vec& x) { return Vec{-x[0]}; };
  auto res_reflect = efp_iterative(*seg, reflect, 1.0, Vec{1.0});
  CHECK(res_reflect.steps == 2);
  CHECK(res_reflect.l1_error == 0.0);
  REQUIRE(res_reflect.mu.size() == 2);
  CHECK(recompute_l1(res_reflect.mu, reflect) == 0.0);

  // Constant map: telescoped error is ||c - x0||_1 / T exactly.
  const Vec c{0.25};
  MapFn constant = [c](const Vec&) { return c; };
  auto res_const = efp_iterative(*seg, constant, 0.125, Vec{-1.0});
  const double expected = std::fabs(c[0] - (-1.0)) / static_cast<double>(res_const.steps);
  CHECK(res_const.l1_error == doctest::Approx(expected).epsilon(1e-15));
  CHECK(res_const.l1_error <= 0.125);
}

TEST_CASE("efp_iterative: T follows the 2 R d / eps schedule and errors propagate") {
  auto box = make_box(Vec{-1.0, -1.0, -1.0}, Vec{1.0, 1.0, 1.0});
  MapFn damp = [](const Vec& x) { return scale(x, 0.5); };
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    auto res = efp_iterative(*box, damp, eps, Vec{1.0, 1.0, 1.0});
    CHECK(res.steps == static_cast<long long>(std::ceil(2.0 * 1.0 * 3 / eps)));
    CHECK(res.l1_error <= eps);
  }

  MapFn escape = [](const Vec& x) { return add(x, Vec{3.0, 0.0, 0.0}); };
  CHECK_THROWS_AS(efp_iterative(*box, escape, 0.1, Vec{0.0, 0.0, 0.0}), NotEndomorphism);
}

TEST_CASE("efp_eah: identity resolves on the first response") {
  for (const BodyPtr& body :
       {make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0}), make_ball(Vec{0.0, 0.0, 0.0}, 1.0),
        BodyPtr(make_simplex(3))}) {
    MapFn id = [](const Vec& x) { return x; };
    auto res = efp_eah(*body, id, 1e-8);
    CHECK(res.mu.size() == 1);
    CHECK(res.l1_error == 0.0);
  }
}

TEST_CASE("efp_eah: constant map pins the mean") {
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  const Vec c{0.3, -0.4};
  MapFn constant = [c](const Vec&) { return c; };
  const double eps = 1e-7;
  auto res = efp_eah(*box, constant, eps);
  CHECK(res.l1_error <= eps);
  CHECK(norm1(sub(c, res.mu.mean())) <= eps);  // E[phi - x] = c - mean
  CHECK(recompute_l1(res.mu, constant) <= eps);
}

TEST_CASE("efp_eah: one-dimensional reflection") {
  auto seg = make_box(Vec{-1.0}, Vec{1.0});
  MapFn reflect = [](const Vec& x) { return Vec{-x[0]}; };
  const double eps = 1e-6;
  auto res = efp_eah(*seg, reflect, eps);
  CHECK(res.l1_error <= eps);
  // |E[2x]| <= eps means the mean is within eps/2 of zero.
  CHECK(std::fabs(res.mu.mean()[0]) <= eps / 2.0);
}

TEST_CASE("efp_eah: rotation on the unit disk concentrates near the center") {
  auto disk = make_ball(Vec{0.0, 0.0}, 1.0);
  MapFn rotate = [](const Vec& x) { return Vec{-x[1], x[0]}; };
  const double eps = 1e-6;
  auto res = efp_eah(*disk, rotate, eps);
  CHECK(res.l1_error <= eps);
  // E[phi - x] = (R - I) mean and sigma_min(R - I) = sqrt(2).
  CHECK(norm2(res.mu.mean()) <= eps / std::sqrt(2.0) + 1e-12);
}

TEST_CASE("efp_eah: shrunk legendre endomorphisms on varied bodies") {
  Rng rng(101);
  std::vector<BodyPtr> bodies = {
      make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0}),
      make_ball(Vec{0.0, 0.0, 0.0}, 1.0),
      testutil::random_hpolytope(2, 3, rng),
  };
  for (const auto& body : bodies) {
    auto fm = FeatureMap::legendre(body->dim(), 2, body->bounds().outer_radius);
    for (int trial = 0; trial < 3; ++trial) {
      DeviationParams params = testutil::shrunk_random_endo(*body, fm, rng);
      MapFn phi = [&](const Vec& x) { return apply_deviation(params, fm, x); };
      auto res = efp_eah(*body, phi, 1e-6);
      CHECK(recompute_l1(res.mu, phi) <= 1e-6);
      CHECK(res.mu.size() <= static_cast<std::size_t>(res.log.ger_count()));
      res.mu.validate(*body, 1e-6);
    }
  }
}

TEST_CASE("efp_eah: discontinuous endomorphisms still admit EFPs") {
  // Piecewise-constant maps; Brouwer does not apply but expected fixed
  // points exist and the solver finds them.
  Rng rng(363);
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto simplex = make_simplex(3);
  int solved = 0;
  for (int trial = 0; trial < 25; ++trial) {
    for (const BodyPtr& body : {box, BodyPtr(simplex)}) {
      std::vector<Vec> targets;
      for (int i = 0; i < 4; ++i) targets.push_back(testutil::sample_body(*body, rng));
      const Vec pivot = rng.unit_vector(body->dim());
      MapFn phi = [targets, pivot](const Vec& x) {
        const double s = dot(pivot, x);
        const int cell = (s > 0.4) ? 0 : (s > 0.0 ? 1 : (s > -0.4 ? 2 : 3));
        return targets[cell];
      };
      auto res = efp_eah(*body, phi, 1e-6);
      CHECK(recompute_l1(res.mu, phi) <= 1e-6);
      ++solved;
    }
  }
  CHECK(solved == 50);
}

TEST_CASE("efp_eah cut counts scale with log(1/eps)") {
  Rng rng(77);
  auto box = make_box(Vec{-1.0, -1.0, -1.0}, Vec{1.0, 1.0, 1.0});
  auto fm = FeatureMap::legendre(3, 2, box->bounds().outer_radius);
  DeviationParams params = testutil::shrunk_random_endo(*box, fm, rng, 0.9, 0.3);
  MapFn phi = [&](const Vec& x) { return apply_deviation(params, fm, x); };
  std::vector<int> cuts;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    auto res = efp_eah(*box, phi, eps);
    cuts.push_back(static_cast<int>(res.log.cuts.size()));
    CHECK(recompute_l1(res.mu, phi) <= eps);
  }
  CHECK(cuts[0] <= cuts[1]);
  CHECK(cuts[1] <= cuts[2]);
  // Increments per two decades of precision stay comparable (affine growth).
  const double inc1 = cuts[1] - cuts[0];
  const double inc2 = cuts[2] - cuts[1];
  CHECK(inc2 <= 2.5 * inc1 + 16);
}

TEST_CASE("efp_eah is deterministic") {
  Rng rng(55);
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto fm = FeatureMap::legendre(2, 2, box->bounds().outer_radius);
  DeviationParams params = testutil::shrunk_random_endo(*box, fm, rng);
  MapFn phi = [&](const Vec& x) { return apply_deviation(params, fm, x); };
  auto a = efp_eah(*box, phi, 1e-6);
  auto b = efp_eah(*box, phi, 1e-6);
  REQUIRE(a.log.cuts.size() == b.log.cuts.size());
  for (std::size_t i = 0; i < a.log.cuts.size(); ++i) {
    CHECK(a.log.cuts[i].type == b.log.cuts[i].type);
    CHECK(std::memcmp(a.log.cuts[i].vector.data(), b.log.cuts[i].vector.data(),
                      a.log.cuts[i].vector.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("efp_eah raises NotEndomorphism with the witness attached") {
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  MapFn escape = [](const Vec& x) { return add(x, Vec{5.0, 0.0}); };
  try {
    efp_eah(*box, escape, 1e-6);
    FAIL("expected NotEndomorphism");
  } catch (const NotEndomorphism& e) {
    CHECK(box->member(e.witness));
    CHECK_FALSE(box->member(e.witness_image));
  }
}

TEST_CASE("semi_separate: endomorphisms always land on the EFP branch") {
  Rng rng(2024);
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto fm = FeatureMap::legendre(2, 2, box->bounds().outer_radius);
  for (int trial = 0; trial < 20; ++trial) {
    DeviationParams params = testutil::shrunk_random_endo(*box, fm, rng);
    MapFn phi = [&](const Vec& x) { return apply_deviation(params, fm, x); };
    auto res = semi_separate(*box, phi, 1e-6);
    REQUIRE(res.is_efp());
    CHECK(recompute_l1(res.efp().mu, phi) <= 1e-6);
  }
}

TEST_CASE("semi_separate: guaranteed-outside maps witness on the first query") {
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  const double big = 3.0 * box->bounds().outer_radius;
  MapFn shift = [big](const Vec& x) { return add(x, Vec{big, 0.0}); };
  auto res = semi_separate(*box, shift, 1e-6);
  REQUIRE_FALSE(res.is_efp());
  CHECK(box->member(res.witness().point));
  CHECK_FALSE(box->member(res.witness().image));
}

TEST_CASE("semi_separate: doubling on the unit ball keeps the contract") {
  // phi(x) = 2x has an exact fixed point at the center, so either branch is
  // valid under the dichotomy; the first dual candidate is the origin and
  // linopt returns the center, which certifies an exact EFP immediately.
  auto ball = make_ball(Vec{0.0, 0.0}, 1.0);
  MapFn doubling = [](const Vec& x) { return scale(x, 2.0); };
  auto res = semi_separate(*ball, doubling, 1e-6);
  if (res.is_efp()) {
    CHECK(recompute_l1(res.efp().mu, doubling) <= 1e-6);
  } else {
    CHECK(ball->member(res.witness().point));
    CHECK_FALSE(ball->member(res.witness().image));
  }
}

TEST_CASE("eah_solve: zero G certifies immediately and caps fire on bad oracles") {
  EahOptions opts;
  opts.dim = 2;
  opts.radius = 1.0;
  opts.bound = 1.0;
  opts.epsilon = 1e-6;
  opts.box_halfwidth = 1.0;

  // G == 0: a single response is already a certificate.
  GerOrSepOracle zero = [](const Vec&) {
    return GoodEnough{SparseDistribution::point_mass(Vec{0.0, 0.0}), Vec{0.0, 0.0}, nullptr};
  };
  auto res = eah_solve(zero, opts);
  CHECK(res.mu.size() == 1);
  CHECK(res.log.ger_count() == 1);

  // An oracle that repeats one GER column violating its contract can never
  // produce a certificate; the cap must fire instead of spinning.
  GerOrSepOracle broken = [](const Vec&) {
    return GoodEnough{SparseDistribution::point_mass(Vec{0.0, 0.0}), Vec{1.0, 0.0}, nullptr};
  };
  opts.iteration_cap = 300;
  CHECK_THROWS_AS(eah_solve(broken, opts), IterationCapExceeded);
}

TEST_CASE("enumerate_product caps and renormalizes") {
  FactoredResponse fr;
  SparseDistribution a(1), b(1);
  for (int i = 0; i < 8; ++i) a.push_back(Vec{0.1 * i}, (i + 1.0) / 36.0);
  for (int i = 0; i < 8; ++i) b.push_back(Vec{0.2 * i}, (i + 1.0) / 36.0);
  fr.factors = {a, b};

  SparseDistribution full;
  double dropped = enumerate_product(fr, 1000, full);
  CHECK(dropped == 0.0);
  CHECK(full.size() == 64);
  CHECK(full.total_weight() == doctest::Approx(1.0));

  SparseDistribution capped;
  std::vector<SparseDistribution> pruned;
  dropped = enumerate_product(fr, 16, capped, &pruned);
  CHECK(dropped > 0.0);
  CHECK(capped.size() <= 16);
  CHECK(capped.total_weight() == doctest::Approx(1.0));
  REQUIRE(pruned.size() == 2);
  CHECK(pruned[0].total_weight() == doctest::Approx(1.0));
}

TEST_CASE("phi cache memoizes by exact bits") {
  int evals = 0;
  PhiCache cache([&evals](const Vec& x) {
    ++evals;
    return scale(x, 2.0);
  });
  Vec x{0.5, -0.25};
  cache(x);
  cache(x);
  cache(Vec{0.5, -0.25});
  CHECK(evals == 1);
  cache(Vec{0.5, -0.2500000001});
  CHECK(evals == 2);
}
