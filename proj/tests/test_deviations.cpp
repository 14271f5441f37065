#include <doctest.h>

#include "test_util.hpp"

using namespace phieq;

TEST_CASE("legendre recurrence") {
  Rng rng(3);
  for (int s = 0; s < 20; ++s) {
    const double x = rng.uniform(-1.5, 1.5);
    CHECK(legendre_eval(0, x) == 1.0);
  }
  CHECK(legendre_eval(1, 0.3) == doctest::Approx(0.3));
  CHECK(legendre_eval(2, 0.5) == doctest::Approx(-0.125));  // (3 x^2 - 1)/2
  CHECK(legendre_eval(3, 0.5) == doctest::Approx((5.0 * 0.125 - 3.0 * 0.5) / 2.0));
  CHECK(legendre_rescaled(1, 0.5) == doctest::Approx(std::sqrt(3.0) * 0.5));
}

TEST_CASE("legendre orthonormality under 64-node quadrature") {
  // Orthonormal under the uniform probability measure on [-1, 1] (density
  // 1/2): E[Pbar_a Pbar_b] = delta_ab, which is what makes E[m m^T] the
  // identity for the product feature basis.
  auto quad = testutil::gauss_legendre(64);
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      double integral = 0.0;
      for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
        integral += 0.5 * quad.weights[i] * legendre_rescaled(a, quad.nodes[i]) *
                    legendre_rescaled(b, quad.nodes[i]);
      }
      CHECK(std::fabs(integral - (a == b ? 1.0 : 0.0)) <= 1e-8);
    }
  }
}

TEST_CASE("feature maps: dimensions and evaluation") {
  auto linear = FeatureMap::linear(2, 2.0);
  CHECK(linear.output_dim() == 2);
  CHECK(linear.eval(Vec{0.2, -0.4}) == Vec{0.2, -0.4});

  auto leg1 = FeatureMap::legendre(1, 1, 1.0);
  CHECK(leg1.output_dim() == 1);
  const double t = 0.37;
  CHECK(leg1.eval(Vec{t})[0] == doctest::Approx(std::sqrt(3.0) * t));

  auto leg2 = FeatureMap::legendre(2, 2, std::sqrt(2.0));
  CHECK(leg2.output_dim() == 5);  // C(4,2) - 1
  CHECK(leg2.param_dim() == 12);

  // Frozen multi-index order: (1,0) (0,1) (2,0) (1,1) (0,2).
  const auto& idx = leg2.multi_indices();
  REQUIRE(idx.size() == 5);
  CHECK(idx[0] == std::vector<int>{1, 0});
  CHECK(idx[1] == std::vector<int>{0, 1});
  CHECK(idx[2] == std::vector<int>{2, 0});
  CHECK(idx[3] == std::vector<int>{1, 1});
  CHECK(idx[4] == std::vector<int>{0, 2});

  // Products of rescaled univariate values at sqrt(d) * x.
  Vec x{0.3, -0.2};
  Vec m = leg2.eval(x);
  const double s = std::sqrt(2.0);
  CHECK(m[0] == doctest::Approx(legendre_rescaled(1, s * 0.3)));
  CHECK(m[1] == doctest::Approx(legendre_rescaled(1, -s * 0.2)));
  CHECK(m[3] == doctest::Approx(legendre_rescaled(1, s * 0.3) * legendre_rescaled(1, -s * 0.2)));

  CHECK_THROWS_AS(FeatureMap::legendre(2, 0, 1.0), BadBounds);
  CHECK_THROWS_AS(leg2.eval(Vec{1.0}), DimensionMismatch);
}

TEST_CASE("linear features vanish at zero; legendre value at zero is recorded") {
  auto linear = FeatureMap::linear(3, 1.0);
  CHECK(norm2(linear.eval(Vec{0.0, 0.0, 0.0})) == 0.0);
  CHECK(linear.measured_norm_at_zero() == 0.0);

  // Even-order factors survive at zero (P2_bar(0) = -sqrt(5)/2), so the
  // degree-2 map does not vanish there; the measured value is recorded
  // rather than patched. See the README notes.
  auto leg = FeatureMap::legendre(2, 2, 1.0);
  Vec at_zero = leg.eval(Vec{0.0, 0.0});
  const double expected_component = -std::sqrt(5.0) / 2.0;
  CHECK(at_zero[2] == doctest::Approx(expected_component));
  CHECK(at_zero[4] == doctest::Approx(expected_component));
  CHECK(at_zero[0] == 0.0);
  CHECK(leg.measured_norm_at_zero() ==
        doctest::Approx(std::sqrt(2.0 * expected_component * expected_component)));
}

TEST_CASE("apply_deviation and identity params") {
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  Rng rng(5);

  // Constant map: K = 0.
  auto linear = FeatureMap::linear(2, box->bounds().outer_radius);
  DeviationParams constant{Mat(2, 2), Vec{0.3, -0.7}};
  for (int s = 0; s < 10; ++s) {
    Vec x = testutil::sample_body(*box, rng);
    CHECK(apply_deviation(constant, linear, x) == Vec{0.3, -0.7});
  }

  // Identity for linear features is (I, 0).
  DeviationParams lin_id = identity_params(linear);
  CHECK(lin_id.k.a == Mat::identity(2).a);
  for (int s = 0; s < 100; ++s) {
    Vec x = testutil::sample_body(*box, rng);
    Vec y = apply_deviation(lin_id, linear, x);
    CHECK(norm2(sub(y, x)) <= 1e-12);
  }

  // Legendre d=1, l=1: K = 1/sqrt(3).
  auto leg1 = FeatureMap::legendre(1, 1, 1.0);
  DeviationParams leg_id = identity_params(leg1);
  CHECK(leg_id.k(0, 0) == doctest::Approx(1.0 / std::sqrt(3.0)));

  // Legendre d=2 with the sqrt(d) rescale: K[j, idx(e_j)] = 1/(sqrt(3) sqrt(2)).
  auto leg2 = FeatureMap::legendre(2, 2, std::sqrt(2.0));
  DeviationParams leg2_id = identity_params(leg2);
  CHECK(leg2_id.k(0, 0) == doctest::Approx(1.0 / (std::sqrt(3.0) * std::sqrt(2.0))));
  CHECK(leg2_id.k(1, 1) == doctest::Approx(1.0 / (std::sqrt(3.0) * std::sqrt(2.0))));
  for (int s = 0; s < 1000; ++s) {
    Vec x = testutil::sample_body(*box, rng);
    Vec y = apply_deviation(leg2_id, leg2, x);
    CHECK(norm2(sub(y, x)) <= 1e-10);
  }
}

TEST_CASE("flatten and unflatten round trip") {
  auto fm = FeatureMap::legendre(2, 2, 1.0);
  Rng rng(9);
  DeviationParams p;
  p.k = Mat(2, fm.output_dim());
  for (auto& v : p.k.a) v = rng.normal();
  p.c = {rng.normal(), rng.normal()};
  Vec flat = flatten(p);
  CHECK(static_cast<int>(flat.size()) == fm.param_dim());
  DeviationParams back = unflatten(fm, flat);
  CHECK(back.k.a == p.k.a);
  CHECK(back.c == p.c);
  CHECK(params_norm(p) == doctest::Approx(norm2(flat)));
}

TEST_CASE("phi radii formulas") {
  // Linear, r=1, R=2, d=2: r' = 1/(2*2), R' = 2 (2 sqrt(2)/1 + 1).
  auto fm = FeatureMap::linear(2, 2.0);
  BallBounds bounds{1.0, Vec{0.0, 0.0}, 2.0};
  PhiRadii radii = phi_radii(fm, bounds, 2);
  CHECK(radii.inner == doctest::Approx(0.25));
  CHECK(radii.outer == doctest::Approx(2.0 * (2.0 * std::sqrt(2.0) + 1.0)));

  // M = 1 floor case: r' = r/2.
  auto unit = FeatureMap::linear(2, 1.0);
  BallBounds tight{1.0, Vec{0.0, 0.0}, 1.0 + 1e-9};
  CHECK(phi_radii(unit, tight, 2).inner == doctest::Approx(0.5));

  BallBounds bad{2.0, Vec{0.0, 0.0}, 1.0};
  CHECK_THROWS_AS(phi_radii(fm, bad, 2), BadBounds);
}

TEST_CASE("inner-ball parameters are endomorphisms") {
  // Lemma-style check: params sampled in the inner ball keep images inside.
  Rng rng(13);
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto fm = FeatureMap::legendre(2, 2, box->bounds().outer_radius);
  const PhiRadii radii = phi_radii(fm, box->bounds(), 2);
  for (int trial = 0; trial < 200; ++trial) {
    Vec p = rng.in_ball(fm.param_dim(), radii.inner);
    DeviationParams params = unflatten(fm, p);
    for (int s = 0; s < 100; ++s) {
      Vec x = testutil::sample_body(*box, rng);
      CHECK(box->member(apply_deviation(params, fm, x), 1e-9));
    }
  }
}

TEST_CASE("constructed endomorphisms satisfy the outer norm bound") {
  // Convex combinations of identity, the zero map, inner-ball samples and
  // constant maps are all genuine endomorphisms; their norms stay below R'.
  Rng rng(19);
  auto box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto fm = FeatureMap::legendre(2, 2, box->bounds().outer_radius);
  const PhiRadii radii = phi_radii(fm, box->bounds(), 2);
  Vec id_flat = flatten(identity_params(fm));
  const int k = fm.param_dim();
  for (int trial = 0; trial < 200; ++trial) {
    Vec p(k, 0.0);
    const double a = rng.uniform01();
    const double b = rng.uniform01() * (1.0 - a);
    const double c = 1.0 - a - b;
    axpy(a, id_flat, p);
    Vec inner = rng.in_ball(k, radii.inner);
    axpy(b, inner, p);
    Vec constant(k, 0.0);
    Vec point = testutil::sample_body(*box, rng);
    std::copy(point.begin(), point.end(), constant.end() - 2);
    axpy(c, constant, p);
    CHECK(norm2(p) <= radii.outer + 1e-9);
  }
}

TEST_CASE("monotonicity: enlarging the target keeps endomorphism params valid") {
  Rng rng(43);
  auto small_box = make_box(Vec{-1.0, -1.0}, Vec{1.0, 1.0});
  auto big_box = make_box(Vec{-1.5, -1.5}, Vec{1.5, 1.5});
  auto fm = FeatureMap::legendre(2, 2, small_box->bounds().outer_radius);
  const PhiRadii radii = phi_radii(fm, small_box->bounds(), 2);
  for (int trial = 0; trial < 50; ++trial) {
    DeviationParams params = unflatten(fm, rng.in_ball(fm.param_dim(), radii.inner));
    for (int s = 0; s < 50; ++s) {
      Vec x = testutil::sample_body(*small_box, rng);
      Vec y = apply_deviation(params, fm, x);
      CHECK(small_box->member(y, 1e-9));
      CHECK(big_box->member(y, 1e-9));  // larger target can only keep them
    }
  }
}

TEST_CASE("feature map json") {
  auto fm = FeatureMap::from_json(nlohmann::json{{"features", "legendre"}, {"degree", 2}}, 2, 1.0);
  CHECK(fm.kind() == FeatureKind::Legendre);
  CHECK(fm.to_json().at("degree") == 2);
  auto lin = FeatureMap::from_json(nlohmann::json{{"features", "linear"}}, 3, 1.0);
  CHECK(lin.kind() == FeatureKind::Linear);
  CHECK_THROWS_AS(
      FeatureMap::from_json(nlohmann::json{{"features", "linear"}, {"junk", 1}}, 2, 1.0),
      ConfigInvalid);
  CHECK_THROWS_AS(FeatureMap::from_json(nlohmann::json{{"features", "fourier"}}, 2, 1.0),
                  ConfigInvalid);
}
