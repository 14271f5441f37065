#include <doctest.h>

#include "phieq/ellipsoid.hpp"
#include "test_util.hpp"

using namespace phieq;

TEST_CASE("init_ball shapes and volumes") {
  auto e2 = init_ball(2, 1.0);
  CHECK(e2.center == Vec{0.0, 0.0});
  CHECK(e2.shape(0, 0) == 1.0);
  CHECK(e2.shape(1, 1) == 1.0);
  CHECK(e2.shape(0, 1) == 0.0);
  CHECK(log_volume(e2) == doctest::Approx(std::log(M_PI)).epsilon(1e-12));

  auto e3 = init_ball(3, 2.0);
  for (int i = 0; i < 3; ++i) CHECK(e3.shape(i, i) == 4.0);

  CHECK(log_volume(init_ball(2, 2.0)) == doctest::Approx(std::log(4.0 * M_PI)));
}

TEST_CASE("central cut closed form on the unit disk") {
  auto e = init_ball(2, 1.0);
  auto cut = central_cut(e, Vec{1.0, 0.0});
  CHECK(cut.center[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(cut.center[1] == doctest::Approx(0.0));
  CHECK(cut.shape(0, 0) == doctest::Approx(4.0 / 9.0).epsilon(1e-13));
  CHECK(cut.shape(1, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
  CHECK(cut.shape(0, 1) == doctest::Approx(0.0));

  // Containment of the kept half-disk, by sampling.
  Rng rng(7);
  Mat inv = invert(cut.shape);
  int violations = 0;
  for (int s = 0; s < 20000; ++s) {
    Vec x = rng.in_ball(2, 1.0);
    if (x[0] > 0) x[0] = -x[0];
    Vec diff = sub(x, cut.center);
    if (dot(diff, matvec(inv, diff)) > 1.0 + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("volume ratio is exact for k = 2..10") {
  for (int k = 2; k <= 10; ++k) {
    auto e = init_ball(k, 1.5);
    Vec w(k, 0.0);
    w[0] = 0.7;
    w[k - 1] = -0.3;
    auto cut = central_cut(e, w);
    const double measured = std::exp(log_volume(cut) - log_volume(e));
    CHECK(measured == doctest::Approx(cut_volume_ratio(k)).epsilon(1e-12));
  }
  CHECK(cut_volume_ratio(2) == doctest::Approx((2.0 / 3.0) * std::sqrt(4.0 / 3.0)));
}

TEST_CASE("successive opposite cuts keep the slab") {
  auto e = init_ball(2, 1.0);
  Vec w{0.0, 1.0};
  auto once = central_cut(e, w);
  auto twice = central_cut(once, scale(w, -1.0));
  // Points of the ball near the diameter {y ~ center_y} survive both cuts.
  Rng rng(11);
  Mat inv = invert(twice.shape);
  int violations = 0;
  for (int s = 0; s < 20000; ++s) {
    Vec x = rng.in_ball(2, 1.0);
    // must satisfy <w, x> <= 0 and <-w, x - c1> <= 0
    if (x[1] > 0) continue;
    if (-(x[1] - once.center[1]) > 0) continue;
    Vec diff = sub(x, twice.center);
    if (dot(diff, matvec(inv, diff)) > 1.0 + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("log volume decreases by the exact ratio after a cut") {
  auto e = init_ball(2, 1.0);
  auto cut = central_cut(e, Vec{1.0, 0.0});
  CHECK(log_volume(e) - log_volume(cut) == doctest::Approx(-std::log(cut_volume_ratio(2))));
}

TEST_CASE("dimension one degenerates to bisection") {
  auto e = init_ball(1, 2.0);
  auto cut = central_cut(e, Vec{1.0});
  CHECK(cut.center[0] == doctest::Approx(-1.0));
  CHECK(cut.shape(0, 0) == doctest::Approx(1.0));
  CHECK(cut_volume_ratio(1) == 0.5);
}

TEST_CASE("degenerate cuts are rejected") {
  auto e = init_ball(3, 1.0);
  CHECK_THROWS_AS(central_cut(e, Vec{0.0, 0.0, 0.0}), DegenerateCut);
  EllipsoidState tiny;
  tiny.center = {0.0, 0.0};
  tiny.shape = Mat::identity(2);
  tiny.shape(0, 0) = 1e-310;
  tiny.shape(1, 1) = 1e-310;
  CHECK_THROWS_AS(central_cut(tiny, Vec{1.0, 0.0}), DegenerateCut);
}

TEST_CASE("containment under long random cut sequences") {
  // Track a fixed point satisfying every cut; it must stay inside.
  Rng rng(99);
  auto e = init_ball(4, 1.0);
  Vec target = scale(rng.unit_vector(4), 0.05);
  for (int step = 0; step < 60; ++step) {
    Vec w = rng.unit_vector(4);
    // Orient each cut so the target stays on the kept side of the center cut.
    if (dot(w, sub(target, e.center)) > 0) w = scale(w, -1.0);
    e = central_cut(e, w);
    Mat inv = invert(e.shape);
    Vec diff = sub(target, e.center);
    CHECK(dot(diff, matvec(inv, diff)) <= 1.0 + 1e-9);
  }
}
