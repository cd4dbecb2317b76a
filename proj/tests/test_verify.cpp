#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ck/verify.hpp"

#include <cmath>
#include <random>

using namespace ck;

namespace {

using rng_t = std::mt19937_64;

ScalarField neg_dist_sq(const ModelSpace& s, const SpacePoint& p,
                        double outer, double coeff = 1.0) {
  ScalarField f;
  f.space = s;
  f.domain = Domain{p, 0.0, outer};
  f.claimedConcavity = -2.0 * coeff;
  f.claimedLipschitz = 2.0 * coeff * outer;
  f.provenance = {{"kind", "compose"},
                  {"phi", {{"name", "negsquare"}, {"coeff", coeff}}},
                  {"inner", {{"kind", "dist"}, {"point", point_json(p)}}}};
  f.eval = [s, p, coeff](const SpacePoint& x) {
    const double d = dist(s, p, x);
    return -coeff * d * d;
  };
  return f;
}

Direction dir3(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  Direction d;
  d.vec = {x / n, y / n, z / n};
  return d;
}

Explosion orthonormal_explosion(double delta = 0.0) {
  Explosion e;
  e.directionSpace = DirectionSpace::unitSphere(2);
  e.delta = delta;
  e.pairs = {{{dir3(1, 0, 0)}, {dir3(-1, 0, 0)}},
             {{dir3(0, 1, 0)}, {dir3(0, -1, 0)}},
             {{dir3(0, 0, 1)}, {dir3(0, 0, -1)}}};
  return e;
}

Direction random_dir(rng_t& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return dir3(g(rng), g(rng), g(rng));
}

} // namespace

TEST_CASE("midpoint defect basics") {
  const auto e2 = ModelSpace::euclidean(2);
  const auto o = euclidean_point({0, 0});

  ScalarField c;
  c.space = e2;
  c.domain = Domain{o, 0.0, 2.0};
  c.eval = [](const SpacePoint&) { return 1.0; };
  const auto x = euclidean_point({-1, 0}), y = euclidean_point({1, 0});
  CHECK(midpoint_defect(c, x, y, o, 0.0) == doctest::Approx(0.0));
  CHECK(midpoint_defect(c, x, y, o, -2.0) == doctest::Approx(-2.0));

  // parallelogram identity: -|x|^2 has zero defect at lambda = -2
  auto f = neg_dist_sq(e2, o, 2.0);
  rng_t rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto a = euclidean_point({u(rng), u(rng)});
    const auto b = euclidean_point({u(rng), u(rng)});
    const auto m = geodesic(e2, a, b, 0.5);
    CHECK(midpoint_defect(f, a, b, m, -2.0) ==
          doctest::Approx(0.0).epsilon(1e-12));
    // swap invariance
    CHECK(midpoint_defect(f, a, b, m, -1.5) ==
          doctest::Approx(midpoint_defect(f, b, a, m, -1.5)));
  }

  CHECK_THROWS_AS(midpoint_defect(f, x, y, euclidean_point({0.5, 0.5}), -2.0),
                  std::invalid_argument);
}

TEST_CASE("neg dist squared is (-2)-concave on the cone") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  auto f = neg_dist_sq(s, origin_of(s), 2.0);
  VerifyOptions opts;
  opts.sampleCount = 10000;
  opts.seed = 101;
  auto rep = concavity_check(f, -2.0, opts);
  CHECK(rep.certified);
  CHECK(rep.tripleCount == 10000);
  CHECK(rep.worstMargin >= -rep.tolerance);
}

TEST_CASE("concavity certification and refusal") {
  const auto e3 = ModelSpace::euclidean(3);
  auto f = neg_dist_sq(e3, euclidean_point({0, 0, 0}), 1.5);
  VerifyOptions opts;
  opts.sampleCount = 4000;
  opts.seed = 7;

  auto ok = concavity_check(f, -2.0, opts);
  CHECK(ok.certified);
  CHECK(std::abs(ok.worstMargin) <= 1e-12 * 10);

  auto bad = concavity_check(f, -2.01, opts);
  CHECK(!bad.certified);
  CHECK(bad.worstMargin < -bad.tolerance);
  // witness actually violates
  CHECK(midpoint_defect(f, bad.witness.x, bad.witness.y, bad.witness.m,
                        -2.01) == doctest::Approx(bad.worstMargin));

  // monotone in lambda by the formula
  auto mid = concavity_check(f, -1.0, opts);
  CHECK(mid.worstMargin >= ok.worstMargin);
}

TEST_CASE("lipschitz estimation") {
  const auto e2 = ModelSpace::euclidean(2);
  const auto o = euclidean_point({0, 0});
  ScalarField c;
  c.space = e2;
  c.domain = Domain{o, 0.0, 1.0};
  c.eval = [](const SpacePoint&) { return 3.25; };
  VerifyOptions opts;
  opts.sampleCount = 5000;
  opts.seed = 11;
  CHECK(lipschitz_estimate(c, opts) == 0.0);

  auto d = dist_field(e2, o);
  d.domain.outerRadius = 1.0;
  CHECK(lipschitz_estimate(d, opts) <= 1.0 + 1e-12);
  CHECK(lipschitz_estimate(d, opts) > 0.9);
}

TEST_CASE("sandwich bounds") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  const auto p = origin_of(s);
  VerifyOptions opts;
  opts.sampleCount = 3000;
  opts.seed = 13;

  auto tight = neg_dist_sq(s, p, 1.0);
  auto rep = sandwich_check(tight, p, 0.1, 0.0, 1.0, opts);
  CHECK(rep.certified);
  CHECK(rep.worstLowerSlack == doctest::Approx(0.0)); // lower bound tight

  auto inner = neg_dist_sq(s, p, 1.0, 1.0 - 0.1);
  auto rep2 = sandwich_check(inner, p, 0.1, 0.0, 1.0, opts);
  CHECK(rep2.certified);
  CHECK(rep2.worstLowerSlack > 0.0);
  CHECK(rep2.worstUpperSlack > 0.0);

  auto outside = neg_dist_sq(s, p, 1.0, 1.0 - 0.3); // above the upper bound
  auto rep3 = sandwich_check(outside, p, 0.1, 0.5, 1.0, opts);
  CHECK(!rep3.certified);
}

TEST_CASE("explosion checks") {
  auto good = orthonormal_explosion();
  auto chk = explosion_check(good);
  CHECK(chk.valid);

  auto bent = good;
  bent.pairs[1].second = {dir3(std::sin(0.1), -std::cos(0.1), 0.0)};
  auto chk2 = explosion_check(bent);
  CHECK(!chk2.valid);
  CHECK(chk2.worstViolation < -0.05);
  CHECK(!chk2.violatedConstraint.empty());

  bent.delta = -chk2.worstViolation + 1e-12;
  CHECK(explosion_check(bent).valid);
}

TEST_CASE("BGP defect") {
  auto e = orthonormal_explosion();
  rng_t rng(17);
  for (int i = 0; i < 1000; ++i)
    CHECK(bgp_defect(e, random_dir(rng)) <= 1e-12);
  CHECK(bgp_defect(e, dir3(1, 0, 0)) <= 1e-15);

  // perturbed explosions: max defect nonincreasing as delta shrinks
  double prev = 1e300;
  for (const double delta : {0.1, 0.05, 0.01}) {
    Explosion pert = orthonormal_explosion(delta);
    pert.pairs[0].first = {dir3(std::cos(delta), std::sin(delta), 0.0)};
    pert.pairs[1].first = {dir3(0.0, std::cos(delta), std::sin(delta))};
    pert.pairs[2].first = {dir3(std::sin(delta), 0.0, std::cos(delta))};
    rng_t drng(19);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i)
      worst = std::max(worst, bgp_defect(pert, random_dir(drng)));
    CHECK(worst <= prev);
    CHECK(worst > 0.0);
    prev = worst;
  }
}

TEST_CASE("determinism across worker counts") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  auto f = neg_dist_sq(s, cone_point(s, 1.0, 0.3), 0.8);
  VerifyOptions a, b;
  a.sampleCount = b.sampleCount = 3000;
  a.seed = b.seed = 999;
  a.workers = 1;
  b.workers = 7;
  CHECK(concavity_check(f, -2.0, a).to_json().dump() ==
        concavity_check(f, -2.0, b).to_json().dump());
  CHECK(sandwich_check(f, f.domain.center, 0.1, 0.1, 0.8, a).to_json().dump() ==
        sandwich_check(f, f.domain.center, 0.1, 0.1, 0.8, b).to_json().dump());
}

TEST_CASE("rescale commutes with certification decisions") {
  // f_r is the rescaled-metric reading of -dist^2: values carry a 1/s^2
  // factor and the domain radius is in rescaled units. Its pullback is the
  // native -dist^2, so both must reach the same certificate decisions.
  const auto s = ModelSpace::cone(1.5 * kPi);
  const double scale = 0.5;
  ScalarField fr;
  fr.space = s;
  fr.domain = Domain{origin_of(s), 0.0, 1.0};
  fr.provenance = {{"kind", "compose"}, {"phi", {{"name", "negsquare"}}}};
  fr.eval = [s, scale](const SpacePoint& x) {
    const double d = dist(s, origin_of(s), x) / scale;
    return -d * d;
  };
  VerifyOptions opts;
  opts.sampleCount = 2000;
  opts.seed = 23;
  auto native = rescale_pullback(fr, scale);
  CHECK(native.domain.outerRadius == doctest::Approx(0.5));

  auto before = concavity_check(fr, -2.0, opts);
  auto after = concavity_check(native, -2.0, opts);
  CHECK(before.certified);
  CHECK(before.certified == after.certified);
  CHECK(std::abs(after.worstMargin) <= after.tolerance); // exact equality case

  const double lamBad = -2.0 / (scale * scale) - 1.0;
  auto beforeBad = concavity_check(fr, lamBad, opts);
  auto afterBad = concavity_check(native, lamBad, opts);
  CHECK(beforeBad.certified == afterBad.certified);
  CHECK(!afterBad.certified);
}

TEST_CASE("measured aleph shrinks with tighter fields") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  const auto p = origin_of(s);
  VerifyOptions opts;
  opts.sampleCount = 4000;
  opts.seed = 29;

  // field violating the upper sandwich bound inside a small ball only:
  // f = -(1-2e) d^2 + off, off > 0 breaks the bound for d^2 < off/(2e')
  auto make = [&](double off) {
    ScalarField g;
    g.space = s;
    g.domain = Domain{p, 0.0, 1.0};
    g.provenance = {{"kind", "affine"}, {"constant", off}};
    g.eval = [s, p, off](const SpacePoint& x) {
      const double d = dist(s, p, x);
      return -0.9 * d * d + off; // inside both bounds once d is large enough
    };
    return g;
  };
  const double a1 = measured_aleph(make(1e-4), p, 0.1, 1.0, opts);
  const double a2 = measured_aleph(make(1e-6), p, 0.1, 1.0, opts);
  CHECK(a2 < a1);
  CHECK(a1 < 1.0);
}
