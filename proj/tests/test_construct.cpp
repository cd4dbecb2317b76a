#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ck/construct.hpp"

#include <cmath>
#include <random>

using namespace ck;

namespace {

using rng_t = std::mt19937_64;

std::vector<double> random_vec(rng_t& rng, int n, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& c : v) c = scale * g(rng);
  return v;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

ScalarField neg_dist_sq(const ModelSpace& s, const SpacePoint& p, double outer,
                        double coeff = 1.0) {
  ScalarField f;
  f.space = s;
  f.domain = Domain{p, 0.0, outer};
  f.claimedConcavity = -2.0 * coeff;
  f.provenance = {{"kind", "compose"}, {"phi", {{"name", "negsquare"}}}};
  f.eval = [s, p, coeff](const SpacePoint& x) {
    const double d = dist(s, p, x);
    return -coeff * d * d;
  };
  return f;
}

} // namespace

TEST_CASE("distance Taylor expansion has fourth-order error") {
  rng_t rng(31);
  std::vector<double> worst;
  for (const double scale : {0.2, 0.1, 0.05}) {
    double w = 0.0;
    rng_t prng(37);
    for (int i = 0; i < 500; ++i) {
      auto p = random_vec(prng, 3, 1.0);
      if (norm(p) < 0.5) continue;
      auto x = random_vec(rng, 3, scale);
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) d2 += (x[static_cast<std::size_t>(k)] -
                                         p[static_cast<std::size_t>(k)]) *
                                        (x[static_cast<std::size_t>(k)] -
                                         p[static_cast<std::size_t>(k)]);
      w = std::max(w, std::abs(taylor_dist(p, x) - std::sqrt(d2)) /
                          std::pow(norm(x), 4));
    }
    worst.push_back(w);
  }
  // error / |x|^4 stays bounded as the scale shrinks (fourth order)
  CHECK(worst[1] <= worst[0] * 3.0);
  CHECK(worst[2] <= worst[0] * 3.0);
  CHECK(worst[0] < 50.0);

  // radial displacements are exact to all orders shown
  CHECK(taylor_dist({2, 0}, {0.3, 0}) ==
        doctest::Approx(1.7).epsilon(1e-12));
  CHECK_THROWS_AS(taylor_dist({0, 0}, {1, 0}), std::invalid_argument);
}

TEST_CASE("model function: normalization, symmetry, quadratic law") {
  const int n = 3;
  const double R = 0.02;
  auto mu = model_mu(n, R);
  CHECK(mu.eval(euclidean_point({0, 0, 0})) == doctest::Approx(0.0));
  CHECK(mu.domain.outerRadius == doctest::Approx(R));

  rng_t rng(41);
  for (int i = 0; i < 400; ++i) {
    auto v = random_vec(rng, n, 0.05);
    auto neg = v;
    for (auto& c : neg) c = -c;
    auto perm = std::vector<double>{v[1], v[2], v[0]};
    const double at = mu.eval(euclidean_point(v));
    CHECK(mu.eval(euclidean_point(neg)) == doctest::Approx(at).epsilon(1e-12));
    CHECK(mu.eval(euclidean_point(perm)) ==
          doctest::Approx(at).epsilon(1e-12));
    // mu_R = -|x|^2 (1 - R(n-1)) + O(|x|^4): cubic term cancels
    const double s2 = norm(v) * norm(v);
    CHECK(std::abs(at + s2 * (1.0 - R * (n - 1))) <= 4.0 * s2 * s2);
  }

  // anchors sit at unit distance along the coordinate axes
  auto anchors = model_anchors(n, R);
  CHECK(anchors.anchors.size() == 2 * n);
  for (const auto& a : anchors.anchors)
    CHECK(norm(a.flat) == doctest::Approx(1.0));
}

TEST_CASE("Euclidean lift reproduces the rescaled model exactly") {
  const auto e2 = ModelSpace::euclidean(2);
  const auto o = euclidean_point({0, 0});
  const double r = 40.0, R = 0.05;
  auto lifted = lift_mu(e2, o, r, R);
  auto mu = model_mu(2, R);
  CHECK(lifted.domain.outerRadius == doctest::Approx(R * r));
  CHECK(lifted.eval(o) == doctest::Approx(0.0));

  rng_t rng(43);
  for (int i = 0; i < 300; ++i) {
    auto v = random_vec(rng, 2, 0.5); // native coords, |v| small vs R r = 2
    auto scaled = v;
    for (auto& c : scaled) c /= r;
    CHECK(lifted.eval(euclidean_point(v)) ==
          doctest::Approx(r * r * mu.eval(euclidean_point(scaled)))
              .epsilon(1e-11));
  }
}

TEST_CASE("cone lift: base value, anchors, explosion quality") {
  // base point far from the apex so that all anchor geodesics of length r
  // stay globally minimizing (the development never wraps past the apex)
  const auto s = ModelSpace::cone(1.5 * kPi);
  const auto p = cone_point(s, 40.0, 0.4);
  const double R = 0.05;

  double prevViolation = 1e300;
  for (const double r : {1.0, 4.0, 16.0}) {
    auto anchors = lift_anchors(s, p, r, R);
    CHECK(anchors.anchors.size() == 4);
    for (const auto& a : anchors.anchors)
      CHECK(dist(s, p, a) == doctest::Approx(r).epsilon(1e-9));

    // directions at the base point are exactly orthonormal
    auto e = anchors_explosion(anchors, p);
    e.delta = 1e-9;
    CHECK(explosion_check(e).valid);

    // at a fixed offset point the direction constraints improve as the
    // anchors move farther out (rays look straighter)
    const auto at = extend_ray(s, p, euclidean_point({0.7, 0.7}), 0.02);
    auto eOff = anchors_explosion(anchors, at);
    auto chk = explosion_check(eOff);
    const double viol = chk.valid ? 0.0 : -chk.worstViolation;
    CHECK(viol <= prevViolation + 1e-15);
    prevViolation = viol;
  }
  CHECK(prevViolation < 0.03);

  auto lifted = lift_mu(s, p, 16.0, R);
  CHECK(lifted.eval(p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lifted.domain.outerRadius == doctest::Approx(16.0 * R));
}

TEST_CASE("reparam spline pieces, smoothness, uniform B") {
  auto s = build_reparam(0.1);
  const double eps = 0.1;

  // exact pieces
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    const double xOut = s.knots[0] * t + 0.5 * (1 - t); // [knot0, 0.5]
    CHECK(s.value(xOut) == doctest::Approx((1 - eps) * xOut).epsilon(1e-14));
    const double xStr = s.knots[2] + (s.knots[1] - s.knots[2]) * t;
    CHECK(s.value(xStr) == doctest::Approx(xStr / (1 - eps)).epsilon(1e-14));
    const double xId = -1.5 + (s.knots[3] + 1.5) * t;
    CHECK(s.value(xId) == doctest::Approx(xId).epsilon(1e-14));
  }

  // C^2 across the knots: central differences agree with the reported
  // derivatives and match from both sides
  for (const double k : s.knots) {
    for (const double h : {1e-5, 1e-6}) {
      const double d1 = (s.value(k + h) - s.value(k - h)) / (2 * h);
      const double d2 =
          (s.value(k + h) - 2 * s.value(k) + s.value(k - h)) / (h * h);
      CHECK(d1 == doctest::Approx(s.deriv1(k)).epsilon(1e-5));
      CHECK(std::abs(d2 - s.deriv2(k)) <= 1e-3);
    }
    CHECK(std::abs(s.deriv1(k + 1e-12) - s.deriv1(k - 1e-12)) <= 1e-9);
  }

  // strictly increasing
  for (int i = 0; i < 3000; ++i) {
    const double x = -1.5 + 1.6 * i / 3000.0;
    CHECK(s.deriv1(x) > 0.0);
  }

  // measured distortion constant is eps-uniform
  const double b1 = build_reparam(1e-1).measuredB;
  const double b2 = build_reparam(1e-2).measuredB;
  const double b3 = build_reparam(1e-3).measuredB;
  CHECK(b1 > 1.0);
  CHECK(b1 < 120.0);
  CHECK(std::max({b1, b2, b3}) <= 1.5 * std::min({b1, b2, b3}));

  auto c2 = s.as_real_c2();
  CHECK(c2.d1min > 0.0);
  CHECK(c2.d1max >= 1.0 / (1 - eps) - 1e-12);
  CHECK(c2.d2max > 0.0);

  CHECK_THROWS_AS(build_reparam(0.7), std::invalid_argument);
}

TEST_CASE("glue of the exact pair: continuity, outer exactness, concavity") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  const auto p = cone_point(s, 2.0, 0.1);
  const double rho = 0.4, eps = 0.1;
  // coefficient slightly below 1 so the stretch piece of the spline stays
  // above the lower sandwich bound -dist^2
  auto f1 = neg_dist_sq(s, p, rho, 0.99);
  auto f2 = neg_dist_sq(s, p, rho / 2, 0.99);
  auto F = glue(f1, f2, eps);

  rng_t rng(47);
  std::uniform_real_distribution<double> uang(0.0, kTwoPi);
  auto at_radius = [&](double d, double phase) {
    return extend_ray(s, p,
                      euclidean_point({std::cos(phase), std::sin(phase)}), d);
  };

  // exact near the outer boundary
  for (int i = 0; i < 200; ++i) {
    const auto x = at_radius(0.996 * rho + 0.003 * rho * (i % 7) / 7.0,
                             uang(rng));
    CHECK(F.eval(x) == doctest::Approx(f1.eval(x)).epsilon(1e-12));
  }
  // agrees with f2 well inside
  for (int i = 0; i < 200; ++i) {
    const auto x = at_radius(0.2 * rho * (i + 1) / 200.0, uang(rng));
    CHECK(F.eval(x) == doctest::Approx(f2.eval(x)).epsilon(1e-12));
  }
  // continuity across both handoff radii along radial profiles
  for (const double base : {rho / 4, rho / 2}) {
    for (int i = 0; i < 50; ++i) {
      const double phase = uang(rng);
      const double step = 1e-6 * rho;
      const double jump = std::abs(F.eval(at_radius(base + step, phase)) -
                                   F.eval(at_radius(base - step, phase)));
      CHECK(jump <= 10.0 * rho * step);
    }
  }

  VerifyOptions opts;
  opts.sampleCount = 4000;
  opts.seed = 53;
  auto rep = concavity_check(F, -2.0 + eps, opts);
  CHECK(rep.certified);
  auto sw = sandwich_check(F, p, eps, 0.0, rho, opts);
  CHECK(sw.certified);

  // mismatched domains are rejected
  auto badInner = neg_dist_sq(s, p, rho / 3, 0.99);
  CHECK_THROWS_AS(glue(f1, badInner, eps), std::invalid_argument);
  // an inner field violating the handoff inequality is refused
  auto tooLow = neg_dist_sq(s, p, rho / 2, 1.5);
  CHECK_THROWS_AS(glue(f1, tooLow, eps), std::runtime_error);
}

TEST_CASE("self-improvement chain certifies on the cone") {
  const auto s = ModelSpace::cone(1.5 * kPi);
  // far enough from the apex that anchors at distance R/modelR = 40 exist
  const auto p = cone_point(s, 60.0, 1.0);
  const double eps = 0.1;
  SelfImproveOptions so;
  auto G = self_improve(s, p, eps, 3, so);
  CHECK(G.domain.outerRadius == doctest::Approx(so.outerRadius));
  CHECK(G.eval(p) == doctest::Approx(0.0).epsilon(1e-12));

  VerifyOptions opts;
  opts.sampleCount = 6000;
  opts.seed = 59;
  auto rep = concavity_check(G, -2.0 + eps, opts);
  CHECK(rep.certified);
  auto sw = sandwich_check(G, p, eps, 0.0, so.outerRadius, opts);
  CHECK(sw.certified);

  // outer-annulus stability: adding depth does not change the field outside
  // the deepest ball
  auto G4 = self_improve(s, p, eps, 4, so);
  rng_t rng(61);
  std::uniform_real_distribution<double> uang(0.0, kTwoPi);
  std::uniform_real_distribution<double> ud(so.outerRadius / 4,
                                            so.outerRadius);
  for (int i = 0; i < 300; ++i) {
    const double phase = uang(rng);
    const auto x = extend_ray(
        s, p, euclidean_point({std::cos(phase), std::sin(phase)}), ud(rng));
    CHECK(G4.eval(x) == doctest::Approx(G.eval(x)).epsilon(1e-12));
  }
}

TEST_CASE("exactification reaches -2 with decreasing tightness ratio") {
  const auto e2 = ModelSpace::euclidean(2);
  const auto o = euclidean_point({0, 0});
  const std::vector<double> schedule{0.1, 0.05, 0.025, 0.0125};
  ExactifyOptions xo;
  auto F = exactify(e2, o, schedule, xo);
  CHECK(F.eval(o) == doctest::Approx(0.0));

  VerifyOptions opts;
  opts.sampleCount = 6000;
  opts.seed = 67;
  auto rep = concavity_check(F, -2.0, opts);
  CHECK(rep.certified);

  // |F + d^2| / d^2 decreases from stage annulus to stage annulus; the
  // stage-i dip governs the band (R_i/4, R_i/2) (further out the min with
  // the previous stage still carries the previous dip)
  rng_t rng(71);
  std::uniform_real_distribution<double> uang(0.0, kTwoPi);
  double prev = 1e300;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const double Ri = xo.outerRadius / std::pow(2.0, double(i));
    double worst = 0.0;
    for (int k = 0; k < 400; ++k) {
      const double d = Ri * (0.26 + 0.23 * k / 400.0);
      const double phase = uang(rng);
      const auto x =
          euclidean_point({d * std::cos(phase), d * std::sin(phase)});
      worst = std::max(worst, std::abs(F.eval(x) + d * d) / (d * d));
    }
    CHECK(worst < prev);
    CHECK(worst > 0.0);
    prev = worst;
  }

  CHECK_THROWS_AS(exactify(e2, o, {0.1, 0.2}, xo), std::invalid_argument);
  CHECK_THROWS_AS(exactify(e2, o, {}, xo), std::invalid_argument);
}
