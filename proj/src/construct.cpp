#include "ck/construct.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ck {

namespace {

double sq(double v) { return v * v; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Quintic on [x0, x1] matching value / first / second derivative at both
// ends; coefficients in t = (x - x0) / (x1 - x0).
std::array<double, 6> hermite_quintic(double h, double v0, double m0,
                                      double a0, double v1, double m1,
                                      double a1) {
  std::array<double, 6> c{};
  c[0] = v0;
  c[1] = m0 * h;
  c[2] = a0 * h * h / 2;
  const double A = v1 - (c[0] + c[1] + c[2]);
  const double B = m1 * h - (c[1] + 2 * c[2]);
  const double C = a1 * h * h - 2 * c[2];
  c[3] = 10 * A - 4 * B + C / 2;
  c[4] = -15 * A + 7 * B - C;
  c[5] = 6 * A - 3 * B + C / 2;
  return c;
}

double poly_eval(const std::array<double, 6>& c, double t, int deriv) {
  double v = 0.0;
  for (int i = 5; i >= deriv; --i) {
    double coef = c[static_cast<std::size_t>(i)];
    for (int k = 0; k < deriv; ++k) coef *= (i - k);
    v = v * t + coef;
  }
  return v;
}

double model_value(const std::vector<SpacePoint>& anchors,
                   const ModelSpace& space, const SpacePoint& x, double r,
                   double R) {
  double sum = 0.0;
  for (const auto& a : anchors)
    sum += -0.5 * sq((1.0 + R) - dist(space, a, x) / r) + R * R / 2;
  return sum;
}

struct ShellSampler {
  const ModelSpace& space;
  const SpacePoint& center;
  std::uint64_t seed;
  std::uint64_t k = 0;

  SpacePoint draw(double lo, double hi, std::size_t budget = 200000) {
    while (budget--) {
      auto x =
          sample_ball(space, center, hi, 1, mix_seed(seed, k++)).front();
      const double d = dist(space, center, x);
      if (d >= lo && d <= hi) return x;
    }
    throw std::runtime_error("shell sampling exhausted");
  }
};

} // namespace

double taylor_dist(const std::vector<double>& p, const std::vector<double>& x) {
  double P2 = 0.0;
  for (double c : p) P2 += c * c;
  const double P = std::sqrt(P2);
  if (P == 0.0) throw std::invalid_argument("expansion point p must be nonzero");
  double a = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    a += x[i] * p[i] / P;
    s2 += x[i] * x[i];
  }
  return P - a + 0.5 * (s2 - a * a) / P + 0.5 * (a * s2 - a * a * a) / P2;
}

StrainerAnchors model_anchors(int n, double R) {
  if (n < 1) throw std::invalid_argument("dimension must be >= 1");
  if (R >= 1.0 || R <= 0.0) throw std::invalid_argument("need 0 < R < 1");
  StrainerAnchors out;
  out.space = ModelSpace::euclidean(n);
  out.base = origin_of(out.space);
  out.R = R;
  out.r = 1.0;
  for (int sgn : {+1, -1})
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      e[static_cast<std::size_t>(i)] = sgn;
      out.anchors.push_back(euclidean_point(e));
    }
  return out;
}

ScalarField model_mu(int n, double R) {
  auto anchors = model_anchors(n, R);
  ScalarField f;
  f.space = anchors.space;
  f.domain = Domain{anchors.base, 0.0, R};
  f.provenance = {{"kind", "modelMu"}, {"n", n}, {"R", R}};
  const ModelSpace space = anchors.space;
  const auto pts = anchors.anchors;
  f.eval = [space, pts, R](const SpacePoint& x) {
    return model_value(pts, space, x, 1.0, R);
  };
  return f;
}

StrainerAnchors lift_anchors(const ModelSpace& space, const SpacePoint& p,
                             double r, double R) {
  if (r <= 0.0) throw std::invalid_argument("lift scale r must be > 0");
  if (R >= 1.0 || R <= 0.0) throw std::invalid_argument("need 0 < R < 1");
  auto chart = tangent_cone(space, p);
  if (chart.tangent.kind != SpaceKind::Euclidean)
    throw std::invalid_argument(
        "anchor placement requires a Euclidean tangent cone");
  const int n = chart.tangent.flatDim;
  StrainerAnchors out;
  out.space = space;
  out.base = p;
  out.R = R;
  out.r = r;
  for (int sgn : {+1, -1})
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(static_cast<std::size_t>(n), 0.0);
      e[static_cast<std::size_t>(i)] = sgn;
      out.anchors.push_back(extend_ray(space, p, euclidean_point(e), r));
    }
  return out;
}

ScalarField lift_mu(const ModelSpace& space, const SpacePoint& p, double r,
                    double R) {
  auto anchors = lift_anchors(space, p, r, R);
  ScalarField fr;
  fr.space = space;
  fr.domain = Domain{p, 0.0, R}; // rescaled units; pullback converts
  fr.provenance = {{"kind", "liftMu"},
                   {"point", point_json(p)},
                   {"r", r},
                   {"R", R}};
  const auto pts = anchors.anchors;
  const ModelSpace sp = space;
  fr.eval = [sp, pts, r, R](const SpacePoint& x) {
    return model_value(pts, sp, x, r, R);
  };
  return rescale_pullback(fr, r);
}

Explosion anchors_explosion(const StrainerAnchors& anchors,
                            const SpacePoint& at) {
  auto chart = tangent_cone(anchors.space, at);
  if (chart.tangent.kind != SpaceKind::Euclidean ||
      chart.tangent.flatDim != 2)
    throw std::invalid_argument(
        "direction extraction implemented for 2-dimensional tangent cones");
  Explosion e;
  e.directionSpace = DirectionSpace::circle(kTwoPi);
  const std::size_t n = anchors.anchors.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    auto dirTo = [&](const SpacePoint& a) {
      const auto v = chart.log(a);
      Direction d;
      d.angle = std::atan2(v.flat[1], v.flat[0]);
      if (d.angle < 0) d.angle += kTwoPi;
      return d;
    };
    e.pairs.push_back(
        {{dirTo(anchors.anchors[i])}, {dirTo(anchors.anchors[i + n])}});
  }
  return e;
}

double ReparamSpline::value(double x) const {
  if (x >= knots[0]) return (1.0 - eps) * x;
  if (x >= knots[1]) {
    const double h = knots[0] - knots[1];
    return poly_eval(blend[0], (x - knots[1]) / h, 0);
  }
  if (x >= knots[2]) return x / (1.0 - eps);
  if (x >= knots[3]) {
    const double h = knots[2] - knots[3];
    return poly_eval(blend[1], (x - knots[3]) / h, 0);
  }
  return x;
}

double ReparamSpline::deriv1(double x) const {
  if (x >= knots[0]) return 1.0 - eps;
  if (x >= knots[1]) {
    const double h = knots[0] - knots[1];
    return poly_eval(blend[0], (x - knots[1]) / h, 1) / h;
  }
  if (x >= knots[2]) return 1.0 / (1.0 - eps);
  if (x >= knots[3]) {
    const double h = knots[2] - knots[3];
    return poly_eval(blend[1], (x - knots[3]) / h, 1) / h;
  }
  return 1.0;
}

double ReparamSpline::deriv2(double x) const {
  if (x >= knots[0]) return 0.0;
  if (x >= knots[1]) {
    const double h = knots[0] - knots[1];
    return poly_eval(blend[0], (x - knots[1]) / h, 2) / (h * h);
  }
  if (x >= knots[2]) return 0.0;
  if (x >= knots[3]) {
    const double h = knots[2] - knots[3];
    return poly_eval(blend[1], (x - knots[3]) / h, 2) / (h * h);
  }
  return 0.0;
}

RealC2 ReparamSpline::as_real_c2() const {
  RealC2 out;
  const ReparamSpline s = *this;
  out.f = [s](double x) { return s.value(x); };
  out.d1 = [s](double x) { return s.deriv1(x); };
  out.d2 = [s](double x) { return s.deriv2(x); };
  double d1lo = 1e300, d1hi = -1e300, d2lo = 1e300, d2hi = -1e300;
  for (int i = 0; i <= 4000; ++i) {
    const double x = -1.5 + 1.6 * i / 4000.0;
    d1lo = std::min(d1lo, deriv1(x));
    d1hi = std::max(d1hi, deriv1(x));
    d2lo = std::min(d2lo, deriv2(x));
    d2hi = std::max(d2hi, deriv2(x));
  }
  out.d1min = d1lo;
  out.d1max = d1hi;
  out.d2min = d2lo;
  out.d2max = d2hi;
  return out;
}

nlohmann::json ReparamSpline::describe() const {
  return {{"name", "reparamSpline"},
          {"eps", eps},
          {"delta", delta},
          {"knots", knots},
          {"measuredB", measuredB}};
}

ReparamSpline build_reparam(double eps) {
  if (!(eps > 0.0 && eps < 0.5))
    throw std::invalid_argument("eps must lie in (0, 1/2)");
  ReparamSpline s;
  s.eps = eps;
  const double d = ReparamSpline::delta;
  s.knots = {-sq(0.25 + d), -sq(0.5 - d), -sq(0.5 + d), -sq(1.0 - d)};
  {
    // gap between the stretch piece x/(1-eps) and the shrink piece (1-eps)x
    const double x0 = s.knots[1], x1 = s.knots[0];
    s.blend[0] = hermite_quintic(x1 - x0, x0 / (1 - eps), 1 / (1 - eps), 0.0,
                                 (1 - eps) * x1, 1 - eps, 0.0);
  }
  {
    // gap between the identity piece and the stretch piece
    const double x0 = s.knots[3], x1 = s.knots[2];
    s.blend[1] = hermite_quintic(x1 - x0, x0, 1.0, 0.0, x1 / (1 - eps),
                                 1 / (1 - eps), 0.0);
  }
  double B = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double x = -1.5 + 1.6 * i / 20000.0;
    B = std::max({B, std::abs(s.value(x) - x) / eps,
                  std::abs(s.deriv1(x) - 1.0) / eps,
                  std::abs(s.deriv2(x)) / eps});
  }
  s.measuredB = B;
  return s;
}

ScalarField glue(const ScalarField& f1, const ScalarField& f2, double eps,
                 const GlueOptions& opts) {
  if (f1.space != f2.space) throw std::invalid_argument("space tag mismatch");
  const ModelSpace space = f1.space;
  const SpacePoint p = f1.domain.center;
  const double rho = f1.domain.outerRadius;
  if (dist(space, p, f2.domain.center) > 1e-12 * rho)
    throw std::invalid_argument("glue inputs must share their center");
  if (std::abs(f2.domain.outerRadius - rho / 2) > 1e-9 * rho)
    throw std::invalid_argument("f2 must live on the half-radius ball");

  const double defaultB = build_reparam(eps).measuredB;
  const double epsPrime =
      opts.epsPrime > 0.0 ? opts.epsPrime : eps / (2.0 * (1.0 + defaultB));
  ReparamSpline spline = build_reparam(epsPrime);

  auto e1 = f1.eval;
  auto e2 = f2.eval;
  const double rho2 = rho * rho;
  auto phiF1 = [spline, e1, rho2](const SpacePoint& x) {
    return rho2 * spline.value(e1(x) / rho2);
  };

  if (opts.checkHypotheses) {
    ShellSampler sampler{space, p, opts.seed};
    const double tol = 1e-9 * rho2;
    // interface toward the outer region: phi o f1 must win the min there
    for (std::size_t i = 0; i < opts.checkSamples; ++i) {
      const auto x = sampler.draw(0.497 * rho, 0.5 * rho);
      if (phiF1(x) > e2(x) + tol)
        throw std::runtime_error(
            "glue interface failure near the half-radius shell");
    }
    // interface toward the inner ball: f2 must win the min there
    for (std::size_t i = 0; i < opts.checkSamples; ++i) {
      const auto x = sampler.draw(0.25 * rho, 0.253 * rho);
      if (e2(x) > phiF1(x) + tol)
        throw std::runtime_error(
            "glue interface failure near the quarter-radius shell");
    }
    // sandwich hypotheses (with the allowed widening of the lower bound)
    for (std::size_t i = 0; i < opts.checkSamples; ++i) {
      const auto x = sampler.draw(0.1 * rho, rho);
      const double d = dist(space, p, x);
      if (e1(x) < -(1.0 + opts.lowerSlack) * d * d - tol ||
          e1(x) > -(1.0 - 2 * eps - opts.lowerSlack) * d * d + tol)
        throw std::runtime_error("glue hypothesis failure: f1 sandwich");
      if (d <= 0.5 * rho &&
          (e2(x) < -(1.0 + opts.lowerSlack) * d * d - tol ||
           e2(x) > -(1.0 - 2 * eps - opts.lowerSlack) * d * d + tol))
        throw std::runtime_error("glue hypothesis failure: f2 sandwich");
    }
  }

  ScalarField F;
  F.space = space;
  F.domain = f1.domain;
  F.provenance = {{"kind", "glue"},
                  {"eps", eps},
                  {"epsPrime", epsPrime},
                  {"measuredB", spline.measuredB},
                  {"outer", f1.provenance},
                  {"inner", f2.provenance}};
  if (f1.claimedConcavity)
    F.claimedConcavity = *f1.claimedConcavity + eps * spline.measuredB;
  F.claimedLipschitz = f1.claimedLipschitz;
  F.eval = [space, p, rho, phiF1, e2](const SpacePoint& x) {
    const double d = dist(space, p, x);
    if (d > rho / 2) return phiF1(x);
    if (d > rho / 4) return std::min(phiF1(x), e2(x));
    return e2(x);
  };
  return F;
}

ScalarField self_improve(const ModelSpace& space, const SpacePoint& p,
                         double eps, int depth,
                         const SelfImproveOptions& opts) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  std::vector<ScalarField> stages;
  for (int i = 1; i <= depth; ++i) {
    const double Ri = opts.outerRadius / std::pow(2.0, i - 1);
    stages.push_back(lift_mu(space, p, Ri / opts.modelR, opts.modelR));
  }
  ScalarField G = stages.back();
  for (int i = depth - 1; i >= 1; --i) {
    GlueOptions g;
    g.checkHypotheses = opts.checkHypotheses;
    g.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
    try {
      G = glue(stages[static_cast<std::size_t>(i - 1)], G, eps, g);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("self-improve stage " + std::to_string(i) +
                               ": " + e.what());
    }
  }
  G.provenance = {{"kind", "selfImprove"},
                  {"eps", eps},
                  {"depth", depth},
                  {"outerRadius", opts.outerRadius},
                  {"modelR", opts.modelR},
                  {"point", point_json(p)}};
  G.claimedConcavity = -2.0 + eps;
  auto chart = tangent_cone(space, p);
  const int n = chart.tangent.kind == SpaceKind::Euclidean
                    ? chart.tangent.flatDim
                    : space.dimension();
  G.claimedLipschitz = 4.0 * n * opts.outerRadius;
  return G;
}

ScalarField exactify(const ModelSpace& space, const SpacePoint& p,
                     const std::vector<double>& epsSchedule,
                     const ExactifyOptions& opts) {
  if (epsSchedule.empty()) throw std::invalid_argument("empty schedule");
  for (std::size_t i = 1; i < epsSchedule.size(); ++i)
    if (epsSchedule[i] >= epsSchedule[i - 1])
      throw std::invalid_argument("eps schedule must be decreasing");
  auto chart = tangent_cone(space, p);
  if (chart.tangent.kind != SpaceKind::Euclidean)
    throw std::invalid_argument("exactify needs a Euclidean tangent cone");
  const int n = chart.tangent.flatDim;

  const int depth = static_cast<int>(epsSchedule.size());
  const double eta = opts.modelR * std::max(1, n - 1);
  std::vector<ScalarField> stages;
  std::vector<double> zetas;
  for (int i = 1; i <= depth; ++i) {
    // the deepest stage meets its neighbor raw (no stretch piece on its
    // side), so its dip drop must fit inside one eps' alone: use a smaller
    // final decay step
    const double zetaI =
        (i == depth && depth > 1)
            ? opts.zeta1 * std::pow(opts.zetaDecay, depth - 2) * 0.985
            : opts.zeta1 * std::pow(opts.zetaDecay, i - 1);
    const double Ri = opts.outerRadius / std::pow(2.0, i - 1);
    auto fi = lift_mu(space, p, Ri / opts.modelR, opts.modelR);
    // the lift is (-2 + 2 eta)-concave up to quartic corrections, so this
    // multiplier makes the stage exactly -2 (1 + zeta_i)-concave
    stages.push_back(
        affine_combine({{(1.0 + zetaI) / (1.0 - eta), fi}}, 0.0));
    zetas.push_back(zetaI);
  }
  ScalarField G = stages.back();
  for (int i = depth - 1; i >= 1; --i) {
    GlueOptions g;
    // must exceed the dip drop zeta_i - zeta_{i+1} (interface continuity)
    // while the composition degradation ~75 eps' stays below the reserve
    // 2 zeta_i; 0.024 zeta_i sits inside that window for decay 0.97
    g.epsPrime = 0.024 * zetas[static_cast<std::size_t>(i - 1)];
    g.lowerSlack = 0.2; // multiplied stages dip below -dist^2 by design
    g.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
    try {
      G = glue(stages[static_cast<std::size_t>(i - 1)], G,
               epsSchedule[static_cast<std::size_t>(i - 1)], g);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("exactify stage " + std::to_string(i) + ": " +
                               e.what());
    }
  }
  G.provenance = {{"kind", "exactify"},
                  {"epsSchedule", epsSchedule},
                  {"outerRadius", opts.outerRadius},
                  {"point", point_json(p)}};
  G.claimedConcavity = -2.0;
  return G;
}

} // namespace ck
