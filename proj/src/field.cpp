#include "ck/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ck {

namespace {

bool same_point(const SpacePoint& a, const SpacePoint& b) {
  return a.flat == b.flat && a.radius == b.radius && a.angle == b.angle;
}

std::vector<double> flat_unit(const std::vector<double>& from,
                              const std::vector<double>& to) {
  std::vector<double> u(from.size());
  double n = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = to[i] - from[i];
    n += u[i] * u[i];
  }
  n = std::sqrt(n);
  if (n == 0.0) throw std::invalid_argument("degenerate ray");
  for (auto& ui : u) ui /= n;
  return u;
}

// Smallest ball around `center` containing all the given balls; empty check
// helper for intersections.
Domain intersect_domains(const std::vector<const Domain*>& ds) {
  Domain out = *ds.front();
  for (const Domain* d : ds) {
    if (!same_point(d->center, out.center))
      throw std::invalid_argument(
          "domain intersection requires a common center");
    out.innerRadius = std::max(out.innerRadius, d->innerRadius);
    out.outerRadius = std::min(out.outerRadius, d->outerRadius);
  }
  if (out.outerRadius <= out.innerRadius)
    throw std::invalid_argument("empty domain intersection");
  return out;
}

double golden_min(const std::function<double(double)>& f, double a, double b,
                  int iters) {
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return std::min(f1, f2);
}

} // namespace

nlohmann::json point_json(const SpacePoint& p) {
  nlohmann::json j;
  j["flat"] = p.flat;
  j["radius"] = p.radius;
  j["angle"] = p.angle;
  return j;
}

nlohmann::json domain_json(const Domain& d) {
  nlohmann::json j;
  j["center"] = point_json(d.center);
  j["innerRadius"] = d.innerRadius;
  j["outerRadius"] = d.outerRadius;
  return j;
}

SpacePoint ray_point(const RaySpec& ray, double t) {
  if (t < 0.0) throw std::invalid_argument("ray parameter must be >= 0");
  const ModelSpace& s = ray.space;
  const SpacePoint& base = ray.basePoint;
  const SpacePoint& thr = ray.throughPoint;
  switch (s.kind) {
    case SpaceKind::Euclidean: {
      auto u = flat_unit(base.flat, thr.flat);
      SpacePoint p = base;
      for (std::size_t i = 0; i < u.size(); ++i) p.flat[i] += t * u[i];
      return p;
    }
    case SpaceKind::Cone: {
      if (base.radius != 0.0)
        throw std::invalid_argument("cone ray base must be the apex");
      if (thr.radius == 0.0) throw std::invalid_argument("degenerate ray");
      return cone_point(s, t, thr.angle);
    }
    case SpaceKind::Product: {
      const bool flatMoves = base.flat != thr.flat;
      const bool coneMoves = base.radius != thr.radius || base.angle != thr.angle;
      if (!flatMoves && !coneMoves)
        throw std::invalid_argument("degenerate ray");
      if (coneMoves && base.radius != 0.0)
        throw std::invalid_argument(
            "product ray with a moving cone factor must start on the axis");
      const double d = dist(s, base, thr);
      SpacePoint p = base;
      if (flatMoves)
        for (std::size_t i = 0; i < p.flat.size(); ++i)
          p.flat[i] += t * (thr.flat[i] - base.flat[i]) / d;
      if (coneMoves) {
        p.radius = t * thr.radius / d;
        p.angle = p.radius > 0.0 ? thr.angle : 0.0;
      }
      return p;
    }
  }
  return base;
}

bool ConvexRegion::contains(const SpacePoint& x) const {
  if (coreRadius > 0.0 && dist(space, coreCenter, x) <= coreRadius) return true;
  try {
    return definingField(x) >= levelValue;
  } catch (const std::domain_error&) {
    return false;
  }
}

ScalarField dist_field(const ModelSpace& space, const SpacePoint& p) {
  check_membership(space, p);
  ScalarField f;
  f.space = space;
  f.domain = Domain{p, 0.0, 1e300};
  f.claimedLipschitz = 1.0;
  f.provenance = {{"kind", "dist"}, {"point", point_json(p)}};
  f.eval = [space, p](const SpacePoint& x) { return dist(space, p, x); };
  return f;
}

ScalarField busemann_field(const RaySpec& ray) {
  const ModelSpace s = ray.space;
  check_membership(s, ray.basePoint);
  check_membership(s, ray.throughPoint);
  ScalarField f;
  f.space = s;
  f.domain = Domain{ray.basePoint, 0.0, 1e300};
  f.claimedLipschitz = 1.0;
  f.provenance = {{"kind", "busemann"},
                  {"base", point_json(ray.basePoint)},
                  {"through", point_json(ray.throughPoint)}};
  switch (s.kind) {
    case SpaceKind::Euclidean: {
      auto u = flat_unit(ray.basePoint.flat, ray.throughPoint.flat);
      const auto base = ray.basePoint;
      f.eval = [u, base](const SpacePoint& x) {
        double dot = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
          dot += (x.flat[i] - base.flat[i]) * u[i];
        return -dot;
      };
      return f;
    }
    case SpaceKind::Cone: {
      if (ray.basePoint.radius != 0.0)
        throw std::invalid_argument("cone Busemann ray must start at the apex");
      const double theta = ray.throughPoint.angle;
      const double alpha = s.coneAngle;
      f.eval = [theta, alpha](const SpacePoint& x) {
        const double sgap = circle_dist(x.angle, theta, alpha);
        return -x.radius * std::cos(std::min(sgap, kPi));
      };
      return f;
    }
    case SpaceKind::Product: {
      const bool flatMoves = ray.basePoint.flat != ray.throughPoint.flat;
      const bool coneMoves = ray.basePoint.radius != ray.throughPoint.radius ||
                             ray.basePoint.angle != ray.throughPoint.angle;
      if (flatMoves && coneMoves)
        throw std::invalid_argument(
            "product Busemann ray must lie in a single factor");
      if (flatMoves) {
        auto u = flat_unit(ray.basePoint.flat, ray.throughPoint.flat);
        const auto base = ray.basePoint;
        f.eval = [u, base](const SpacePoint& x) {
          double dot = 0.0;
          for (std::size_t i = 0; i < u.size(); ++i)
            dot += (x.flat[i] - base.flat[i]) * u[i];
          return -dot;
        };
        return f;
      }
      if (ray.basePoint.radius != 0.0)
        throw std::invalid_argument(
            "product cone-factor Busemann ray must start on the axis");
      const double theta = ray.throughPoint.angle;
      const double alpha = s.coneAngle;
      f.eval = [theta, alpha](const SpacePoint& x) {
        const double sgap = circle_dist(x.angle, theta, alpha);
        return -x.radius * std::cos(std::min(sgap, kPi));
      };
      return f;
    }
  }
  throw std::logic_error("unreachable");
}

ScalarField busemann_approx_field(const RaySpec& ray, double t) {
  if (t <= 0.0) throw std::invalid_argument("approximation parameter t > 0");
  const SpacePoint anchor = ray_point(ray, t);
  const ModelSpace s = ray.space;
  ScalarField f;
  f.space = s;
  f.domain = Domain{ray.basePoint, 0.0, 1e300};
  f.claimedLipschitz = 1.0;
  f.provenance = {{"kind", "busemannApprox"},
                  {"base", point_json(ray.basePoint)},
                  {"through", point_json(ray.throughPoint)},
                  {"t", t}};
  f.eval = [s, anchor, t](const SpacePoint& x) {
    return dist(s, anchor, x) - t;
  };
  return f;
}

ScalarField affine_combine(
    const std::vector<std::pair<double, ScalarField>>& coeffs,
    double constant) {
  if (coeffs.empty()) throw std::invalid_argument("empty combination");
  const ModelSpace s = coeffs.front().second.space;
  std::vector<const Domain*> ds;
  for (const auto& [c, g] : coeffs) {
    if (g.space != s) throw std::invalid_argument("space tag mismatch");
    ds.push_back(&g.domain);
  }
  ScalarField f;
  f.space = s;
  f.domain = intersect_domains(ds);

  bool allNonneg = true, haveLambda = true, haveL = true;
  double lam = 0.0, lip = 0.0;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [c, g] : coeffs) {
    if (c < 0.0) allNonneg = false;
    if (g.claimedConcavity)
      lam += c * *g.claimedConcavity;
    else
      haveLambda = false;
    if (g.claimedLipschitz)
      lip += std::abs(c) * *g.claimedLipschitz;
    else
      haveL = false;
    terms.push_back({{"coeff", c}, {"field", g.provenance}});
  }
  if (allNonneg && haveLambda) f.claimedConcavity = lam;
  if (haveL) f.claimedLipschitz = lip;
  f.provenance = {{"kind", "affine"}, {"constant", constant}, {"terms", terms}};

  std::vector<std::pair<double, std::function<double(const SpacePoint&)>>> evs;
  evs.reserve(coeffs.size());
  for (const auto& [c, g] : coeffs) evs.emplace_back(c, g.eval);
  f.eval = [evs, constant](const SpacePoint& x) {
    double v = constant;
    for (const auto& [c, e] : evs) v += c * e(x);
    return v;
  };
  return f;
}

ScalarField min_fields(const std::vector<EffectiveField>& fields) {
  if (fields.empty()) throw std::invalid_argument("empty min family");
  const ModelSpace s = fields.front().field.space;
  ScalarField f;
  f.space = s;
  f.domain.center = fields.front().ballCenter;
  double outer = 0.0;
  nlohmann::json members = nlohmann::json::array();
  for (const auto& ef : fields) {
    if (ef.field.space != s) throw std::invalid_argument("space tag mismatch");
    outer = std::max(outer, dist(s, f.domain.center, ef.ballCenter) +
                                ef.ballRadius);
    members.push_back({{"ballCenter", point_json(ef.ballCenter)},
                       {"ballRadius", ef.ballRadius},
                       {"field", ef.field.provenance}});
  }
  f.domain.outerRadius = outer;
  // concavity claim pending: min of concave patches certified only where the
  // patch gluing conditions hold
  f.provenance = {{"kind", "min"}, {"members", members}};

  struct Member {
    std::function<double(const SpacePoint&)> eval;
    SpacePoint c;
    double r;
  };
  std::vector<Member> ms;
  ms.reserve(fields.size());
  for (const auto& ef : fields)
    ms.push_back({ef.field.eval, ef.ballCenter, ef.ballRadius});
  f.eval = [s, ms](const SpacePoint& x) {
    double best = 0.0;
    bool hit = false;
    for (const auto& m : ms) {
      if (dist(s, m.c, x) > m.r) continue;
      const double v = m.eval(x);
      if (!hit || v < best) best = v;
      hit = true;
    }
    if (!hit) throw std::domain_error("point outside every effective ball");
    return best;
  };
  return f;
}

ScalarField compose_real(const ScalarField& field, const RealC2& phi,
                         const nlohmann::json& phiDescription) {
  ScalarField f;
  f.space = field.space;
  f.domain = field.domain;
  f.provenance = {{"kind", "compose"},
                  {"phi", phiDescription},
                  {"inner", field.provenance}};
  if (field.claimedLipschitz) {
    const double L = *field.claimedLipschitz;
    f.claimedLipschitz = std::max(std::abs(phi.d1min), std::abs(phi.d1max)) * L;
    if (field.claimedConcavity) {
      const double lam = *field.claimedConcavity;
      // (phi o g)'' = phi''(g) g'^2 + phi'(g) g''; worst case over the
      // recorded derivative ranges, assuming phi' >= 0
      const double secondTerm =
          lam <= 0.0 ? phi.d1min * lam : phi.d1max * lam;
      f.claimedConcavity = std::max(phi.d2max, 0.0) * L * L + secondTerm;
    }
  }
  auto inner = field.eval;
  auto fn = phi.f;
  f.eval = [inner, fn](const SpacePoint& x) { return fn(inner(x)); };
  return f;
}

ScalarField rescale_pullback(const ScalarField& field, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("scale must be > 0");
  ScalarField f;
  f.space = field.space;
  f.domain = field.domain;
  f.domain.innerRadius *= scale;
  f.domain.outerRadius *= scale;
  f.claimedConcavity = field.claimedConcavity;
  if (field.claimedLipschitz) f.claimedLipschitz = *field.claimedLipschitz * scale;
  f.provenance = {{"kind", "rescale"},
                  {"scale", scale},
                  {"inner", field.provenance}};
  auto inner = field.eval;
  const double s2 = scale * scale;
  f.eval = [inner, s2](const SpacePoint& x) { return s2 * inner(x); };
  return f;
}

ScalarField boundary_dist_field(const ConvexRegion& region) {
  if (region.boundarySamples.empty())
    throw std::invalid_argument("region has no boundary samples");
  const ModelSpace s = region.space;
  const auto samples = region.boundarySamples;
  ScalarField f;
  f.space = s;
  f.domain = Domain{region.coreCenter, 0.0, 1e300};
  f.claimedLipschitz = 1.0;
  f.provenance = {{"kind", "boundaryDist"},
                  {"sampleCount", samples.size()},
                  {"level", region.levelValue}};
  f.eval = [s, samples](const SpacePoint& x) {
    std::size_t best = 0;
    double bestD = dist(s, x, samples[0]);
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const double d = dist(s, x, samples[i]);
      if (d < bestD) {
        bestD = d;
        best = i;
      }
    }
    if (samples.size() < 3) return bestD;
    // refine along the polyline segments adjacent to the best sample
    const std::size_t n = samples.size();
    const SpacePoint& prev = samples[(best + n - 1) % n];
    const SpacePoint& next = samples[(best + 1) % n];
    double refined = bestD;
    for (const SpacePoint* nb : {&prev, &next}) {
      const SpacePoint a = samples[best];
      const SpacePoint b = *nb;
      refined = std::min(
          refined, golden_min(
                       [&](double t) {
                         return dist(s, x, geodesic(s, a, b, t));
                       },
                       0.0, 1.0, 40));
    }
    return refined;
  };
  return f;
}

} // namespace ck
