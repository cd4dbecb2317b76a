#include "ck/product.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace ck {
namespace {

double sq(double v) { return v * v; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double origin_dist(const ModelSpace& s, const SpacePoint& x) {
  switch (s.kind) {
    case SpaceKind::Euclidean: {
      double n2 = 0.0;
      for (double v : x.flat) n2 += v * v;
      return std::sqrt(n2);
    }
    case SpaceKind::Cone:
      return x.radius;
    case SpaceKind::Product: {
      double n2 = x.radius * x.radius;
      for (double v : x.flat) n2 += v * v;
      return std::sqrt(n2);
    }
  }
  throw std::logic_error("unreachable");
}

// Polar angle of a 2-dimensional point (cone native, Euclidean(2) via atan2).
double polar_angle(const ModelSpace& s, const SpacePoint& x) {
  if (s.kind == SpaceKind::Cone) return x.angle;
  if (s.kind == SpaceKind::Euclidean && s.flatDim == 2) {
    double a = std::atan2(x.flat[1], x.flat[0]);
    if (a < 0.0) a += kTwoPi;
    return a;
  }
  throw std::invalid_argument("polar angle needs a 2-dimensional space");
}

double total_angle(const ModelSpace& s) {
  if (s.kind == SpaceKind::Cone) return s.coneAngle;
  if (s.kind == SpaceKind::Euclidean && s.flatDim == 2) return kTwoPi;
  throw std::invalid_argument("total angle needs a 2-dimensional space");
}

SpacePoint polar_point(const ModelSpace& s, double r, double theta) {
  if (s.kind == SpaceKind::Cone) return cone_point(s, r, theta);
  return euclidean_point({r * std::cos(theta), r * std::sin(theta)});
}

// Dilation about the origin (well defined on the whole catalog).
SpacePoint scale_point(const ModelSpace& s, const SpacePoint& p, double c) {
  SpacePoint q = p;
  for (double& v : q.flat) v *= c;
  q.radius *= c;
  return q;
}

// Deterministic samples in the shell lo <= |xq| <= hi of B_hi(q).
std::vector<SpacePoint> shell_samples(const ModelSpace& s, const SpacePoint& q,
                                      double lo, double hi, std::size_t count,
                                      std::uint64_t seed) {
  std::vector<SpacePoint> out;
  out.reserve(count);
  std::uint64_t k = 0;
  while (out.size() < count) {
    if (k > 400 + 40 * count)
      throw std::runtime_error("shell sampling budget exhausted");
    auto batch = sample_ball(s, q, hi, 64, mix_seed(seed, k++));
    for (const auto& x : batch) {
      if (out.size() >= count) break;
      const double d = dist(s, q, x);
      if (d >= lo && d <= hi) out.push_back(x);
    }
  }
  return out;
}

void require_cone_like(const ModelSpace& s, const char* what) {
  if (s.kind != SpaceKind::Cone && s.kind != SpaceKind::Product)
    throw std::invalid_argument(std::string(what) +
                                " needs a cone or flat x cone product");
}

// F_q = |q o| B_q + f/2 + eps dist_q^2 - rq^2 eps / 4 + |q o|^2 / 2 at a
// non-apex cone point; shared by the searched patch and the apex pipeline.
ScalarField make_final_field(const ModelSpace& space, const SpacePoint& q,
                             double eps, const ScalarField& inner, double rq) {
  const double dq = q.radius;
  const double alpha = space.coneAngle;
  const double thq = q.angle;
  const double constant = -eps * sq(rq) / 4.0 + sq(dq) / 2.0;
  auto innerEval = inner.eval;
  ScalarField f;
  f.space = space;
  f.domain = Domain{q, 0.0, rq};
  f.claimedConcavity = inner.claimedConcavity.value_or(-2.0) / 2.0 + 2.0 * eps;
  f.claimedLipschitz = dq + inner.claimedLipschitz.value_or(2.0) / 2.0 +
                       2.0 * eps * rq + 1.0;
  f.provenance = {{"kind", "finalStepPatch"},
                  {"center", point_json(q)},
                  {"eps", eps},
                  {"rq", rq}};
  f.eval = [space, q, dq, alpha, thq, constant, eps, innerEval](
               const SpacePoint& x) {
    const double gap = std::min(circle_dist(x.angle, thq, alpha), kPi);
    const double buse = -x.radius * std::cos(gap);
    const double dxq = dist(space, q, x);
    return dq * buse + innerEval(x) / 2.0 + eps * dxq * dxq + constant;
  };
  return f;
}

// Rotated copies of one template per ring, dyadically rescaled across
// octaves: the data shared by the apex field evaluator.
struct ApexData {
  ModelSpace space;
  double epsP = 0.0;
  double rq = 0.0;
  double ru = 0.0;
  double ringLo = 0.0;
  double ringHi = 0.0;
  std::vector<double> rho;       // ring radii
  std::vector<int> slots;        // rotations per ring
  std::vector<ScalarField> tmpl; // template patch at angle 0 per ring

  // min over nearby (ring, rotation) templates at native radius s; +inf when
  // no patch ball contains the point.
  double band_eval(double s, double theta) const {
    const double alpha = space.coneAngle;
    double best = std::numeric_limits<double>::infinity();
    const int jc = (int)std::lround((s - rho.front()) / ru);
    const int jLo = std::max(0, jc - 6);
    const int jHi = std::min((int)rho.size() - 1, jc + 6);
    for (int j = jLo; j <= jHi; ++j) {
      const double rj = rho[(std::size_t)j];
      const double dr = s - rj;
      if (std::abs(dr) > rq) continue;
      const double dth = alpha / slots[(std::size_t)j];
      const int k0 = (int)std::lround(theta / dth);
      for (int dk = -6; dk <= 6; ++dk) {
        const int n = slots[(std::size_t)j];
        int k = (k0 + dk) % n;
        if (k < 0) k += n;
        const double gap = circle_dist(theta, k * dth, alpha);
        const double d2 = sq(dr) + 2.0 * s * rj * (1.0 - std::cos(gap));
        if (d2 > sq(rq)) continue;
        // rotate the point into the template frame
        double a = theta - k * dth;
        a = std::fmod(a, alpha);
        if (a < 0.0) a += alpha;
        const double v = tmpl[(std::size_t)j].eval(cone_point(space, s, a));
        best = std::min(best, v);
      }
    }
    return best;
  }

  double raw_eval(double r, double theta) const {
    if (r <= 0.0) return 0.0;
    // octave index with r * 2^i in [0.5, 1)
    const int i0 = -(std::ilogb(r) + 1);
    double best = std::numeric_limits<double>::infinity();
    for (int j = i0 - 1; j <= i0 + 1; ++j) {
      const double s = std::ldexp(r, j);
      if (s < ringLo + ru || s > ringHi - ru) continue;
      const double v = band_eval(s, theta);
      if (std::isfinite(v)) best = std::min(best, std::ldexp(v, -2 * j));
    }
    if (!std::isfinite(best))
      throw std::domain_error("apex field: no patch covers the point");
    return best;
  }
};

} // namespace

ScalarField f_c_field(const ModelSpace& space, double c) {
  require_cone_like(space, "f_c");
  if (c <= 0.0) throw std::invalid_argument("f_c needs c > 0");
  ScalarField f;
  f.space = space;
  f.domain = Domain{origin_of(space), 0.0, 2.0};
  f.claimedConcavity = -1.0;
  f.claimedLipschitz = 2.0 + c;
  f.provenance = {{"kind", "fc"}, {"c", c}};
  f.eval = [c](const SpacePoint& x) {
    double flat2 = 0.0;
    for (double v : x.flat) flat2 += v * v;
    return -(flat2 + sq(x.radius + c)) / 2.0;
  };
  return f;
}

ScalarField first_order_term(const ModelSpace& space, const SpacePoint& q,
                             double c, double t) {
  require_cone_like(space, "first-order term");
  check_membership(space, q);
  if (c <= 0.0) throw std::invalid_argument("first-order term needs c > 0");
  double vn = 0.0;
  for (double v : q.flat) vn += v * v;
  vn = std::sqrt(vn);
  if (vn == 0.0 && q.radius == 0.0)
    throw std::invalid_argument(
        "first-order term undefined at the apex of the model");

  std::vector<std::pair<double, ScalarField>> terms;
  if (vn > 0.0) {
    std::vector<double> dir(q.flat);
    RaySpec ray{space, origin_of(space), space.kind == SpaceKind::Product
                                             ? product_point(space, dir, 0.0, 0.0)
                                             : euclidean_point(dir)};
    terms.emplace_back(vn, t > 0.0 ? busemann_approx_field(ray, t)
                                   : busemann_field(ray));
  }
  if (q.radius > 0.0) {
    SpacePoint through =
        space.kind == SpaceKind::Product
            ? product_point(space, std::vector<double>(q.flat.size(), 0.0), 1.0,
                            q.angle)
            : cone_point(space, 1.0, q.angle);
    RaySpec ray{space, origin_of(space), through};
    terms.emplace_back(q.radius + c, t > 0.0 ? busemann_approx_field(ray, t)
                                             : busemann_field(ray));
  }
  ScalarField f = affine_combine(terms, 0.0);
  f.claimedConcavity = 0.0;
  f.claimedLipschitz = std::sqrt(sq(vn) + sq(q.radius + c));
  f.provenance = {{"kind", "firstOrder"},
                  {"center", point_json(q)},
                  {"c", c},
                  {"t", t > 0.0 ? nlohmann::json(t) : nlohmann::json("exact")},
                  {"terms", f.provenance["terms"]}};
  return f;
}

PatchSpec second_order_patch(const ModelSpace& space, const SpacePoint& q,
                             double eps, double c,
                             const ScalarField& innerField,
                             const PatchSearchOptions& opts) {
  require_cone_like(space, "second-order patch");
  check_membership(space, q);
  if (q.radius <= 0.0)
    throw std::invalid_argument("second-order patch center must be off-axis");
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("second-order patch needs eps in (0,1)");

  double vn2 = 0.0;
  for (double v : q.flat) vn2 += v * v;
  const double wr = q.radius;
  const double baseC = (vn2 + (wr + c) * wr - c * c) / 2.0;
  const ScalarField D = first_order_term(space, q, c, 0.0);
  const ScalarField fc = f_c_field(space, c);

  double r = std::min(opts.startRadius, innerField.domain.outerRadius * 0.9);
  std::string lastFailure;
  while (r >= opts.minRadius) {
    const double constant = baseC - sq(r) * eps / 9.0;
    ScalarField F = affine_combine(
        {{1.0, D}, {(1.0 - eps) / 2.0, innerField}}, constant);
    F.domain = Domain{q, 0.0, r};
    const double margin = sq(r) * eps / 18.0;
    bool ok = true;
    // outer comparison shell: F >= f_c + margin
    for (const auto& x :
         shell_samples(space, q, 2.0 * r / 3.0, r, opts.samplesPerShell,
                       mix_seed(opts.seed, 11))) {
      if (F(x) - fc(x) < margin) {
        ok = false;
        lastFailure = "outer shell comparison";
        break;
      }
    }
    // inner tenth-radius ball: F <= f_c - margin
    if (ok) {
      for (const auto& x : sample_ball(space, q, r / 10.0,
                                       opts.samplesPerShell,
                                       mix_seed(opts.seed, 12))) {
        if (fc(x) - F(x) < margin) {
          ok = false;
          lastFailure = "inner ball comparison";
          break;
        }
      }
    }
    if (ok) {
      if (F(q) >= fc(q))
        throw std::runtime_error(
            "second-order patch: center value not below the model (choose a "
            "smaller c)");
      F.claimedConcavity =
          (1.0 - eps) / 2.0 * innerField.claimedConcavity.value_or(-2.0);
      F.provenance = {{"kind", "secondOrderPatch"},
                      {"center", point_json(q)},
                      {"eps", eps},
                      {"c", c},
                      {"delta", eps / 1000.0},
                      {"rq", r},
                      {"margin", margin}};
      PatchSpec p;
      p.kind = PatchKind::secondOrder;
      p.center = q;
      p.radius = r;
      p.field = F;
      p.parameters = F.provenance;
      return p;
    }
    r /= 2.0;
  }
  throw std::runtime_error("second-order patch radius search failed below " +
                           format_double(opts.minRadius) + " (" + lastFailure +
                           ")");
}

ScalarField weak_axis_H(const ModelSpace& space, const SpacePoint& q,
                        double eps, double R, double K, double deltaNet) {
  if (space.kind != SpaceKind::Product)
    throw std::invalid_argument("weak axis term needs a product space");
  check_membership(space, q);
  if (q.radius != 0.0)
    throw std::invalid_argument("weak axis term centers on the axis");
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("weak axis term needs eps in (0,1)");
  if (deltaNet <= 0.0) deltaNet = 0.02;
  if (R <= 0.0) R = eps / 16.0;

  const int k = space.flatDim;
  const double alpha = space.coneAngle;
  const double rhoH = eps / 16.0; // effective ball of the term
  const std::vector<double>& v = q.flat;

  // flat-frame anchors translated to v
  std::vector<SpacePoint> flatAnchors;
  for (int i = 0; i < k; ++i) {
    for (double sgn : {1.0, -1.0}) {
      std::vector<double> a(v);
      a[(std::size_t)i] += sgn;
      flatAnchors.push_back(product_point(space, a, 0.0, 0.0));
    }
  }
  // direction-net anchor families on the unit circle of the cone factor
  const int nDir = std::max(3, (int)std::ceil(alpha / 0.1));
  std::vector<std::vector<SpacePoint>> netAnchors((std::size_t)nDir);
  for (int i = 0; i < nDir; ++i) {
    const double th = alpha * i / nDir;
    for (int m = -2; m <= 2; ++m) {
      double a = std::fmod(th + m * deltaNet + alpha, alpha);
      netAnchors[(std::size_t)i].push_back(product_point(space, v, 1.0, a));
    }
  }

  const auto phi = [R](double z) { return (-sq(1.0 + R - z) + sq(R)) / 2.0; };
  const auto makeEval = [space, flatAnchors, netAnchors, phi](double KK) {
    return [space, flatAnchors, netAnchors, phi, KK](const SpacePoint& x) {
      double h1 = 0.0;
      for (const auto& a : flatAnchors) h1 += phi(dist(space, a, x));
      double h2 = std::numeric_limits<double>::infinity();
      for (const auto& fam : netAnchors) {
        double g = 0.0;
        for (const auto& a : fam) g += phi(dist(space, a, x));
        h2 = std::min(h2, KK * g / fam.size());
      }
      return h1 + h2;
    };
  };

  // double K until the weak lower-decay inequality certifies
  const auto samples = sample_ball(space, q, rhoH, 2000, 9177);
  bool searched = K <= 0.0;
  if (searched) K = 1.0;
  for (;;) {
    auto eval = makeEval(K);
    bool ok = true;
    for (const auto& x : samples) {
      double df2 = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) df2 += sq(x.flat[i] - v[i]);
      if (eval(x) > -(1.0 - eps / 4.0) * df2 - (eps / 4.0) * x.radius) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    if (!searched)
      throw std::runtime_error("weak axis term: provided K fails the decay "
                               "inequality");
    K *= 2.0;
    if (K > (double)(1 << 16))
      throw std::runtime_error("weak axis term: K doubling search failed");
  }

  ScalarField f;
  f.space = space;
  f.domain = Domain{q, 0.0, rhoH};
  f.claimedLipschitz = eps;
  f.provenance = {{"kind", "weakAxisH"}, {"center", point_json(q)},
                  {"eps", eps},           {"R", R},
                  {"K", K},               {"deltaNet", deltaNet},
                  {"netDirections", nDir}};
  f.eval = makeEval(K);
  return f;
}

PatchSpec weak_axis_patch(const ModelSpace& space, const SpacePoint& q,
                          double eps, double R, double K, double deltaNet) {
  ScalarField H = weak_axis_H(space, q, eps, R, K, deltaNet);
  const double rhoH = H.domain.outerRadius;
  const double coeff = 1.0 - 0.2 * eps;
  const std::vector<double> v = q.flat;
  auto hEval = H.eval;
  const ModelSpace s = space;

  ScalarField F;
  F.space = s;
  F.domain = Domain{q, 0.0, rhoH};
  F.claimedConcavity = -2.0 + eps;
  F.claimedLipschitz = 2.0 * rhoH * coeff + eps;
  F.provenance = {{"kind", "weakAxisPatch"},
                  {"center", point_json(q)},
                  {"eps", eps},
                  {"weakTerm", H.provenance}};
  F.eval = [s, q, coeff, hEval](const SpacePoint& x) {
    const double d = dist(s, q, x);
    return -coeff * d * d + hEval(x);
  };
  PatchSpec p;
  p.kind = PatchKind::weakAxis;
  p.center = q;
  p.radius = rhoH;
  p.field = F;
  p.parameters = F.provenance;
  return p;
}

std::vector<PatchSpec> cover_annulus(
    const ModelSpace& space, double eps, double c,
    const std::function<PatchSpec(const SpacePoint&)>& patchBuilder,
    const CoverOptions& opts) {
  require_cone_like(space, "annulus cover");
  std::vector<SpacePoint> targets;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < opts.radialSamples; ++i) {
    // center first so the greedy pass prefers the nominal ring radius
    const double u = opts.radialSamples == 1
                         ? 0.0
                         : ((double)((i + 1) / 2) * ((i % 2) ? -1.0 : 1.0)) /
                               (double)(opts.radialSamples / 2);
    offsets.push_back(opts.targetRadius + u * opts.bandHalfWidth);
  }
  if (space.kind == SpaceKind::Cone) {
    for (std::size_t j = 0; j < opts.angularSamples; ++j) {
      const double th = space.coneAngle * (double)j / opts.angularSamples;
      for (double r : offsets) targets.push_back(cone_point(space, r, th));
    }
  } else {
    // product: deterministic sphere directions from the seeded ball sampler
    auto raw = sample_ball(space, origin_of(space), 1.0,
                           opts.angularSamples, 5150);
    for (const auto& p : raw) {
      const double n = origin_dist(space, p);
      if (n < 1e-6) continue;
      for (double r : offsets) targets.push_back(scale_point(space, p, r / n));
    }
  }

  std::vector<bool> covered(targets.size(), false);
  std::vector<PatchSpec> patches;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (covered[i]) continue;
    PatchSpec p = patchBuilder(targets[i]);
    if (p.radius <= 0.0)
      throw std::runtime_error("annulus cover: builder returned an empty patch");
    const double reach = p.radius / 10.0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (!covered[j] && dist(space, p.center, targets[j]) <= reach)
        covered[j] = true;
    }
    covered[i] = true;
    patches.push_back(std::move(p));
    if (patches.size() > opts.maxPatches)
      throw std::runtime_error("annulus cover: patch budget exceeded");
  }
  for (auto& p : patches) {
    p.parameters["patchCount"] = patches.size();
    p.parameters["coverEps"] = eps;
    p.parameters["coverC"] = c;
  }
  return patches;
}

ConvexityCheck region_convexity_check(const ConvexRegion& region,
                                      std::size_t samples,
                                      std::uint64_t seed) {
  ConvexityCheck out;
  const ModelSpace s = region.space;
  double maxR = region.coreRadius;
  for (const auto& b : region.boundarySamples)
    maxR = std::max(maxR, dist(s, region.coreCenter, b));
  std::vector<SpacePoint> pts;
  pts.reserve(2 * samples);
  std::uint64_t k = 0;
  while (pts.size() < 2 * samples) {
    if (k > 40 * (2 * samples) + 1000) {
      out.note = "interior sampling budget exhausted";
      return out;
    }
    auto batch =
        sample_ball(s, region.coreCenter, maxR, 16, mix_seed(seed, k++));
    for (auto& x : batch) {
      if (pts.size() >= 2 * samples) break;
      if (region.contains(x)) pts.push_back(std::move(x));
    }
  }
  for (std::size_t i = 0; i < samples; ++i) {
    const SpacePoint& x = pts[2 * i];
    const SpacePoint& y = pts[2 * i + 1];
    for (const auto& m : midpoints(s, x, y)) {
      if (!region.contains(m)) {
        out.pairCount = i;
        out.witnessX = x;
        out.witnessY = y;
        out.witnessM = m;
        out.note = "midpoint escapes the region";
        return out;
      }
    }
  }
  out.passed = true;
  out.pairCount = samples;
  return out;
}

ConvexRegion assemble_region(const ModelSpace& space,
                             const std::vector<PatchSpec>& patches, double eps,
                             const RegionOptions& opts) {
  if (patches.empty())
    throw std::invalid_argument("region assembly needs at least one patch");
  const SpacePoint center = origin_of(space);
  double ringRadius = 0.0, maxRq = 0.0;
  for (const auto& p : patches) {
    ringRadius += dist(space, center, p.center);
    maxRq = std::max(maxRq, p.radius);
  }
  ringRadius /= (double)patches.size();

  // interior extension: a slightly shallower exact paraboloid whose ball ends
  // inside the patch band, where the patches already run below it
  const double coreScale = 1.0 - 1e-5;
  ScalarField coreField;
  coreField.space = space;
  coreField.domain = Domain{center, 0.0, ringRadius};
  coreField.claimedConcavity = -coreScale;
  coreField.provenance = {{"kind", "regionCore"}, {"scale", coreScale}};
  coreField.eval = [space, center, coreScale](const SpacePoint& x) {
    const double d = dist(space, center, x);
    return -coreScale * d * d / 2.0;
  };

  std::vector<EffectiveField> members;
  members.push_back({coreField, center, ringRadius - 0.25 * maxRq});
  for (const auto& p : patches) members.push_back({p.field, p.center, p.radius});
  ScalarField F = min_fields(members);
  F.domain = Domain{center, 0.0, ringRadius + 0.6 * maxRq};
  F.claimedConcavity = -1.0 + eps;
  F.provenance = {{"kind", "regionMin"},
                  {"patchCount", patches.size()},
                  {"eps", eps},
                  {"coreScale", coreScale},
                  {"ringRadius", ringRadius}};

  ConvexRegion region;
  region.space = space;
  region.definingField = F;
  region.levelValue = -0.5;
  region.coreCenter = center;
  region.coreRadius =
      opts.coreRadius > 0.0 ? opts.coreRadius : ringRadius - 0.75 * maxRq;

  // boundary polyline by radial root finding
  const double angle = total_angle(space);
  for (std::size_t j = 0; j < opts.boundaryRays; ++j) {
    const double th = angle * (double)j / opts.boundaryRays;
    double lo = ringRadius - 0.4 * maxRq;
    double hi = ringRadius + 0.6 * maxRq;
    const auto g = [&](double r) { return F(polar_point(space, r, th)) + 0.5; };
    double gLo, gHi;
    try {
      gLo = g(lo);
      gHi = g(hi);
    } catch (const std::domain_error&) {
      throw std::runtime_error(
          "region boundary: defining field undefined on the radial bracket "
          "(region not star-shaped around the center)");
    }
    if (gLo <= 0.0 || gHi >= 0.0)
      throw std::runtime_error(
          "region boundary: level not bracketed along the ray at angle " +
          format_double(th));
    for (int it = 0; it < 60; ++it) {
      const double mid = (lo + hi) / 2.0;
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    region.boundarySamples.push_back(polar_point(space, (lo + hi) / 2.0, th));
  }

  if (opts.checkConvexity) {
    const auto check =
        region_convexity_check(region, opts.convexitySamples, opts.seed);
    if (!check.passed) {
      std::ostringstream msg;
      msg << "region convexity certificate failed after " << check.pairCount
          << " pairs: " << check.note;
      throw std::runtime_error(msg.str());
    }
  }
  return region;
}

ScalarField region_concave_dist(const ConvexRegion& region, double eps) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("region field needs eps in (0,1)");
  if (region.boundarySamples.size() < 16)
    throw std::invalid_argument("region field needs a boundary polyline");
  const ModelSpace s = region.space;
  const double alpha = total_angle(s);
  const double Reps = (1.0 + eps) / (1.0 - eps);

  // smooth radial profile: low-order Fourier fit of the boundary radii (the
  // raw polyline carries patch-scale corrugation whose curvature would
  // dominate any second-difference test)
  const std::size_t M = region.boundarySamples.size();
  std::vector<double> radii(M);
  for (std::size_t j = 0; j < M; ++j)
    radii[j] = dist(s, region.coreCenter, region.boundarySamples[j]);
  const int harmonics = 8;
  std::vector<double> ca((std::size_t)harmonics + 1, 0.0),
      sa((std::size_t)harmonics + 1, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    const double t = kTwoPi * (double)j / (double)M;
    for (int h = 0; h <= harmonics; ++h) {
      ca[(std::size_t)h] += radii[j] * std::cos(h * t);
      sa[(std::size_t)h] += radii[j] * std::sin(h * t);
    }
  }
  for (int h = 0; h <= harmonics; ++h) {
    const double w = (h == 0 ? 1.0 : 2.0) / (double)M;
    ca[(std::size_t)h] *= w;
    sa[(std::size_t)h] *= w;
  }
  const auto profile = [ca, sa, alpha, harmonics](double theta) {
    const double t = kTwoPi * theta / alpha;
    double r = ca[0];
    for (int h = 1; h <= harmonics; ++h)
      r += ca[(std::size_t)h] * std::cos(h * t) +
           sa[(std::size_t)h] * std::sin(h * t);
    return r;
  };
  double minRho = 1e300, maxRho = 0.0;
  for (int j = 0; j < 4096; ++j) {
    const double r = profile(alpha * j / 4096.0);
    minRho = std::min(minRho, r);
    maxRho = std::max(maxRho, r);
  }
  if (maxRho >= Reps)
    throw std::invalid_argument(
        "region field: boundary distance must stay below R(eps) = " +
        format_double(Reps));
  if (minRho <= 0.0)
    throw std::invalid_argument("region field: degenerate boundary profile");

  ScalarField f;
  f.space = s;
  f.domain = Domain{region.coreCenter, 0.0, minRho * 0.9999};
  f.claimedConcavity = -2.0 + eps;
  f.claimedLipschitz = 2.0 * Reps;
  f.provenance = {{"kind", "regionConcaveDist"},
                  {"eps", eps},
                  {"Reps", Reps},
                  {"harmonics", harmonics},
                  {"minRho", minRho},
                  {"maxRho", maxRho}};
  f.eval = [s, profile, Reps, minRho](const SpacePoint& x) {
    const double r = origin_dist(s, x);
    const double rho = r > 0.0 ? profile(polar_angle(s, x)) : minRho;
    const double b = rho - r;
    return -sq(Reps - b);
  };
  return f;
}

double t_correction(double eps, double kappa) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("t correction needs eps in (0,1)");
  const double Reps = (1.0 + eps) / (1.0 - eps);
  if (kappa == 0.0) return 0.0;
  const double sk = std::sqrt(std::abs(kappa));
  return sk / std::tanh(sk * Reps) - 1.0 / Reps;
}

double comparison_distance(const ComparisonConfig& config, double t) {
  if (config.kappa != 0.0)
    throw std::invalid_argument("flat comparison configuration only");
  if (config.eps <= 0.0 || config.eps >= 1.0)
    throw std::invalid_argument("comparison needs eps in (0,1)");
  const double R = (1.0 + config.eps) / (1.0 - config.eps);
  if (config.h < 0.0 || config.h > R)
    throw std::invalid_argument("comparison needs h in [0, R(eps)]");
  const double x = t * std::sin(config.alphaAngle);
  const double y = R - config.h - t * std::cos(config.alphaAngle);
  return R - std::hypot(x, y);
}

PatchSpec final_step_patch(const ModelSpace& space, const SpacePoint& q,
                           double eps, const ScalarField& innerField,
                           const PatchSearchOptions& opts) {
  if (space.kind != SpaceKind::Cone)
    throw std::invalid_argument("final-step patch needs a cone");
  check_membership(space, q);
  if (q.radius <= 0.0)
    throw std::invalid_argument("final-step patch center must not be the apex");
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("final-step patch needs eps in (0,1)");

  double r = std::min(opts.startRadius, innerField.domain.outerRadius * 0.9);
  std::string lastFailure;
  while (r >= opts.minRadius) {
    ScalarField F = make_final_field(space, q, eps, innerField, r);
    const double margin = sq(r) * eps / 18.0;
    const auto target = [](const SpacePoint& x) {
      return -x.radius * x.radius / 2.0;
    };
    bool ok = true;
    for (const auto& x :
         shell_samples(space, q, 2.0 * r / 3.0, r, opts.samplesPerShell,
                       mix_seed(opts.seed, 21))) {
      if (F(x) - target(x) < margin) {
        ok = false;
        lastFailure = "outer shell comparison";
        break;
      }
    }
    if (ok) {
      for (const auto& x : sample_ball(space, q, r / 10.0,
                                       opts.samplesPerShell,
                                       mix_seed(opts.seed, 22))) {
        if (F(x) > target(x)) {
          ok = false;
          lastFailure = "inner ball comparison";
          break;
        }
      }
    }
    if (ok) {
      PatchSpec p;
      p.kind = PatchKind::finalStep;
      p.center = q;
      p.radius = r;
      p.field = F;
      p.parameters = F.provenance;
      return p;
    }
    r /= 2.0;
  }
  throw std::runtime_error("final-step patch radius search failed below " +
                           format_double(opts.minRadius) + " (" + lastFailure +
                           ")");
}

RegionPipelineResult region_pipeline(const ModelSpace& space, double eps,
                                     const RegionOptions& opts) {
  if (space.kind != SpaceKind::Cone)
    throw std::invalid_argument("region pipeline needs a cone");
  if (eps <= 0.0 || eps > 0.5)
    throw std::invalid_argument("region pipeline needs eps in (0, 1/2]");

  const double epsP = eps / 5.0;  // patch accuracy
  const double modelR = eps / 2.0; // strainer parameter of the patch lifts
  const double rLift = 0.45;       // anchor distance of the patch lifts

  std::uint64_t counter = 0;
  auto builder = [&](const SpacePoint& q) {
    ScalarField inner = lift_mu(space, q, rLift, modelR);
    PatchSearchOptions so;
    so.startRadius = inner.domain.outerRadius * 0.9;
    so.samplesPerShell = 400;
    so.seed = mix_seed(opts.seed, 1000 + counter++);
    return final_step_patch(space, q, epsP, inner, so);
  };

  CoverOptions cov;
  cov.targetRadius = 1.0;
  cov.bandHalfWidth = 5e-4;
  cov.angularSamples = 8192;
  cov.radialSamples = 3;
  RegionPipelineResult out;
  out.patches = cover_annulus(space, eps, eps, builder, cov);
  out.region = assemble_region(space, out.patches, eps, opts);
  return out;
}

ScalarField apex_theorem_b(const ModelSpace& space, double eps) {
  if (space.kind != SpaceKind::Cone)
    throw std::invalid_argument("apex construction needs a cone");
  if (eps <= 0.0 || eps > 0.5)
    throw std::invalid_argument("apex construction needs eps in (0, 1/2]");

  auto data = std::make_shared<ApexData>();
  data->space = space;
  data->epsP = eps / 10.0;
  const double modelR = eps / 5.0;
  const double rLift = 0.22;
  data->rq = modelR * rLift;
  data->ru = 0.18 * data->rq;
  data->ringLo = 0.5 - 2.0 * data->rq;
  data->ringHi = 1.0 + 2.0 * data->rq;
  const int nRings =
      (int)std::ceil((data->ringHi - data->ringLo) / data->ru) + 1;
  for (int j = 0; j < nRings; ++j) {
    const double rho = data->ringLo + j * data->ru;
    const SpacePoint q = cone_point(space, rho, 0.0);
    ScalarField inner = lift_mu(space, q, rLift, modelR);
    data->rho.push_back(rho);
    data->slots.push_back(
        std::max(8, (int)std::ceil(space.coneAngle * rho / data->ru)));
    data->tmpl.push_back(make_final_field(space, q, data->epsP, inner,
                                          data->rq));
  }

  // sandwich calibration: measure the worst relative dip of the raw minimum
  // below -r^2/2 over one octave (deeper octaves are exact rescaled copies)
  double worst = 0.0;
  const int nS = 1875, nT = 100;
  const double thetaSpan = 25.0 * data->ru;
  for (int a = 0; a < nS; ++a) {
    const double s = 0.5 + 0.5 * (a + 0.5) / nS;
    for (int b = 0; b < nT; ++b) {
      const double th = thetaSpan * (b + 0.5) / nT;
      const double v = data->raw_eval(s, th);
      worst = std::max(worst, -2.0 * v / (s * s) - 1.0);
    }
  }
  const double calibration = 1.0 + worst * 1.25 + 1e-12;

  ScalarField f;
  f.space = space;
  f.domain = Domain{origin_of(space), 0.0, 1.0};
  f.claimedConcavity = -2.0 + 2.0 * modelR + 4.0 * data->epsP;
  f.claimedLipschitz = 2.0 + eps;
  f.provenance = {{"kind", "apexFinalStep"},
                  {"eps", eps},
                  {"rings", nRings},
                  {"rq", data->rq},
                  {"ru", data->ru},
                  {"calibration", calibration}};
  f.eval = [data, calibration](const SpacePoint& x) {
    return 2.0 * data->raw_eval(x.radius, x.angle) / calibration;
  };
  return f;
}

} // namespace ck
