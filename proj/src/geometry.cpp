#include "ck/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace ck {

namespace {

constexpr double kApexTol = 0.0;

double sq(double v) { return v * v; }

double flat_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += sq(a[i] - b[i]);
  return std::sqrt(s);
}

// Signed angular step from x.angle to y.angle along the tie-break branch.
// Returns the gap magnitude and direction (+1 increasing angle).
struct AngularBranch {
  double gap = 0.0;
  double sign = 1.0;
};

AngularBranch primary_branch(double thetaX, double thetaY, double alpha) {
  double d = std::fmod(thetaY - thetaX, alpha);
  if (d < 0) d += alpha;
  const double dPlus = d;
  const double dMinus = alpha - d;
  AngularBranch b;
  if (dPlus <= dMinus) {
    b.gap = dPlus;
    b.sign = 1.0;
  } else {
    b.gap = dMinus;
    b.sign = -1.0;
  }
  return b;
}

bool branch_tie(double thetaX, double thetaY, double alpha) {
  double d = std::fmod(thetaY - thetaX, alpha);
  if (d < 0) d += alpha;
  return std::abs(d - (alpha - d)) <= 1e-12 * alpha && d > 0.0;
}

double cone_dist(double r1, double t1, double r2, double t2, double alpha) {
  if (r1 <= kApexTol) return r2;
  if (r2 <= kApexTol) return r1;
  const double s = circle_dist(t1, t2, alpha);
  if (s >= kPi) return r1 + r2;
  return std::sqrt(std::max(0.0, r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * std::cos(s)));
}

// Planar development of the cone pair (x, y) along a chosen branch:
// x maps to (rx, 0), y to (ry cos g, ry sin g). Points on the development
// segment map back via theta = thetaX + sign * phi.
struct Development {
  double rx, ry, gap, sign, thetaX;
  double alpha;

  std::array<double, 2> devX() const { return {rx, 0.0}; }
  std::array<double, 2> devY() const {
    return {ry * std::cos(gap), ry * std::sin(gap)};
  }
  SpacePoint fromPlanar(const ModelSpace& coneSpace, double px, double py) const {
    const double r = std::hypot(px, py);
    if (r == 0.0) return cone_point(coneSpace, 0.0, 0.0);
    double phi = std::atan2(py, px);
    return cone_point(coneSpace, r, thetaX + sign * phi);
  }
};

Development develop(const SpacePoint& x, const SpacePoint& y, double alpha,
                    double signOverride) {
  Development d;
  d.rx = x.radius;
  d.ry = y.radius;
  d.thetaX = x.angle;
  d.alpha = alpha;
  if (x.radius <= kApexTol || y.radius <= kApexTol) {
    d.gap = 0.0;
    d.sign = 1.0;
    if (x.radius <= kApexTol) d.thetaX = y.angle; // x at origin, y on axis
    return d;
  }
  AngularBranch b = primary_branch(x.angle, y.angle, alpha);
  d.gap = b.gap;
  d.sign = (signOverride != 0.0) ? signOverride : b.sign;
  if (signOverride != 0.0 && signOverride != b.sign) {
    // opposite unrolling
    double dd = std::fmod(y.angle - x.angle, alpha);
    if (dd < 0) dd += alpha;
    d.gap = (signOverride > 0.0) ? dd : alpha - dd;
  }
  return d;
}

SpacePoint cone_geodesic(const ModelSpace& space, const SpacePoint& x,
                         const SpacePoint& y, double t, double signOverride) {
  const double alpha = space.coneAngle;
  const double total = cone_dist(x.radius, x.angle, y.radius, y.angle, alpha);
  if (total == 0.0) return x;
  if (x.radius <= kApexTol)
    return cone_point(space, t * y.radius, y.angle);
  if (y.radius <= kApexTol)
    return cone_point(space, (1.0 - t) * x.radius, x.angle);
  const double s = circle_dist(x.angle, y.angle, alpha);
  if (s >= kPi) {
    // through the apex
    const double a = t * total;
    if (a <= x.radius) return cone_point(space, x.radius - a, x.angle);
    return cone_point(space, a - x.radius, y.angle);
  }
  Development d = develop(x, y, alpha, signOverride);
  const auto X = d.devX();
  const auto Y = d.devY();
  const double px = X[0] + t * (Y[0] - X[0]);
  const double py = X[1] + t * (Y[1] - X[1]);
  return d.fromPlanar(space, px, py);
}

void split_product(const ModelSpace& space, const SpacePoint& p,
                   SpacePoint& flatPart, SpacePoint& conePart) {
  flatPart.flat = p.flat;
  conePart.radius = p.radius;
  conePart.angle = p.angle;
  (void)space;
}

std::mt19937_64 seeded_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

} // namespace

ModelSpace ModelSpace::euclidean(int n) {
  if (n < 1) throw std::invalid_argument("euclidean dimension must be >= 1");
  ModelSpace s;
  s.kind = SpaceKind::Euclidean;
  s.flatDim = n;
  return s;
}

ModelSpace ModelSpace::cone(double alpha) {
  if (!(alpha > 0.0 && alpha <= kTwoPi + 1e-15))
    throw std::invalid_argument("cone angle must lie in (0, 2pi]");
  ModelSpace s;
  s.kind = SpaceKind::Cone;
  s.coneAngle = std::min(alpha, kTwoPi);
  return s;
}

ModelSpace ModelSpace::product(int k, double alpha) {
  if (k < 1) throw std::invalid_argument("product flat dimension must be >= 1");
  ModelSpace s = cone(alpha);
  s.kind = SpaceKind::Product;
  s.flatDim = k;
  return s;
}

int ModelSpace::dimension() const {
  switch (kind) {
    case SpaceKind::Euclidean: return flatDim;
    case SpaceKind::Cone: return 2;
    case SpaceKind::Product: return flatDim + 2;
  }
  return 0;
}

bool ModelSpace::operator==(const ModelSpace& o) const {
  return kind == o.kind && flatDim == o.flatDim && coneAngle == o.coneAngle;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string ModelSpace::describe() const {
  switch (kind) {
    case SpaceKind::Euclidean: return "euclidean:" + std::to_string(flatDim);
    case SpaceKind::Cone: return "cone:" + format_double(coneAngle);
    case SpaceKind::Product:
      return "product:" + std::to_string(flatDim) + ":cone:" +
             format_double(coneAngle);
  }
  return {};
}

SpacePoint euclidean_point(std::vector<double> coords) {
  SpacePoint p;
  p.flat = std::move(coords);
  return p;
}

SpacePoint cone_point(const ModelSpace& space, double radius, double angle) {
  if (radius < 0.0) throw std::invalid_argument("cone radius must be >= 0");
  SpacePoint p;
  p.radius = radius;
  if (radius == 0.0) {
    p.angle = 0.0;
    return p;
  }
  double a = std::fmod(angle, space.coneAngle);
  if (a < 0) a += space.coneAngle;
  if (a == space.coneAngle) a = 0.0;
  p.angle = a;
  return p;
}

SpacePoint product_point(const ModelSpace& space, std::vector<double> flat,
                         double radius, double angle) {
  SpacePoint p = cone_point(space, radius, angle);
  p.flat = std::move(flat);
  return p;
}

SpacePoint origin_of(const ModelSpace& space) {
  SpacePoint p;
  if (space.kind != SpaceKind::Cone)
    p.flat.assign(static_cast<std::size_t>(space.flatDim), 0.0);
  return p;
}

void check_membership(const ModelSpace& space, const SpacePoint& p) {
  const std::size_t wantFlat =
      space.kind == SpaceKind::Cone ? 0u
                                    : static_cast<std::size_t>(space.flatDim);
  if (p.flat.size() != wantFlat)
    throw std::invalid_argument("space tag mismatch: flat dimension " +
                                std::to_string(p.flat.size()) + " vs " +
                                std::to_string(wantFlat));
  if (space.kind == SpaceKind::Euclidean &&
      (p.radius != 0.0 || p.angle != 0.0))
    throw std::invalid_argument("space tag mismatch: cone coordinates on a "
                                "Euclidean point");
  if (p.radius < 0.0) throw std::invalid_argument("negative cone radius");
}

double circle_dist(double a, double b, double length) {
  double d = std::fmod(std::abs(a - b), length);
  return std::min(d, length - d);
}

double dist(const ModelSpace& space, const SpacePoint& x, const SpacePoint& y) {
  check_membership(space, x);
  check_membership(space, y);
  switch (space.kind) {
    case SpaceKind::Euclidean:
      return flat_dist(x.flat, y.flat);
    case SpaceKind::Cone:
      return cone_dist(x.radius, x.angle, y.radius, y.angle, space.coneAngle);
    case SpaceKind::Product: {
      const double df = flat_dist(x.flat, y.flat);
      const double dc =
          cone_dist(x.radius, x.angle, y.radius, y.angle, space.coneAngle);
      return std::hypot(df, dc);
    }
  }
  return 0.0;
}

SpacePoint geodesic(const ModelSpace& space, const SpacePoint& x,
                    const SpacePoint& y, double t) {
  check_membership(space, x);
  check_membership(space, y);
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      SpacePoint m;
      m.flat.resize(x.flat.size());
      for (std::size_t i = 0; i < x.flat.size(); ++i)
        m.flat[i] = x.flat[i] + t * (y.flat[i] - x.flat[i]);
      return m;
    }
    case SpaceKind::Cone:
      return cone_geodesic(space, x, y, t, 0.0);
    case SpaceKind::Product: {
      SpacePoint fx, cx, fy, cy;
      split_product(space, x, fx, cx);
      split_product(space, y, fy, cy);
      const ModelSpace coneOnly = ModelSpace::cone(space.coneAngle);
      SpacePoint cm = cone_geodesic(coneOnly, cx, cy, t, 0.0);
      SpacePoint m;
      m.flat.resize(x.flat.size());
      for (std::size_t i = 0; i < x.flat.size(); ++i)
        m.flat[i] = x.flat[i] + t * (y.flat[i] - x.flat[i]);
      m.radius = cm.radius;
      m.angle = cm.angle;
      return m;
    }
  }
  return x;
}

std::vector<SpacePoint> midpoints(const ModelSpace& space, const SpacePoint& x,
                                  const SpacePoint& y) {
  std::vector<SpacePoint> out;
  out.push_back(geodesic(space, x, y, 0.5));
  const bool coneLike = space.kind != SpaceKind::Euclidean;
  if (coneLike && x.radius > 0.0 && y.radius > 0.0 &&
      branch_tie(x.angle, y.angle, space.coneAngle) &&
      circle_dist(x.angle, y.angle, space.coneAngle) < kPi) {
    AngularBranch b = primary_branch(x.angle, y.angle, space.coneAngle);
    const ModelSpace coneOnly = space.kind == SpaceKind::Cone
                                    ? space
                                    : ModelSpace::cone(space.coneAngle);
    SpacePoint cx = space.kind == SpaceKind::Cone
                        ? x
                        : cone_point(coneOnly, x.radius, x.angle);
    SpacePoint cy = space.kind == SpaceKind::Cone
                        ? y
                        : cone_point(coneOnly, y.radius, y.angle);
    SpacePoint alt = cone_geodesic(coneOnly, cx, cy, 0.5, -b.sign);
    SpacePoint m2 = out.front();
    m2.radius = alt.radius;
    m2.angle = alt.angle;
    const ModelSpace coneCheck =
        space.kind == SpaceKind::Cone ? space : coneOnly;
    if (cone_dist(out.front().radius, out.front().angle, m2.radius, m2.angle,
                  coneCheck.coneAngle) > 1e-12)
      out.push_back(m2);
  }
  return out;
}

double angle(const ModelSpace& space, const SpacePoint& vertex,
             const SpacePoint& a, const SpacePoint& b) {
  check_membership(space, vertex);
  check_membership(space, a);
  check_membership(space, b);
  if (dist(space, vertex, a) == 0.0 || dist(space, vertex, b) == 0.0)
    throw std::domain_error("angle endpoint coincides with vertex");
  auto planarAngle = [](const std::vector<double>& u,
                        const std::vector<double>& v) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      dot += u[i] * v[i];
      nu += u[i] * u[i];
      nv += v[i] * v[i];
    }
    double c = dot / std::sqrt(nu * nv);
    return std::acos(std::clamp(c, -1.0, 1.0));
  };
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      std::vector<double> u(a.flat.size()), v(b.flat.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = a.flat[i] - vertex.flat[i];
        v[i] = b.flat[i] - vertex.flat[i];
      }
      return planarAngle(u, v);
    }
    case SpaceKind::Cone: {
      if (vertex.radius <= kApexTol)
        return std::min(circle_dist(a.angle, b.angle, space.coneAngle), kPi);
      Development da = develop(vertex, a, space.coneAngle, 0.0);
      Development db = develop(vertex, b, space.coneAngle, 0.0);
      const auto A = da.devY();
      const auto B = db.devY();
      std::vector<double> u{A[0] - vertex.radius, da.sign * A[1]};
      std::vector<double> v{B[0] - vertex.radius, db.sign * B[1]};
      return planarAngle(u, v);
    }
    case SpaceKind::Product: {
      if (vertex.radius <= kApexTol)
        throw std::domain_error(
            "angle at a product axis point is not supported");
      TangentChart ch = tangent_cone(space, vertex);
      SpacePoint la = ch.log(a);
      SpacePoint lb = ch.log(b);
      return planarAngle(la.flat, lb.flat);
    }
  }
  return 0.0;
}

TangentChart tangent_cone(const ModelSpace& space, const SpacePoint& p) {
  check_membership(space, p);
  TangentChart ch;
  const double inf = 1e300;
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      ch.tangent = space;
      ch.injectivityRadius = inf;
      ch.log = [p](const SpacePoint& x) {
        SpacePoint v;
        v.flat.resize(x.flat.size());
        for (std::size_t i = 0; i < x.flat.size(); ++i)
          v.flat[i] = x.flat[i] - p.flat[i];
        return v;
      };
      ch.exp = [p](const SpacePoint& v) {
        SpacePoint x;
        x.flat.resize(v.flat.size());
        for (std::size_t i = 0; i < v.flat.size(); ++i)
          x.flat[i] = p.flat[i] + v.flat[i];
        return x;
      };
      return ch;
    }
    case SpaceKind::Cone: {
      if (p.radius <= kApexTol) {
        ch.tangent = space;
        ch.injectivityRadius = inf;
        ch.log = [](const SpacePoint& x) { return x; };
        ch.exp = [](const SpacePoint& v) { return v; };
        return ch;
      }
      ch.tangent = ModelSpace::euclidean(2);
      ch.injectivityRadius = p.radius;
      const ModelSpace sp = space;
      const SpacePoint base = p;
      ch.log = [sp, base](const SpacePoint& x) {
        Development d = develop(base, x, sp.coneAngle, 0.0);
        const auto X = d.devY();
        return euclidean_point({X[0] - base.radius, d.sign * X[1]});
      };
      const double inj = ch.injectivityRadius;
      ch.exp = [sp, base, inj](const SpacePoint& v) {
        const double n = std::hypot(v.flat[0], v.flat[1]);
        if (n >= inj)
          throw std::domain_error("exp outside the injectivity ball");
        const double px = base.radius + v.flat[0];
        const double py = v.flat[1];
        const double r = std::hypot(px, py);
        const double phi = std::atan2(py, px);
        return cone_point(sp, r, base.angle + phi);
      };
      return ch;
    }
    case SpaceKind::Product: {
      const ModelSpace coneOnly = ModelSpace::cone(space.coneAngle);
      SpacePoint conePart = cone_point(coneOnly, p.radius, p.angle);
      TangentChart coneCh = tangent_cone(coneOnly, conePart);
      const bool atAxis = p.radius <= kApexTol;
      ch.tangent = atAxis ? ModelSpace::product(space.flatDim, space.coneAngle)
                          : ModelSpace::euclidean(space.flatDim + 2);
      ch.injectivityRadius = coneCh.injectivityRadius;
      const ModelSpace sp = space;
      const SpacePoint base = p;
      const ModelSpace co = coneOnly;
      ch.log = [sp, base, coneCh, atAxis, co](const SpacePoint& x) {
        SpacePoint coneX = cone_point(co, x.radius, x.angle);
        SpacePoint cv = coneCh.log(coneX);
        SpacePoint v;
        v.flat.resize(x.flat.size());
        for (std::size_t i = 0; i < x.flat.size(); ++i)
          v.flat[i] = x.flat[i] - base.flat[i];
        if (atAxis) {
          v.radius = cv.radius;
          v.angle = cv.angle;
        } else {
          v.flat.push_back(cv.flat[0]);
          v.flat.push_back(cv.flat[1]);
        }
        return v;
      };
      const int k = space.flatDim;
      ch.exp = [sp, base, coneCh, atAxis, k](const SpacePoint& v) {
        SpacePoint cv;
        if (atAxis) {
          cv.radius = v.radius;
          cv.angle = v.angle;
        } else {
          cv.flat = {v.flat[static_cast<std::size_t>(k)],
                     v.flat[static_cast<std::size_t>(k) + 1]};
        }
        SpacePoint coneX = coneCh.exp(cv);
        SpacePoint x;
        x.flat.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
          x.flat[static_cast<std::size_t>(i)] =
              base.flat[static_cast<std::size_t>(i)] +
              v.flat[static_cast<std::size_t>(i)];
        x.radius = coneX.radius;
        x.angle = coneX.angle;
        return x;
      };
      return ch;
    }
  }
  return ch;
}

SpacePoint extend_ray(const ModelSpace& space, const SpacePoint& p,
                      const SpacePoint& dir, double length) {
  check_membership(space, p);
  if (length < 0.0) throw std::invalid_argument("ray length must be >= 0");
  switch (space.kind) {
    case SpaceKind::Euclidean: {
      double n = 0.0;
      for (double c : dir.flat) n += c * c;
      n = std::sqrt(n);
      if (n == 0.0) throw std::invalid_argument("zero ray direction");
      SpacePoint x = p;
      for (std::size_t i = 0; i < x.flat.size(); ++i)
        x.flat[i] += length * dir.flat[i] / n;
      return x;
    }
    case SpaceKind::Cone: {
      if (p.radius <= kApexTol) {
        // tangent at the apex is the cone itself; dir carries (radius, angle)
        return cone_point(space, length, dir.angle);
      }
      const double n = std::hypot(dir.flat[0], dir.flat[1]);
      if (n == 0.0) throw std::invalid_argument("zero ray direction");
      const double px = p.radius + length * dir.flat[0] / n;
      const double py = length * dir.flat[1] / n;
      const double r = std::hypot(px, py);
      const double phi = std::atan2(py, px);
      // The development stays a geodesic while the subtended apex angle
      // remains below the cone angle.
      if (std::abs(phi) >= space.coneAngle && space.coneAngle < kPi)
        throw std::domain_error("ray development leaves the cone sector");
      return cone_point(space, r, p.angle + phi);
    }
    case SpaceKind::Product: {
      const int k = space.flatDim;
      double nf = 0.0;
      for (int i = 0; i < k; ++i)
        nf += sq(dir.flat[static_cast<std::size_t>(i)]);
      SpacePoint coneDir;
      double nc = 0.0;
      const ModelSpace coneOnly = ModelSpace::cone(space.coneAngle);
      const bool atAxis = p.radius <= kApexTol;
      if (atAxis) {
        coneDir.radius = dir.radius;
        coneDir.angle = dir.angle;
        nc = dir.radius;
      } else {
        coneDir.flat = {dir.flat[static_cast<std::size_t>(k)],
                        dir.flat[static_cast<std::size_t>(k) + 1]};
        nc = std::hypot(coneDir.flat[0], coneDir.flat[1]);
      }
      const double n = std::sqrt(nf + nc * nc);
      if (n == 0.0) throw std::invalid_argument("zero ray direction");
      SpacePoint x;
      x.flat.resize(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i)
        x.flat[static_cast<std::size_t>(i)] =
            p.flat[static_cast<std::size_t>(i)] +
            length * dir.flat[static_cast<std::size_t>(i)] / n;
      SpacePoint coneBase = cone_point(coneOnly, p.radius, p.angle);
      SpacePoint coneEnd = coneBase;
      if (nc > 0.0) {
        SpacePoint scaled = coneDir;
        coneEnd = extend_ray(coneOnly, coneBase, scaled, length * nc / n);
      }
      x.radius = coneEnd.radius;
      x.angle = coneEnd.angle;
      return x;
    }
  }
  return p;
}

GhApprox gh_cone_approx(double alphaSource, double alphaTarget) {
  GhApprox g;
  g.source = ModelSpace::cone(alphaSource);
  g.target = ModelSpace::cone(alphaTarget);
  const ModelSpace target = g.target;
  const double ratio = alphaTarget / alphaSource;
  g.pointMap = [target, ratio](const SpacePoint& p) {
    return cone_point(target, p.radius, p.angle * ratio);
  };
  if (alphaSource == alphaTarget) {
    g.distortionBound = 0.0;
    return g;
  }
  // deterministic grid in B_2(apex)
  const int nr = 12, nt = 48;
  std::vector<SpacePoint> grid;
  grid.push_back(origin_of(g.source));
  for (int i = 1; i <= nr; ++i)
    for (int j = 0; j < nt; ++j)
      grid.push_back(cone_point(g.source, 2.0 * i / nr,
                                alphaSource * j / nt));
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double d0 = dist(g.source, grid[i], grid[j]);
      const double d1 = dist(g.target, g.pointMap(grid[i]), g.pointMap(grid[j]));
      worst = std::max(worst, std::abs(d1 - d0));
    }
  // grid sup plus modulus-of-continuity headroom for off-grid pairs
  g.distortionBound = worst * 1.05 + 4.0 * std::abs(alphaTarget - alphaSource) / nt;
  return g;
}

std::vector<SpacePoint> sample_ball(const ModelSpace& space,
                                    const SpacePoint& center, double radius,
                                    std::size_t count, std::uint64_t seed) {
  check_membership(space, center);
  if (radius <= 0.0) throw std::invalid_argument("radius must be > 0");
  auto rng = seeded_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SpacePoint> out;
  out.reserve(count);

  auto flatBall = [&](const std::vector<double>& c, double rad) {
    const std::size_t n = c.size();
    std::vector<double> v(n);
    double norm = 0.0;
    for (auto& vi : v) {
      vi = gauss(rng);
      norm += vi * vi;
    }
    norm = std::sqrt(norm);
    const double r = rad * std::pow(unit(rng), 1.0 / static_cast<double>(n));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = c[i] + (norm > 0 ? r * v[i] / norm : 0.0);
    return x;
  };

  auto coneBallOnce = [&](double cr, double ca, double rad, SpacePoint& p,
                          const ModelSpace& coneSpace) {
    const double rMin = std::max(0.0, cr - rad);
    const double rMax = cr + rad;
    // any point of the ball at radius r from the apex has angular gap at
    // most asin(rad / rMin) when the ball misses the apex; restricting the
    // angular proposal keeps the rejection rate bounded for far centers
    double halfWin = coneSpace.coneAngle / 2;
    if (rMin > 0.0 && rad < rMin)
      halfWin = std::min(halfWin, std::asin(rad / rMin) * 1.0000001);
    // area-weighted radius, windowed angle; rejection against the ball
    for (int tries = 0; tries < 4096; ++tries) {
      const double r2 = rMin * rMin + unit(rng) * (rMax * rMax - rMin * rMin);
      const double r = std::sqrt(r2);
      double th =
          std::fmod(ca + (2.0 * unit(rng) - 1.0) * halfWin +
                        coneSpace.coneAngle,
                    coneSpace.coneAngle);
      if (cone_dist(cr, ca, r, th, coneSpace.coneAngle) <= rad) {
        p = cone_point(coneSpace, r, th);
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < count; ++i) {
    switch (space.kind) {
      case SpaceKind::Euclidean:
        out.push_back(euclidean_point(flatBall(center.flat, radius)));
        break;
      case SpaceKind::Cone: {
        SpacePoint p;
        if (!coneBallOnce(center.radius, center.angle, radius, p, space))
          throw std::runtime_error("cone ball sampling failed");
        out.push_back(p);
        break;
      }
      case SpaceKind::Product: {
        const ModelSpace coneOnly = ModelSpace::cone(space.coneAngle);
        for (int tries = 0;; ++tries) {
          if (tries >= 4096)
            throw std::runtime_error("product ball sampling failed");
          std::vector<double> f = flatBall(center.flat, radius);
          SpacePoint c;
          if (!coneBallOnce(center.radius, center.angle, radius, c, coneOnly))
            continue;
          SpacePoint p;
          p.flat = std::move(f);
          p.radius = c.radius;
          p.angle = c.angle;
          if (dist(space, center, p) <= radius) {
            out.push_back(p);
            break;
          }
        }
        break;
      }
    }
  }
  return out;
}

DirectionSpace DirectionSpace::circle(double length) {
  if (!(length > 0.0 && length <= kTwoPi + 1e-15))
    throw std::invalid_argument("circle length must lie in (0, 2pi]");
  DirectionSpace s;
  s.kind = Kind::Circle;
  s.length = std::min(length, kTwoPi);
  return s;
}

DirectionSpace DirectionSpace::unitSphere(int dim) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("sphere dimension must be 1 or 2");
  DirectionSpace s;
  s.kind = Kind::UnitSphere;
  s.dim = dim;
  return s;
}

double direction_dist(const DirectionSpace& sigma, const Direction& a,
                      const Direction& b) {
  if (sigma.kind == DirectionSpace::Kind::Circle)
    return circle_dist(a.angle, b.angle, sigma.length);
  double dot = 0.0;
  const int comps = sigma.dim + 1;
  for (int i = 0; i < comps; ++i)
    dot += a.vec[static_cast<std::size_t>(i)] * b.vec[static_cast<std::size_t>(i)];
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

ModelSpace parse_space(const std::string& spec) {
  auto fail = [&]() -> ModelSpace {
    throw std::invalid_argument("bad space spec: " + spec);
  };
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  try {
    if (parts.size() == 2 && parts[0] == "euclidean")
      return ModelSpace::euclidean(std::stoi(parts[1]));
    if (parts.size() == 2 && parts[0] == "cone")
      return ModelSpace::cone(std::stod(parts[1]));
    if (parts.size() == 4 && parts[0] == "product" && parts[2] == "cone")
      return ModelSpace::product(std::stoi(parts[1]), std::stod(parts[3]));
  } catch (const std::invalid_argument&) {
    return fail();
  } catch (const std::out_of_range&) {
    return fail();
  }
  return fail();
}

} // namespace ck
