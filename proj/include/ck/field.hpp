#pragma once

#include "ck/geometry.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <utility>

// Algebra of scalar fields on model spaces: distance and Busemann fields,
// affine combinations, pointwise minima over effective balls, composition
// with C^2 reparametrizations, metric-rescaling pullbacks, and the
// distance-to-region-boundary field.

namespace ck {

struct Domain {
  SpacePoint center;
  double innerRadius = 0.0;
  double outerRadius = 0.0;
};

struct ScalarField {
  ModelSpace space;
  std::function<double(const SpacePoint&)> eval;
  Domain domain;
  std::optional<double> claimedConcavity;
  std::optional<double> claimedLipschitz;
  nlohmann::json provenance; // construction tree
  bool certified = false;

  double operator()(const SpacePoint& x) const { return eval(x); }
};

// Ray from basePoint through throughPoint, extendable for all t >= 0 when the
// base is a cone apex or the ray lies in a Euclidean factor.
struct RaySpec {
  ModelSpace space;
  SpacePoint basePoint;
  SpacePoint throughPoint;
};

// Point at arclength t >= 0 along the ray.
SpacePoint ray_point(const RaySpec& ray, double t);

struct ConvexRegion {
  ModelSpace space;
  ScalarField definingField;
  double levelValue = 0.0;
  SpacePoint coreCenter;
  double coreRadius = 0.0;
  std::vector<SpacePoint> boundarySamples; // ordered polyline on the level set

  bool contains(const SpacePoint& x) const;
};

// A real function with first and second derivatives and range bounds for the
// derivatives (used in concavity bookkeeping for compositions).
struct RealC2 {
  std::function<double(double)> f;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  double d1min = 0.0, d1max = 0.0;
  double d2min = 0.0, d2max = 0.0;
};

ScalarField dist_field(const ModelSpace& space, const SpacePoint& p);

// Exact closed-form Busemann function of the ray (limit of dist_{ray(t)} - t).
ScalarField busemann_field(const RaySpec& ray);

// Finite-t approximant dist_{ray(t)}(x) - t.
ScalarField busemann_approx_field(const RaySpec& ray, double t);

ScalarField affine_combine(
    const std::vector<std::pair<double, ScalarField>>& coeffs, double constant);

// Pointwise minimum over fields, each active only inside its effective ball.
// Evaluation outside every effective ball is a domain error; the concavity
// claim is recorded pending a certificate.
struct EffectiveField {
  ScalarField field;
  SpacePoint ballCenter;
  double ballRadius = 0.0;
};

ScalarField min_fields(const std::vector<EffectiveField>& fields);

ScalarField compose_real(const ScalarField& field, const RealC2& phi,
                         const nlohmann::json& phiDescription);

// Field read in the metric rescaled by `scale`: eval'(x) = scale^2 * eval(x),
// domain radii multiplied by scale; concavity constant is scale-invariant.
ScalarField rescale_pullback(const ScalarField& field, double scale);

// Distance to the region boundary, from the sample polyline with local
// refinement along adjacent segments.
ScalarField boundary_dist_field(const ConvexRegion& region);

nlohmann::json point_json(const SpacePoint& p);
nlohmann::json domain_json(const Domain& d);

} // namespace ck
