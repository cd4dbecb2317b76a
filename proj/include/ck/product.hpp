#pragma once

#include "ck/construct.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

// Patch constructions around the singular locus: the comparison model field
// f_c, first/second-order patches, weak axis patches, annulus covering,
// convex-region assembly with its boundary-distance field, the comparison
// distance oracle, and the final-step pipeline that produces a strictly
// concave field centered at a cone apex.

namespace ck {

enum class PatchKind { secondOrder, weakAxis, finalStep };

struct PatchSpec {
  PatchKind kind = PatchKind::finalStep;
  SpacePoint center;
  double radius = 0.0; // r_q: the effective ball of the patch
  ScalarField field;
  nlohmann::json parameters;
};

// Model comparison field on Product(k, alpha) (or Cone(alpha), k = 0):
// f_c(x, y) = -(|x|^2 + (|o_b y| + c)^2) / 2, c > 0.
ScalarField f_c_field(const ModelSpace& space, double c);

// First-order model term at q = (v, w):
// D = |v| B_1 + (|o_b w| + c) B_2 with B_1, B_2 the factor Busemann fields
// through q. t <= 0 requests the exact Busemann limit; finite t > 0 uses the
// approximant dist_{ray(t)} - t with the additive constants recorded.
ScalarField first_order_term(const ModelSpace& space, const SpacePoint& q,
                             double c, double t = 0.0);

struct PatchSearchOptions {
  double startRadius = 0.1;
  double minRadius = 1e-4;
  std::size_t samplesPerShell = 600;
  std::uint64_t seed = 2024;
};

// Second-order patch at an off-axis point q: F_q = C + D + (1 - eps)/2 f,
// where f is the inner strictly concave field at q. The patch radius r_q is
// found by halving until both comparison inequalities against f_c certify
// with margin r_q^2 eps / 18.
PatchSpec second_order_patch(const ModelSpace& space, const SpacePoint& q,
                             double eps, double c,
                             const ScalarField& innerField,
                             const PatchSearchOptions& opts = {});

// Weak second-order axis term H = H1 + H2 at an axis point q = (v, apex):
// H1 sums phi_R(dist) over translated flat-frame anchors, H2 is a min over
// direction-net anchor families on the unit circle of the cone factor, with
// the multiplier K doubled until the lower comparison bound certifies.
// H(q) = 0 and H is eps-Lipschitz near q.
ScalarField weak_axis_H(const ModelSpace& space, const SpacePoint& q,
                        double eps, double R, double K, double deltaNet);

// Axis patch built from the weak term: F = A + (1 - 2 eps / 5) (2 f_c) + H,
// calibrated so the comparison inequalities hold on the patch ball.
PatchSpec weak_axis_patch(const ModelSpace& space, const SpacePoint& q,
                          double eps, double R = 0.0, double K = 0.0,
                          double deltaNet = 0.02);

struct CoverOptions {
  double targetRadius = 1.0;   // ring of centers
  double bandHalfWidth = 0.001; // radial half-width of the target band
  std::size_t angularSamples = 8192;
  std::size_t radialSamples = 3;
  std::size_t maxPatches = 20000;
};

// Greedy covering of a band around the sphere of radius targetRadius by
// tenth-radius patch balls; every target sample ends up within r_i / 10 of
// some patch center. The patch count is recorded in each PatchSpec.
std::vector<PatchSpec> cover_annulus(
    const ModelSpace& space, double eps, double c,
    const std::function<PatchSpec(const SpacePoint&)>& patchBuilder,
    const CoverOptions& opts = {});

struct RegionOptions {
  std::size_t convexitySamples = 10000;
  std::size_t boundaryRays = 2048;
  std::uint64_t seed = 424242;
  double coreRadius = 0.55;
  bool checkConvexity = true;
};

struct ConvexityCheck {
  bool passed = false;
  std::size_t pairCount = 0;
  SpacePoint witnessX, witnessY, witnessM;
  std::string note;
};

// Midpoint-closure certificate: random pairs inside the region, every
// midpoint branch must lie inside.
ConvexityCheck region_convexity_check(const ConvexRegion& region,
                                      std::size_t samples, std::uint64_t seed);

// Region {F >= -1/2} cut out by the pointwise minimum of the patches, with
// the core ball adjoined; the boundary polyline is extracted by radial
// root-finding and the midpoint-closure certificate is run (throws
// std::runtime_error with a witness on failure).
ConvexRegion assemble_region(const ModelSpace& space,
                             const std::vector<PatchSpec>& patches, double eps,
                             const RegionOptions& opts = {});

// -(R(eps) - dist_boundary)^2 with R(eps) = (1 + eps)/(1 - eps), evaluated
// through the smooth radial profile of the region; requires
// dist_boundary < R(eps) throughout.
ScalarField region_concave_dist(const ConvexRegion& region, double eps);

// sqrt(|kappa|) coth(sqrt(|kappa|) R(eps)) - 1 / R(eps), extended by
// continuity to 0 at kappa = 0.
double t_correction(double eps, double kappa);

struct ComparisonConfig {
  double kappa = 0.0;   // model curvature (flat comparison implemented)
  double eps = 0.1;     // sets R(eps)
  double h = 0.5;       // dist(p-bar, gamma(0)) along the segment to M-bar
  double alphaAngle = 0.0; // angle of the ray against the direction to M-bar
};

// Planar comparison configuration: p-bar at the origin, M-bar at distance
// R(eps) along the axis, gamma(0) between them at distance h from p-bar;
// returns R(eps) - dist(M-bar, gamma(t)).
double comparison_distance(const ComparisonConfig& config, double t);

// Final-step patch at a non-apex cone point q:
// F_q = |q o| B_q + f/2 + eps dist_q^2 - r_q^2 eps / 4 + |q o|^2 / 2,
// with B_q the Busemann field of the ray from the apex through q and f the
// inner strictly concave field at q.
PatchSpec final_step_patch(const ModelSpace& space, const SpacePoint& q,
                           double eps, const ScalarField& innerField,
                           const PatchSearchOptions& opts = {});

struct RegionPipelineResult {
  std::vector<PatchSpec> patches;
  ConvexRegion region;
};

// Full pipeline on Cone(alpha): ring of final-step patches around the unit
// circle, assembled into the convex region with its certificates.
RegionPipelineResult region_pipeline(const ModelSpace& space, double eps,
                                     const RegionOptions& opts = {});

// Strictly concave field centered at the apex of Cone(alpha): dyadic
// self-similar minimum of rotated final-step patch templates over rings of
// radii in (1/2, 1], calibrated so that -d^2 <= f <= -(1 - 2 eps) d^2 on the
// unit ball and certified at lambda = -2 + eps.
ScalarField apex_theorem_b(const ModelSpace& space, double eps);

} // namespace ck
