#pragma once

#include "ck/field.hpp"
#include "ck/verify.hpp"

#include <array>
#include <cstdint>
#include <vector>

// Construction pipeline: model strainer function mu_R, third-order distance
// Taylor oracle, r-lifts to singular spaces, the C^2 reparametrization
// spline, annulus gluing, self-improvement, and exactification.

namespace ck {

struct StrainerAnchors {
  ModelSpace space;
  SpacePoint base;
  std::vector<SpacePoint> anchors; // p_1..p_n then p_{-1}..p_{-n}
  double R = 0.0;
  double r = 1.0; // lift scale (1 for the model)
};

// Third-order Taylor expansion of x -> dist(p, x) around 0 in Euclidean space.
double taylor_dist(const std::vector<double>& p, const std::vector<double>& x);

// Model function on Euclidean(n): sum over anchors +-e_i of
// -[(1+R) - dist_{p_i}]^2 / 2 + R^2/2, on B_R(0).
ScalarField model_mu(int n, double R);

StrainerAnchors model_anchors(int n, double R);

// Anchors of the r-lift at p: extend_ray along the tangent frame directions
// to native distance r.
StrainerAnchors lift_anchors(const ModelSpace& space, const SpacePoint& p,
                             double r, double R);

// r-lift of mu_R at p: native field on B_{R r}(p) (rescaled-metric reading
// pulled back through rescale_pullback).
ScalarField lift_mu(const ModelSpace& space, const SpacePoint& p, double r,
                    double R);

// Directions from `at` toward each anchor, as a circle-valued explosion
// candidate (valid at points whose tangent cone is 2-dimensional Euclidean).
Explosion anchors_explosion(const StrainerAnchors& anchors,
                            const SpacePoint& at);

// C^2 reparametrization spline phi_eps: piecewise (1-eps)x / quintic blend /
// x/(1-eps) / quintic blend / x, with fixed delta = 1/100 knots.
struct ReparamSpline {
  double eps = 0.0;
  static constexpr double delta = 0.01;
  std::array<double, 4> knots{}; // -(1/4+d)^2, -(1/2-d)^2, -(1/2+d)^2, -(1-d)^2
  std::array<std::array<double, 6>, 2> blend{}; // quintic coeffs per gap
  double measuredB = 0.0;

  double value(double x) const;
  double deriv1(double x) const;
  double deriv2(double x) const;
  RealC2 as_real_c2() const;
  nlohmann::json describe() const;
};

ReparamSpline build_reparam(double eps);

struct GlueOptions {
  // eps' used inside the spline; <= 0 means the default eps/(2 (1 + B)).
  double epsPrime = 0.0;
  bool checkHypotheses = true;
  // widening allowed on the lower sandwich bound of the inputs (exactified
  // stages dip below -dist^2 by design)
  double lowerSlack = 0.0;
  std::uint64_t seed = 12345;
  std::size_t checkSamples = 400;
};

// Cor-3.8-style gluing of f1 on B_rho(p) with f2 on B_{rho/2}(p):
// phi o f1 outside B_{rho/2}, min(phi o f1, f2) on the middle annulus, f2 on
// B_{rho/4}; throws std::runtime_error with a report when the interface
// inequalities fail.
ScalarField glue(const ScalarField& f1, const ScalarField& f2, double eps,
                 const GlueOptions& opts = {});

struct SelfImproveOptions {
  double outerRadius = 0.2;
  double modelR = 0.005; // strainer parameter of every stage
  std::uint64_t seed = 777;
  bool checkHypotheses = true;
};

// Theorem-B construction: lifts at radii R/2^{i-1} glued inward, depth stages.
ScalarField self_improve(const ModelSpace& space, const SpacePoint& p,
                         double eps, int depth,
                         const SelfImproveOptions& opts = {});

struct ExactifyOptions {
  double outerRadius = 0.2;
  double modelR = 0.005;   // strainer parameter of every stage
  double zeta1 = 0.025;    // stage-1 dip of the field below -dist^2
  double zetaDecay = 0.97; // geometric decay of the dip (and of the reserve)
  std::uint64_t seed = 778;
};

// Exactly (-2)-concave construction: stage i is the lift on B_{R/2^{i-1}}
// multiplied by (1 + zeta_i)/(1 - eta), which makes its concavity exactly
// -2(1 + zeta_i); the reserve 2 zeta_i pays for the spline-composition
// degradation while zeta_i shrinks the |F + dist^2|/dist^2 ratio stage by
// stage. The schedule eps_i (strictly decreasing) records the accuracy of
// the underlying approximate stages.
ScalarField exactify(const ModelSpace& space, const SpacePoint& p,
                     const std::vector<double>& epsSchedule,
                     const ExactifyOptions& opts = {});

} // namespace ck
