#pragma once

#include "ck/field.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Numerical certification: lambda-concavity via the midpoint criterion,
// Lipschitz estimation, two-sided sandwich bounds, explosion / BGP defect
// checks, and lift-stability audits across close cones.

namespace ck {

struct VerifyOptions {
  std::size_t sampleCount = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
  double toleranceScale = 1.0;
};

struct TripleWitness {
  SpacePoint x, y, m;
  double defect = 0.0;
};

struct ConcavityReport {
  nlohmann::json fieldProvenance;
  double lambda = 0.0;
  std::size_t tripleCount = 0;
  double worstMargin = 0.0;
  TripleWitness witness;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  bool certified = false;

  nlohmann::json to_json() const;
};

struct SandwichReport {
  nlohmann::json fieldProvenance;
  double epsilon = 0.0;
  std::size_t sampleCount = 0;
  double worstLowerSlack = 0.0; // min of f + dist^2      (>= 0 wanted)
  double worstUpperSlack = 0.0; // min of -(1-2e)d^2 - f  (>= 0 wanted)
  SpacePoint witnessLower, witnessUpper;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  bool certified = false;

  nlohmann::json to_json() const;
};

struct Explosion {
  DirectionSpace directionSpace;
  std::vector<std::pair<std::vector<Direction>, std::vector<Direction>>> pairs;
  double delta = 0.0;
};

struct ExplosionCheck {
  bool valid = false;
  double worstViolation = 0.0; // most negative slack across all constraints
  std::string violatedConstraint;
};

struct LiftStage {
  double distortionBound = 0.0;
  ConcavityReport concavity;
  SandwichReport sandwich;
  double measuredAleph = 0.0;
  bool liftFailed = false;
  std::string failure;
};

struct LiftStabilityReport {
  std::string constructionId;
  std::vector<LiftStage> stages;
  bool certified = false;

  nlohmann::json to_json() const;
};

// 2f(m) - f(x) - f(y) + lambda |xy|^2 / 4; nonnegative on every triple
// certifies lambda-concavity. m must be a midpoint of (x, y) within 1e-10.
double midpoint_defect(const ScalarField& field, const SpacePoint& x,
                       const SpacePoint& y, const SpacePoint& m, double lambda);

ConcavityReport concavity_check(const ScalarField& field, double lambda,
                                const VerifyOptions& opts);

double lipschitz_estimate(const ScalarField& field, const VerifyOptions& opts);

// Verifies -dist_p^2 <= f <= -(1 - 2 epsilon) dist_p^2 on the annulus
// innerRadius <= |xp| <= outerRadius.
SandwichReport sandwich_check(const ScalarField& field, const SpacePoint& p,
                              double epsilon, double innerRadius,
                              double outerRadius, const VerifyOptions& opts);

ExplosionCheck explosion_check(const Explosion& candidate);

// | sum_i cos^2 dist(direction, A_i) - 1 | with set distances.
double bgp_defect(const Explosion& explosion, const Direction& direction);

// Smallest rho in (floor, 1] such that the sandwich holds on the shells of
// radius in [rho * outerRadius, outerRadius]; scans a log-spaced grid.
double measured_aleph(const ScalarField& field, const SpacePoint& p,
                      double epsilon, double outerRadius,
                      const VerifyOptions& opts, double floorFraction = 1e-3);

// Rebuilds the construction through each approximation and certifies it.
using LiftedBuilder =
    std::function<ScalarField(const GhApprox&)>;

LiftStabilityReport lift_stability_audit(
    const std::string& constructionId, const LiftedBuilder& rebuild,
    const std::vector<GhApprox>& approxSequence, double lambda, double epsilon,
    const SpacePoint& mappedCenterHint, const VerifyOptions& opts);

} // namespace ck
