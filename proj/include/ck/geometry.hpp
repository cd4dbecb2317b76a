#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

// Closed-form metric geometry for the model-space catalog: Euclidean n-space,
// Euclidean cones over circles, and flat x cone products. Distances, geodesics,
// midpoint branches, angles, tangent charts, ray extension, Gromov-Hausdorff
// maps between nearby cones, and seeded ball sampling.

namespace ck {

// Shortest representation that round-trips through parsing.
std::string format_double(double v);

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

enum class SpaceKind { Euclidean, Cone, Product };

struct ModelSpace {
  SpaceKind kind = SpaceKind::Euclidean;
  int flatDim = 0;        // n for Euclidean, k for Product
  double coneAngle = 0.0; // total angle alpha in (0, 2pi] for Cone/Product

  static ModelSpace euclidean(int n);
  static ModelSpace cone(double alpha);
  static ModelSpace product(int k, double alpha);

  int dimension() const;
  bool operator==(const ModelSpace& o) const;
  bool operator!=(const ModelSpace& o) const { return !(*this == o); }
  std::string describe() const;
};

// Coordinates valid in exactly one ModelSpace. Cone points are kept in polar
// normal form: angle in [0, alpha), apex stored as (0, 0).
struct SpacePoint {
  std::vector<double> flat;   // Euclidean coords / flat factor
  double radius = 0.0;        // cone factor
  double angle = 0.0;

  bool operator==(const SpacePoint& o) const {
    return flat == o.flat && radius == o.radius && angle == o.angle;
  }
};

SpacePoint euclidean_point(std::vector<double> coords);
SpacePoint cone_point(const ModelSpace& space, double radius, double angle);
SpacePoint product_point(const ModelSpace& space, std::vector<double> flat,
                         double radius, double angle);
SpacePoint origin_of(const ModelSpace& space);

// Throws std::invalid_argument when the point's shape does not match the space.
void check_membership(const ModelSpace& space, const SpacePoint& p);

double circle_dist(double a, double b, double length);

double dist(const ModelSpace& space, const SpacePoint& x, const SpacePoint& y);

// Point at parameter t in [0,1] along the tie-break shortest path
// (branch of increasing angle when two unrollings tie).
SpacePoint geodesic(const ModelSpace& space, const SpacePoint& x,
                    const SpacePoint& y, double t);

// All midpoint branches; two entries when the two cone unrollings tie
// and give distinct points.
std::vector<SpacePoint> midpoints(const ModelSpace& space, const SpacePoint& x,
                                  const SpacePoint& y);

// Angle at `vertex` between the chosen shortest paths to a and b, in [0, pi].
double angle(const ModelSpace& space, const SpacePoint& vertex,
             const SpacePoint& a, const SpacePoint& b);

// Tangent cone at p with log/exp charts. At a cone apex the tangent space is
// the cone itself; elsewhere it is Euclidean with the unrolling chart.
// exp throws outside the injectivity ball.
struct TangentChart {
  ModelSpace tangent;
  double injectivityRadius = 0.0; // infinity encoded as large value
  std::function<SpacePoint(const SpacePoint&)> log; // space -> tangent
  std::function<SpacePoint(const SpacePoint&)> exp; // tangent -> space
};

TangentChart tangent_cone(const ModelSpace& space, const SpacePoint& p);

// Endpoint of the unit-speed geodesic from p with initial direction
// `dir` (a tangent-chart vector, need not be unit) after arclength `length`.
// Unlike exp this continues geodesics past the injectivity radius; on cones
// this requires totalAngle >= pi once length exceeds dist(p, apex).
SpacePoint extend_ray(const ModelSpace& space, const SpacePoint& p,
                      const SpacePoint& dir, double length);

struct GhApprox {
  ModelSpace source;
  ModelSpace target;
  std::function<SpacePoint(const SpacePoint&)> pointMap;
  double distortionBound = 0.0;
};

// Radial identification (r, theta) -> (r, theta * aTarget / aSource) between
// cones, with the distortion bound measured on a deterministic grid in
// B_2(apex).
GhApprox gh_cone_approx(double alphaSource, double alphaTarget);

// Deterministic, seed-reproducible sampling, uniform w.r.t. the intrinsic
// measure (area-weighted radius on cones).
std::vector<SpacePoint> sample_ball(const ModelSpace& space,
                                    const SpacePoint& center, double radius,
                                    std::size_t count, std::uint64_t seed);

// Direction spaces (links): circle of given length or round unit sphere.
struct DirectionSpace {
  enum class Kind { Circle, UnitSphere } kind = Kind::Circle;
  double length = kTwoPi; // circle
  int dim = 1;            // sphere dimension, 1 or 2

  static DirectionSpace circle(double length);
  static DirectionSpace unitSphere(int dim);
};

struct Direction {
  double angle = 0.0;                       // circle
  std::array<double, 3> vec{1.0, 0.0, 0.0}; // sphere (S^1 uses x,y)
};

double direction_dist(const DirectionSpace& sigma, const Direction& a,
                      const Direction& b);

// `euclidean:<n>`, `cone:<alpha>`, `product:<k>:cone:<alpha>`.
ModelSpace parse_space(const std::string& spec);

} // namespace ck
