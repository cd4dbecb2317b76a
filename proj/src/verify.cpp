#include "ck/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ck {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

SpacePoint draw_point(const ModelSpace& space, const SpacePoint& center,
                      double radius, std::uint64_t seed, std::uint64_t k) {
  return sample_ball(space, center, radius, 1, mix_seed(seed, k)).front();
}

bool in_domain(const ScalarField& f, const SpacePoint& x) {
  const double d = dist(f.space, f.domain.center, x);
  return d >= f.domain.innerRadius - 1e-12 &&
         d <= f.domain.outerRadius + 1e-12;
}

bool geodesic_in_domain(const ScalarField& f, const SpacePoint& x,
                        const SpacePoint& y) {
  for (int i = 1; i < 8; ++i)
    if (!in_domain(f, geodesic(f.space, x, y, i / 8.0))) return false;
  return true;
}

// Fill out[i] = fn(i) for i in [0, n) using the requested worker count;
// results are index-addressed so the outcome is independent of scheduling.
template <typename Fn>
void parallel_fill(std::size_t n, int workers, Fn fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / static_cast<std::size_t>(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn]() {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SampledPair {
  SpacePoint x, y;
};

std::vector<SampledPair> sample_pairs(const ScalarField& f,
                                      std::size_t count, std::uint64_t seed,
                                      bool requireGeodesic) {
  std::vector<SampledPair> out;
  out.reserve(count);
  const auto& d = f.domain;
  std::uint64_t k = 0;
  std::size_t attempts = 0;
  const std::size_t maxAttempts = 400 * count + 100000;
  while (out.size() < count) {
    if (++attempts > maxAttempts)
      throw std::runtime_error("pair sampling exhausted; domain too thin");
    const auto x = draw_point(f.space, d.center, d.outerRadius, seed, k++);
    const auto y = draw_point(f.space, d.center, d.outerRadius, seed, k++);
    if (dist(f.space, d.center, x) < d.innerRadius) continue;
    if (dist(f.space, d.center, y) < d.innerRadius) continue;
    if (dist(f.space, x, y) < 1e-12) continue;
    if (requireGeodesic && d.innerRadius > 0.0 && !geodesic_in_domain(f, x, y))
      continue;
    out.push_back({x, y});
  }
  return out;
}

nlohmann::json witness_json(const TripleWitness& w) {
  return {{"x", point_json(w.x)},
          {"y", point_json(w.y)},
          {"m", point_json(w.m)},
          {"defect", w.defect}};
}

double set_distance(const DirectionSpace& sigma,
                    const std::vector<Direction>& A,
                    const std::vector<Direction>& B) {
  double best = 1e300;
  for (const auto& a : A)
    for (const auto& b : B) best = std::min(best, direction_dist(sigma, a, b));
  return best;
}

} // namespace

nlohmann::json ConcavityReport::to_json() const {
  return {{"kind", "concavity"},
          {"fieldProvenance", fieldProvenance},
          {"lambda", lambda},
          {"tripleCount", tripleCount},
          {"worstMargin", worstMargin},
          {"witness", witness_json(witness)},
          {"seed", seed},
          {"tolerance", tolerance},
          {"certified", certified}};
}

nlohmann::json SandwichReport::to_json() const {
  return {{"kind", "sandwich"},
          {"fieldProvenance", fieldProvenance},
          {"epsilon", epsilon},
          {"sampleCount", sampleCount},
          {"worstLowerSlack", worstLowerSlack},
          {"worstUpperSlack", worstUpperSlack},
          {"witnessLower", point_json(witnessLower)},
          {"witnessUpper", point_json(witnessUpper)},
          {"seed", seed},
          {"tolerance", tolerance},
          {"certified", certified}};
}

nlohmann::json LiftStabilityReport::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages)
    st.push_back({{"distortionBound", s.distortionBound},
                  {"concavity", s.concavity.to_json()},
                  {"sandwich", s.sandwich.to_json()},
                  {"measuredAleph", s.measuredAleph},
                  {"liftFailed", s.liftFailed},
                  {"failure", s.failure}});
  return {{"kind", "liftStability"},
          {"constructionId", constructionId},
          {"stages", st},
          {"certified", certified}};
}

double midpoint_defect(const ScalarField& field, const SpacePoint& x,
                       const SpacePoint& y, const SpacePoint& m,
                       double lambda) {
  const double d = dist(field.space, x, y);
  const double dx = dist(field.space, x, m);
  const double dy = dist(field.space, m, y);
  const double tol = 1e-10 * (1.0 + d) + 1e-7 * d;
  if (std::abs(dx - d / 2) > tol || std::abs(dy - d / 2) > tol)
    throw std::invalid_argument("m is not a midpoint of (x, y)");
  return 2 * field(m) - field(x) - field(y) + lambda * d * d / 4;
}

ConcavityReport concavity_check(const ScalarField& field, double lambda,
                                const VerifyOptions& opts) {
  ConcavityReport r;
  r.fieldProvenance = field.provenance;
  r.lambda = lambda;
  r.seed = opts.seed;
  const double scale = field.domain.outerRadius;
  r.tolerance = 1e-9 * scale * scale * opts.toleranceScale;

  auto pairs = sample_pairs(field, opts.sampleCount, opts.seed, true);
  r.tripleCount = pairs.size();

  std::vector<double> defects(pairs.size());
  std::vector<SpacePoint> mids(pairs.size());
  parallel_fill(pairs.size(), opts.workers, [&](std::size_t i) {
    const auto& pr = pairs[i];
    const double d = dist(field.space, pr.x, pr.y);
    double worst = 1e300;
    SpacePoint worstM;
    for (const auto& m : midpoints(field.space, pr.x, pr.y)) {
      const double def =
          2 * field(m) - field(pr.x) - field(pr.y) + lambda * d * d / 4;
      if (def < worst) {
        worst = def;
        worstM = m;
      }
    }
    defects[i] = worst;
    mids[i] = worstM;
  });

  std::size_t argmin = 0;
  for (std::size_t i = 1; i < defects.size(); ++i)
    if (defects[i] < defects[argmin]) argmin = i;
  r.worstMargin = defects.empty() ? 0.0 : defects[argmin];
  if (!defects.empty())
    r.witness = {pairs[argmin].x, pairs[argmin].y, mids[argmin],
                 defects[argmin]};
  r.certified = r.worstMargin >= -r.tolerance;
  return r;
}

double lipschitz_estimate(const ScalarField& field,
                          const VerifyOptions& opts) {
  auto pairs = sample_pairs(field, opts.sampleCount, opts.seed, false);
  std::vector<double> ratios(pairs.size());
  parallel_fill(pairs.size(), opts.workers, [&](std::size_t i) {
    const double d = dist(field.space, pairs[i].x, pairs[i].y);
    ratios[i] = std::abs(field(pairs[i].x) - field(pairs[i].y)) / d;
  });
  double sup = 0.0;
  for (double r : ratios) sup = std::max(sup, r);
  return sup;
}

SandwichReport sandwich_check(const ScalarField& field, const SpacePoint& p,
                              double epsilon, double innerRadius,
                              double outerRadius, const VerifyOptions& opts) {
  SandwichReport r;
  r.fieldProvenance = field.provenance;
  r.epsilon = epsilon;
  r.seed = opts.seed;
  r.tolerance = 1e-9 * outerRadius * outerRadius * opts.toleranceScale;

  std::vector<SpacePoint> pts;
  pts.reserve(opts.sampleCount);
  std::uint64_t k = 0;
  std::size_t attempts = 0;
  while (pts.size() < opts.sampleCount) {
    if (++attempts > 400 * opts.sampleCount + 100000)
      throw std::runtime_error("annulus sampling exhausted");
    auto x = draw_point(field.space, p, outerRadius, opts.seed, k++);
    if (dist(field.space, p, x) < innerRadius) continue;
    pts.push_back(std::move(x));
  }
  r.sampleCount = pts.size();

  std::vector<double> lower(pts.size()), upper(pts.size());
  parallel_fill(pts.size(), opts.workers, [&](std::size_t i) {
    const double d = dist(field.space, p, pts[i]);
    const double v = field(pts[i]);
    lower[i] = v + d * d;
    upper[i] = -(1.0 - 2.0 * epsilon) * d * d - v;
  });
  std::size_t al = 0, au = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (lower[i] < lower[al]) al = i;
    if (upper[i] < upper[au]) au = i;
  }
  r.worstLowerSlack = lower.empty() ? 0.0 : lower[al];
  r.worstUpperSlack = upper.empty() ? 0.0 : upper[au];
  if (!pts.empty()) {
    r.witnessLower = pts[al];
    r.witnessUpper = pts[au];
  }
  r.certified = r.worstLowerSlack >= -r.tolerance &&
                r.worstUpperSlack >= -r.tolerance;
  return r;
}

ExplosionCheck explosion_check(const Explosion& candidate) {
  ExplosionCheck out;
  out.worstViolation = 1e300;
  if (candidate.pairs.empty()) throw std::invalid_argument("empty explosion");
  for (const auto& [A, B] : candidate.pairs)
    if (A.empty() || B.empty())
      throw std::invalid_argument("empty direction set");
  const auto& sigma = candidate.directionSpace;
  const double delta = candidate.delta;
  auto consider = [&](double slack, const std::string& what) {
    if (slack < out.worstViolation) {
      out.worstViolation = slack;
      out.violatedConstraint = what;
    }
  };
  const std::size_t k = candidate.pairs.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& [Ai, Bi] = candidate.pairs[i];
    consider(set_distance(sigma, Ai, Bi) - (kPi - delta),
             "opposition |A" + std::to_string(i) + " B" + std::to_string(i) +
                 "| >= pi - delta");
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto& [Aj, Bj] = candidate.pairs[j];
      consider(set_distance(sigma, Ai, Aj) - (kPi / 2 - delta),
               "|A" + std::to_string(i) + " A" + std::to_string(j) + "|");
      consider(set_distance(sigma, Bi, Bj) - (kPi / 2 - delta),
               "|B" + std::to_string(i) + " B" + std::to_string(j) + "|");
      consider(set_distance(sigma, Ai, Bj) - (kPi / 2 - delta),
               "|A" + std::to_string(i) + " B" + std::to_string(j) + "|");
    }
  }
  out.valid = out.worstViolation >= -1e-12;
  return out;
}

double bgp_defect(const Explosion& explosion, const Direction& direction) {
  double sum = 0.0;
  for (const auto& [A, B] : explosion.pairs) {
    const double d = set_distance(explosion.directionSpace, A, {direction});
    (void)B;
    sum += std::cos(d) * std::cos(d);
  }
  return std::abs(sum - 1.0);
}

double measured_aleph(const ScalarField& field, const SpacePoint& p,
                      double epsilon, double outerRadius,
                      const VerifyOptions& opts, double floorFraction) {
  const int steps = 400;
  const std::size_t perShell = std::max<std::size_t>(
      32, opts.sampleCount / static_cast<std::size_t>(steps) * 4);
  double lastPassing = 1.0;
  for (int j = 1; j <= steps; ++j) {
    const double rho =
        std::exp(std::log(floorFraction) * static_cast<double>(j) / steps);
    const double shellLo = rho * outerRadius;
    const double shellHi =
        std::exp(std::log(floorFraction) * static_cast<double>(j - 1) / steps) *
        outerRadius;
    VerifyOptions shellOpts = opts;
    shellOpts.sampleCount = perShell;
    shellOpts.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(j));
    auto rep =
        sandwich_check(field, p, epsilon, shellLo, shellHi, shellOpts);
    if (!rep.certified) return lastPassing;
    lastPassing = rho;
  }
  return lastPassing;
}

LiftStabilityReport lift_stability_audit(
    const std::string& constructionId, const LiftedBuilder& rebuild,
    const std::vector<GhApprox>& approxSequence, double lambda, double epsilon,
    const SpacePoint& mappedCenterHint, const VerifyOptions& opts) {
  LiftStabilityReport report;
  report.constructionId = constructionId;
  report.certified = true;
  std::uint64_t stageIdx = 0;
  for (const auto& approx : approxSequence) {
    LiftStage stage;
    stage.distortionBound = approx.distortionBound;
    VerifyOptions stageOpts = opts;
    stageOpts.seed = mix_seed(opts.seed, 1000 + stageIdx);
    try {
      ScalarField lifted = rebuild(approx);
      const SpacePoint center = lifted.domain.center;
      (void)mappedCenterHint;
      stage.concavity = concavity_check(lifted, lambda, stageOpts);
      stage.sandwich =
          sandwich_check(lifted, center, epsilon,
                         lifted.domain.outerRadius / 16.0,
                         lifted.domain.outerRadius, stageOpts);
      stage.measuredAleph =
          measured_aleph(lifted, center, epsilon,
                         lifted.domain.outerRadius, stageOpts);
      if (!stage.concavity.certified || !stage.sandwich.certified)
        report.certified = false;
    } catch (const std::exception& e) {
      stage.liftFailed = true;
      stage.failure = e.what();
      report.certified = false;
    }
    report.stages.push_back(std::move(stage));
    ++stageIdx;
  }
  return report;
}

} // namespace ck
