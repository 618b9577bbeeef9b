#include "histreg/registration/robust.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>

#include "histreg/core/rng.hpp"

namespace histreg::reg {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double residual_norm(const AffineTransform2D& t, const Match& m) {
  return distance(t.apply(m.movingPoint), m.referencePoint);
}

}  // namespace

AffineTransform2D fit_affine_least_squares(const MatchSet& matches, const std::vector<double>* weights) {
  if (matches.size() < 3) throw TooFewMatches("fit_affine: need at least 3 matches");
  // Normal equations on the 3-parameter-per-axis system [x y 1].
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atbx = Eigen::Vector3d::Zero();
  Eigen::Vector3d atby = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    if (w <= 0.0) continue;
    const Eigen::Vector3d row(matches[i].movingPoint.x, matches[i].movingPoint.y, 1.0);
    ata += w * row * row.transpose();
    atbx += w * row * matches[i].referencePoint.x;
    atby += w * row * matches[i].referencePoint.y;
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (!lu.isInvertible()) throw SingularSystem("fit_affine: degenerate point configuration");
  const Eigen::Vector3d px = lu.solve(atbx);
  const Eigen::Vector3d py = lu.solve(atby);
  return {px(0), px(1), py(0), py(1), px(2), py(2)};
}

namespace {

/// Exact affine through 3 correspondences; empty optional when degenerate.
std::optional<AffineTransform2D> affine_from_triplet(const Match& m0, const Match& m1, const Match& m2) {
  Eigen::Matrix3d a;
  a << m0.movingPoint.x, m0.movingPoint.y, 1.0,
       m1.movingPoint.x, m1.movingPoint.y, 1.0,
       m2.movingPoint.x, m2.movingPoint.y, 1.0;
  const double area2 = std::abs(a.determinant());
  if (area2 < 1e-6) return std::nullopt;
  Eigen::PartialPivLU<Eigen::Matrix3d> lu(a);
  const Eigen::Vector3d bx(m0.referencePoint.x, m1.referencePoint.x, m2.referencePoint.x);
  const Eigen::Vector3d by(m0.referencePoint.y, m1.referencePoint.y, m2.referencePoint.y);
  const Eigen::Vector3d px = lu.solve(bx);
  const Eigen::Vector3d py = lu.solve(by);
  AffineTransform2D t{px(0), px(1), py(0), py(1), px(2), py(2)};
  if (!t.invertible()) return std::nullopt;
  return t;
}

}  // namespace

RansacResult ransac_affine(const MatchSet& matches, const RansacConfig& cfg) {
  const std::size_t n = matches.size();
  if (n < 3) throw TooFewMatches("ransac: " + std::to_string(n) + " matches, need 3");

  Rng rng(cfg.seed);
  const double thr2 = cfg.threshold * cfg.threshold;

  auto collect_inliers = [&](const AffineTransform2D& t, std::vector<std::size_t>& idx, double& sse) {
    idx.clear();
    sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const PixelCoord p = t.apply(matches[i].movingPoint);
      const double dx = p.x - matches[i].referencePoint.x;
      const double dy = p.y - matches[i].referencePoint.y;
      const double e2 = dx * dx + dy * dy;
      if (e2 < thr2) {
        idx.push_back(i);
        sse += e2;
      }
    }
  };

  std::vector<std::size_t> bestIdx, curIdx;
  double bestSse = 0.0;
  double required = static_cast<double>(cfg.maxIterations);
  for (int iter = 0; iter < cfg.maxIterations && iter < required; ++iter) {
    std::size_t i0 = rng.uniformIndex(n);
    std::size_t i1 = rng.uniformIndex(n);
    std::size_t i2 = rng.uniformIndex(n);
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;
    const auto t = affine_from_triplet(matches[i0], matches[i1], matches[i2]);
    if (!t) continue;
    double sse = 0.0;
    collect_inliers(*t, curIdx, sse);
    if (curIdx.size() > bestIdx.size() || (curIdx.size() == bestIdx.size() && !curIdx.empty() && sse < bestSse)) {
      bestIdx = curIdx;
      bestSse = sse;
      const double w = static_cast<double>(bestIdx.size()) / static_cast<double>(n);
      const double pOutlierFree = w * w * w;
      if (pOutlierFree > 1e-12) {
        const double denom = std::log(std::max(1e-300, 1.0 - pOutlierFree));
        if (denom < 0.0) required = std::min(required, std::log(1.0 - cfg.confidence) / denom);
      }
    }
  }

  auto consensus_fail = [&](std::size_t count) {
    return count < 3 || static_cast<double>(count) < 0.1 * static_cast<double>(n);
  };
  if (consensus_fail(bestIdx.size()))
    throw NoConsensus("ransac: best inlier set has " + std::to_string(bestIdx.size()) + " of " + std::to_string(n));

  // Refit and re-evaluate until the inlier set is a fixed point, so every
  // returned inlier satisfies the threshold under the returned transform.
  AffineTransform2D model;
  std::vector<std::size_t> idx = bestIdx;
  for (int round = 0; round < 10; ++round) {
    MatchSet sel;
    sel.reserve(idx.size());
    for (std::size_t i : idx) sel.push_back(matches[i]);
    model = fit_affine_least_squares(sel);
    double sse = 0.0;
    collect_inliers(model, curIdx, sse);
    if (consensus_fail(curIdx.size()))
      throw NoConsensus("ransac: consensus collapsed during refit");
    if (curIdx == idx) break;
    idx = curIdx;
  }

  RansacResult result;
  result.transform = model;
  double sse = 0.0;
  collect_inliers(model, idx, sse);
  result.inliers.reserve(idx.size());
  for (std::size_t i : idx) result.inliers.push_back(matches[i]);
  if (consensus_fail(result.inliers.size()))
    throw NoConsensus("ransac: consensus collapsed during refit");
  return result;
}

TukeyResult tukey_refine(const MatchSet& matches, const AffineTransform2D& initial, const TukeyConfig& cfg) {
  if (matches.size() < 3) throw TooFewMatches("tukey: need at least 3 matches");

  std::vector<double> residuals(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) residuals[i] = residual_norm(initial, matches[i]);

  const double med = median_of(residuals);
  std::vector<double> absDev(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) absDev[i] = std::abs(residuals[i] - med);
  const double scale = std::max(1.4826 * median_of(absDev), 1e-6);
  const double cutoff = cfg.c * scale;

  auto weight_of = [&](double r) {
    if (r >= cutoff) return 0.0;
    const double u = r / cutoff;
    const double t = 1.0 - u * u;
    return t * t;
  };
  auto rho_of = [&](double r) {
    const double k = cutoff * cutoff / 6.0;
    if (r >= cutoff) return k;
    const double u = r / cutoff;
    const double t = 1.0 - u * u;
    return k * (1.0 - t * t * t);
  };

  TukeyResult result;
  result.transform = initial;
  result.weights.resize(matches.size());

  AffineTransform2D current = initial;
  for (int iter = 0; iter < cfg.maxIterations; ++iter) {
    double wsum = 0.0;
    double objective = 0.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const double r = residual_norm(current, matches[i]);
      result.weights[i] = weight_of(r);
      wsum += result.weights[i];
      objective += rho_of(r);
    }
    result.objectiveTrace.push_back(objective);
    if (wsum <= 0.0) throw DegenerateWeights("tukey: all weights vanished");

    AffineTransform2D next;
    try {
      next = fit_affine_least_squares(matches, &result.weights);
    } catch (const SingularSystem&) {
      break;  // weighted geometry collapsed; keep the current estimate
    }
    const double change = std::abs(next.a11 - current.a11) + std::abs(next.a12 - current.a12) +
                          std::abs(next.a21 - current.a21) + std::abs(next.a22 - current.a22) +
                          std::abs(next.tx - current.tx) + std::abs(next.ty - current.ty);
    current = next;
    if (change < 1e-9) break;
  }

  // Final weights under the converged transform.
  double wsum = 0.0;
  double objective = 0.0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double r = residual_norm(current, matches[i]);
    result.weights[i] = weight_of(r);
    wsum += result.weights[i];
    objective += rho_of(r);
  }
  result.objectiveTrace.push_back(objective);
  if (wsum <= 0.0) throw DegenerateWeights("tukey: all weights vanished");
  result.transform = current;
  return result;
}

MatchSet neighborhood_filter(const MatchSet& matches, const NeighborhoodConfig& cfg) {
  const std::size_t n = matches.size();
  if (n < static_cast<std::size_t>(cfg.k) + 1) return matches;

  std::vector<PixelCoord> disp(n);
  for (std::size_t i = 0; i < n; ++i) disp[i] = matches[i].movingPoint - matches[i].referencePoint;

  MatchSet kept;
  kept.reserve(n);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      dist[j] = {i == j ? 1e300 : distance(matches[i].referencePoint, matches[j].referencePoint), j};
    std::partial_sort(dist.begin(), dist.begin() + cfg.k, dist.end());

    std::vector<double> nx(static_cast<std::size_t>(cfg.k)), ny(static_cast<std::size_t>(cfg.k));
    for (int k = 0; k < cfg.k; ++k) {
      nx[static_cast<std::size_t>(k)] = disp[dist[static_cast<std::size_t>(k)].second].x;
      ny[static_cast<std::size_t>(k)] = disp[dist[static_cast<std::size_t>(k)].second].y;
    }
    const PixelCoord medDisp{median_of(nx), median_of(ny)};

    std::vector<double> neighborDev(static_cast<std::size_t>(cfg.k));
    for (int k = 0; k < cfg.k; ++k)
      neighborDev[static_cast<std::size_t>(k)] = distance(disp[dist[static_cast<std::size_t>(k)].second], medDisp);
    const double tolerance = cfg.deviationFactor * std::max(median_of(neighborDev), 1.0);

    if (distance(disp[i], medDisp) <= tolerance) kept.push_back(matches[i]);
  }
  return kept;
}

}  // namespace histreg::reg
