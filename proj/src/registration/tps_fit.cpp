#include "histreg/registration/tps_fit.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace histreg::reg {

namespace {

// The system is solved in centered, RMS-scaled coordinates. Under the TPS
// side conditions this is exact: U(r/s) = (U(r) - ln(s) r^2)/s^2 and the r^2
// term collapses to a constant, so weights map back by 1/s^2, the constant
// folds into the affine translation, and lambda scales by s^2.
TpsWarp solve_tps(const std::vector<PixelCoord>& sources, const std::vector<PixelCoord>& targets, double lambda) {
  const Eigen::Index n = static_cast<Eigen::Index>(sources.size());
  if (n < 3) throw SingularSystem("estimate_tps: need at least 3 control points");

  PixelCoord center{0.0, 0.0};
  for (const PixelCoord& p : sources) {
    center.x += p.x;
    center.y += p.y;
  }
  center.x /= static_cast<double>(n);
  center.y /= static_cast<double>(n);
  double rms = 0.0;
  for (const PixelCoord& p : sources) {
    const double dx = p.x - center.x, dy = p.y - center.y;
    rms += dx * dx + dy * dy;
  }
  rms = std::sqrt(rms / static_cast<double>(n));
  const double s = rms > 1e-12 ? rms : 1.0;

  std::vector<PixelCoord> q(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    q[static_cast<std::size_t>(i)] = {(sources[static_cast<std::size_t>(i)].x - center.x) / s,
                                      (sources[static_cast<std::size_t>(i)].y - center.y) / s};

  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double u = tps_kernel(distance(q[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(j)]));
      system(i, j) = u;
      system(j, i) = u;
    }
    system(i, i) = lambda / (s * s);
    system(i, n) = 1.0;
    system(i, n + 1) = q[static_cast<std::size_t>(i)].x;
    system(i, n + 2) = q[static_cast<std::size_t>(i)].y;
    system(n, i) = 1.0;
    system(n + 1, i) = q[static_cast<std::size_t>(i)].x;
    system(n + 2, i) = q[static_cast<std::size_t>(i)].y;
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs(i, 0) = targets[static_cast<std::size_t>(i)].x;
    rhs(i, 1) = targets[static_cast<std::size_t>(i)].y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw SingularSystem("estimate_tps: singular system (collinear or duplicate points)");
  const Eigen::MatrixXd sol = lu.solve(rhs);

  TpsWarp warp;
  warp.regularization = lambda;
  warp.controlPoints = sources;
  warp.kernelWeights.resize(static_cast<std::size_t>(n));
  const double invS2 = 1.0 / (s * s);
  const double logS = std::log(s);
  double constX = 0.0, constY = 0.0;  // absorbed -ln(s)/s^2 * sum w'_i |p_i|^2
  for (Eigen::Index i = 0; i < n; ++i) {
    warp.kernelWeights[static_cast<std::size_t>(i)][0] = sol(i, 0) * invS2;
    warp.kernelWeights[static_cast<std::size_t>(i)][1] = sol(i, 1) * invS2;
    const PixelCoord& p = sources[static_cast<std::size_t>(i)];
    const double norm2 = p.x * p.x + p.y * p.y;
    constX += sol(i, 0) * norm2;
    constY += sol(i, 1) * norm2;
  }
  constX *= -logS * invS2;
  constY *= -logS * invS2;

  // a'(p') with p' = (p - c)/s, expanded into original coordinates
  warp.affinePart.a11 = sol(n + 1, 0) / s;
  warp.affinePart.a12 = sol(n + 2, 0) / s;
  warp.affinePart.a21 = sol(n + 1, 1) / s;
  warp.affinePart.a22 = sol(n + 2, 1) / s;
  warp.affinePart.tx = sol(n, 0) - (sol(n + 1, 0) * center.x + sol(n + 2, 0) * center.y) / s + constX;
  warp.affinePart.ty = sol(n, 1) - (sol(n + 1, 1) * center.x + sol(n + 2, 1) * center.y) / s + constY;
  return warp;
}

}  // namespace

TpsWarp estimate_tps(const feat::MatchSet& matches, double lambda) {
  std::vector<PixelCoord> sources, targets;
  sources.reserve(matches.size());
  targets.reserve(matches.size());
  for (const auto& m : matches) {
    sources.push_back(m.referencePoint);
    targets.push_back(m.movingPoint);
  }
  return solve_tps(sources, targets, lambda);
}

TpsWarp estimate_tps_forward(const feat::MatchSet& matches, double lambda) {
  std::vector<PixelCoord> sources, targets;
  sources.reserve(matches.size());
  targets.reserve(matches.size());
  for (const auto& m : matches) {
    sources.push_back(m.movingPoint);
    targets.push_back(m.referencePoint);
  }
  return solve_tps(sources, targets, lambda);
}

}  // namespace histreg::reg
