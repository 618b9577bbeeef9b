#pragma once

#include <cstdint>
#include <vector>

#include "histreg/core/transform.hpp"
#include "histreg/registration/features.hpp"

namespace histreg::reg {

using feat::Match;
using feat::MatchSet;

/// Least-squares affine fit mapping moving points onto reference points.
/// Optional per-match weights. Throws SingularSystem on degenerate geometry.
AffineTransform2D fit_affine_least_squares(const MatchSet& matches, const std::vector<double>* weights = nullptr);

struct RansacConfig {
  double threshold = 3.0;  // inlier reprojection error, pixels
  int maxIterations = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct RansacResult {
  AffineTransform2D transform;
  MatchSet inliers;
};

/// Random-sample consensus with 3-point minimal affine solves and a final
/// least-squares refit iterated to a consistent inlier set; deterministic
/// given the seed. Throws TooFewMatches (< 3) or NoConsensus (best set < 3 or
/// < 10% of the matches).
RansacResult ransac_affine(const MatchSet& matches, const RansacConfig& cfg = {});

struct TukeyConfig {
  double c = 4.685;
  int maxIterations = 20;
};

struct TukeyResult {
  AffineTransform2D transform;
  std::vector<double> weights;         // final biweight per match
  std::vector<double> objectiveTrace;  // sum of rho per IRLS iteration
};

/// Iteratively reweighted least squares under the Tukey biweight. The scale is
/// 1.4826 times the median absolute deviation of the initial residual norms
/// about their median (floored at 1e-6) and stays fixed across iterations,
/// which makes the rho objective non-increasing.
/// Throws DegenerateWeights when every weight vanishes.
TukeyResult tukey_refine(const MatchSet& matches, const AffineTransform2D& initial, const TukeyConfig& cfg = {});

struct NeighborhoodConfig {
  int k = 8;
  double deviationFactor = 3.0;
};

/// Displacement-field consistency filter: a match is dropped when its
/// displacement deviates from the median displacement of its k nearest
/// neighbors (in reference coordinates) by more than deviationFactor times the
/// neighbors' own median deviation (floored at 1 px). Fewer than k+1 matches
/// pass through unchanged.
MatchSet neighborhood_filter(const MatchSet& matches, const NeighborhoodConfig& cfg = {});

}  // namespace histreg::reg
