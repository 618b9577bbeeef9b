#pragma once

#include <string>
#include <vector>

#include "histreg/core/image.hpp"
#include "histreg/core/transform.hpp"

namespace histreg::metrics {

/// One landmark correspondence. movingPoint holds moving-image coordinates
/// (pre- or post-transform depending on context); referencePoint is the
/// ground-truth location in the reference frame.
struct LandmarkPair {
  PixelCoord movingPoint;
  PixelCoord referencePoint;
  std::string label;
};

/// Even-count median = mean of the two central order statistics.
double median(std::vector<double> values);

/// Relative target registration error: ||xhat - x|| / diagonal(reference).
double rtre(const LandmarkPair& pair, const ImageBuffer& reference);

/// Median over image pairs of each pair's median rTRE. Throws EmptyInput.
double mmrtre(const std::vector<double>& perPairMedians);

/// Mean of the per-pair median rTRE values. Throws EmptyInput.
double amrtre(const std::vector<double>& perPairMedians);

struct PairMetrics {
  std::vector<double> rtreValues;
  double medianRtre = 0.0;
  std::vector<double> pointDistances;  // raw pixels
  double medianPointDistance = 0.0;
  int pointCount = 0;
  bool expectedCountWarning = false;  // set when pointCount != 10
  int keypointCount = 0;
};

/// Apply the composed registration map to each raw moving landmark and
/// measure distances to the reference landmarks (raw pixels and
/// diagonal-normalized rTRE). A count other than ten raises the warning flag
/// only; the count is recorded.
PairMetrics point_eval(const std::vector<LandmarkPair>& rawPairs, const PointMap& transform,
                       const ImageBuffer& reference);

struct KeypointStats {
  int min = 0;
  int max = 0;
  double median = 0.0;
  double mean = 0.0;
};

/// Order statistics of per-pair matched keypoint counts. Throws EmptyInput.
KeypointStats keypoint_stats(const std::vector<int>& counts);

struct MethodSummary {
  std::string methodName;
  double mmRtre = 0.0;
  double amRtre = 0.0;
  double medianPointDistanceOverall = 0.0;
  std::vector<PairMetrics> perPairMetrics;
};

MethodSummary summarize_method(const std::string& methodName, const std::vector<PairMetrics>& perPair);

}  // namespace histreg::metrics
