#include "histreg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace histreg::metrics {

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double rtre(const LandmarkPair& pair, const ImageBuffer& reference) {
  return distance(pair.movingPoint, pair.referencePoint) / image_diagonal(reference);
}

double mmrtre(const std::vector<double>& perPairMedians) {
  if (perPairMedians.empty()) throw EmptyInput("mmrtre: empty input");
  return median(perPairMedians);
}

double amrtre(const std::vector<double>& perPairMedians) {
  if (perPairMedians.empty()) throw EmptyInput("amrtre: empty input");
  double sum = 0.0;
  for (double v : perPairMedians) sum += v;
  return sum / static_cast<double>(perPairMedians.size());
}

PairMetrics point_eval(const std::vector<LandmarkPair>& rawPairs, const PointMap& transform,
                       const ImageBuffer& reference) {
  PairMetrics out;
  out.pointCount = static_cast<int>(rawPairs.size());
  out.expectedCountWarning = out.pointCount != 10;
  if (rawPairs.empty()) return out;

  const double diag = image_diagonal(reference);
  out.pointDistances.reserve(rawPairs.size());
  out.rtreValues.reserve(rawPairs.size());
  for (const LandmarkPair& p : rawPairs) {
    const PixelCoord mapped = transform(p.movingPoint);
    const double d = distance(mapped, p.referencePoint);
    out.pointDistances.push_back(d);
    out.rtreValues.push_back(d / diag);
  }
  out.medianPointDistance = median(out.pointDistances);
  out.medianRtre = median(out.rtreValues);
  return out;
}

KeypointStats keypoint_stats(const std::vector<int>& counts) {
  if (counts.empty()) throw EmptyInput("keypoint_stats: empty input");
  KeypointStats s;
  s.min = *std::min_element(counts.begin(), counts.end());
  s.max = *std::max_element(counts.begin(), counts.end());
  std::vector<double> asDouble(counts.begin(), counts.end());
  s.median = median(asDouble);
  double sum = 0.0;
  for (int c : counts) sum += c;
  s.mean = sum / static_cast<double>(counts.size());
  return s;
}

MethodSummary summarize_method(const std::string& methodName, const std::vector<PairMetrics>& perPair) {
  MethodSummary summary;
  summary.methodName = methodName;
  summary.perPairMetrics = perPair;
  std::vector<double> medians, pointMedians;
  for (const PairMetrics& m : perPair) {
    if (!m.rtreValues.empty()) medians.push_back(m.medianRtre);
    if (!m.pointDistances.empty()) pointMedians.push_back(m.medianPointDistance);
  }
  if (!medians.empty()) {
    summary.mmRtre = mmrtre(medians);
    summary.amRtre = amrtre(medians);
  }
  if (!pointMedians.empty()) summary.medianPointDistanceOverall = median(pointMedians);
  return summary;
}

}  // namespace histreg::metrics
