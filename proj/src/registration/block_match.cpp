#include "histreg/registration/block_match.hpp"

#include <cmath>
#include <vector>

namespace histreg::reg {

namespace {

struct Patch {
  std::vector<double> values;
  double mean = 0.0;
  double norm = 0.0;  // sqrt(sum (v - mean)^2)
};

bool extract_patch(const ImageBuffer& gray, int cx, int cy, int half, Patch& out) {
  const int size = 2 * half;
  out.values.resize(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  std::size_t idx = 0;
  for (int y = cy - half; y < cy + half; ++y)
    for (int x = cx - half; x < cx + half; ++x, ++idx) {
      const double v = gray.at(0, y, x);
      out.values[idx] = v;
      sum += v;
    }
  out.mean = sum / static_cast<double>(out.values.size());
  double ss = 0.0;
  for (double v : out.values) {
    const double d = v - out.mean;
    ss += d * d;
  }
  out.norm = std::sqrt(ss);
  return out.norm > 1e-9;
}

double ncc(const Patch& a, const Patch& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += (a.values[i] - a.mean) * (b.values[i] - b.mean);
  return dot / (a.norm * b.norm);
}

/// 1-D sub-pixel peak adjustment by parabola through (m, c, p); clamped to
/// [-0.5, 0.5], zero when the fit is not a proper maximum.
double parabola_offset(double m, double c, double p) {
  const double denom = m - 2.0 * c + p;
  if (denom >= -1e-12) return 0.0;
  const double d = 0.5 * (m - p) / denom;
  return std::clamp(d, -0.5, 0.5);
}

}  // namespace

BlockMatchResult block_match_refine(const ImageBuffer& moving, const ImageBuffer& reference,
                                    const TissueMask& referenceMask, const BlockMatchConfig& cfg) {
  if (moving.width() != reference.width() || moving.height() != reference.height())
    throw DimensionMismatch("block_match: moving must be resampled into the reference frame");
  if (referenceMask.width() != reference.width() || referenceMask.height() != reference.height())
    throw DimensionMismatch("block_match: mask dimensions differ from reference");

  const ImageBuffer movGray = to_gray(moving);
  const ImageBuffer refGray = to_gray(reference);
  const int half = cfg.blockSize / 2;
  const int r = cfg.searchRadius;
  const int w = reference.width(), h = reference.height();
  const int span = 2 * r + 1;

  BlockMatchResult result;
  Patch refPatch, movPatch;
  std::vector<double> scores(static_cast<std::size_t>(span) * span);

  for (int cy = half; cy + half <= h; cy += cfg.blockSize) {
    for (int cx = half; cx + half <= w; cx += cfg.blockSize) {
      // the search window around the block must stay inside both images
      if (cx - half - r < 0 || cx + half + r > w || cy - half - r < 0 || cy + half + r > h) continue;

      std::size_t covered = 0;
      for (int y = cy - half; y < cy + half; ++y)
        for (int x = cx - half; x < cx + half; ++x)
          if (referenceMask.at(y, x)) ++covered;
      if (static_cast<double>(covered) <
          cfg.minTissueCoverage * static_cast<double>(cfg.blockSize) * cfg.blockSize)
        continue;

      if (!extract_patch(refGray, cx, cy, half, refPatch)) continue;

      double bestScore = -2.0;
      int bestDx = 0, bestDy = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          double s = -2.0;
          if (extract_patch(movGray, cx + dx, cy + dy, half, movPatch)) s = ncc(refPatch, movPatch);
          scores[static_cast<std::size_t>(dy + r) * span + (dx + r)] = s;
          if (s > bestScore) {
            bestScore = s;
            bestDx = dx;
            bestDy = dy;
          }
        }
      }
      if (bestScore < cfg.minNcc) continue;

      double subDx = 0.0, subDy = 0.0;
      // a perfect correlation is already exactly aligned; the parabola can
      // only wander off it
      if (bestScore < 1.0 - 1e-12 && std::abs(bestDx) < r && std::abs(bestDy) < r) {
        auto at = [&](int dy, int dx) { return scores[static_cast<std::size_t>(dy + r) * span + (dx + r)]; };
        const double c = at(bestDy, bestDx);
        const double l = at(bestDy, bestDx - 1), rr = at(bestDy, bestDx + 1);
        const double u = at(bestDy - 1, bestDx), d = at(bestDy + 1, bestDx);
        if (l > -2.0 && rr > -2.0) subDx = parabola_offset(l, c, rr);
        if (u > -2.0 && d > -2.0) subDy = parabola_offset(u, c, d);
      }

      feat::Match m;
      m.referencePoint = {static_cast<double>(cx), static_cast<double>(cy)};
      m.movingPoint = {cx + bestDx + subDx, cy + bestDy + subDy};
      m.descriptorDistance = 0;
      result.matches.push_back(m);
      result.nccValues.push_back(bestScore);
    }
  }
  return result;
}

}  // namespace histreg::reg
