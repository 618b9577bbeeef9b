#include "histreg/registration/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "histreg/preprocess/preprocess.hpp"

namespace histreg::feat {

namespace {

// Bresenham circle of radius 3 used by the segment test.
constexpr int kCircle[16][2] = {
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
};
constexpr int kArc = 9;  // contiguous run length required

ImageBuffer downsample2x2(const ImageBuffer& in) {
  const int w2 = std::max(1, in.width() / 2);
  const int h2 = std::max(1, in.height() / 2);
  ImageBuffer out(w2, h2, 1);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x) {
      const int sy = std::min(2 * y, in.height() - 1);
      const int sy1 = std::min(2 * y + 1, in.height() - 1);
      const int sx = std::min(2 * x, in.width() - 1);
      const int sx1 = std::min(2 * x + 1, in.width() - 1);
      out.at(0, y, x) =
          0.25 * (in.at(0, sy, sx) + in.at(0, sy, sx1) + in.at(0, sy1, sx) + in.at(0, sy1, sx1));
    }
  return out;
}

std::vector<ImageBuffer> build_pyramid(const ImageBuffer& img, int octaves) {
  std::vector<ImageBuffer> pyr;
  pyr.push_back(to_gray(img));
  for (int o = 1; o < octaves; ++o) {
    if (pyr.back().width() < 64 || pyr.back().height() < 64) break;
    pyr.push_back(downsample2x2(pyr.back()));
  }
  return pyr;
}

/// Segment-test corner score: the largest contrast t for which some 9-long
/// contiguous arc is entirely brighter than center+t or darker than center-t.
/// Expressed directly as max over arcs of the minimum absolute difference.
double corner_score(const ImageBuffer& g, int y, int x) {
  double diffs[16];
  const double center = g.at(0, y, x);
  for (int i = 0; i < 16; ++i) diffs[i] = g.at(0, y + kCircle[i][1], x + kCircle[i][0]) - center;

  double best = 0.0;
  for (int start = 0; start < 16; ++start) {
    double minBright = 1e30, maxDark = -1e30;
    bool bright = true, dark = true;
    for (int k = 0; k < kArc; ++k) {
      const double d = diffs[(start + k) & 15];
      bright = bright && d > 0.0;
      dark = dark && d < 0.0;
      if (!bright && !dark) break;
      minBright = std::min(minBright, d);
      maxDark = std::max(maxDark, d);
    }
    if (bright) best = std::max(best, minBright);
    if (dark) best = std::max(best, -maxDark);
  }
  return best;
}

double orientation_at(const ImageBuffer& g, int y, int x, int radius) {
  double m10 = 0.0, m01 = 0.0;
  const int y0 = std::max(0, y - radius), y1 = std::min(g.height() - 1, y + radius);
  const int x0 = std::max(0, x - radius), x1 = std::min(g.width() - 1, x + radius);
  const int r2 = radius * radius;
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx) {
      const int dx = xx - x, dy = yy - y;
      if (dx * dx + dy * dy > r2) continue;
      const double v = g.at(0, yy, xx);
      m10 += dx * v;
      m01 += dy * v;
    }
  if (std::abs(m10) < 1e-12 && std::abs(m01) < 1e-12) return 0.0;
  return std::atan2(m01, m10);
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const ImageBuffer& img, const DetectConfig& cfg) {
  const std::vector<ImageBuffer> pyr = build_pyramid(img, cfg.octaves);
  std::vector<Keypoint> found;

  for (int o = 0; o < static_cast<int>(pyr.size()); ++o) {
    const ImageBuffer& g = pyr[static_cast<std::size_t>(o)];
    const int w = g.width(), h = g.height();
    if (w < 8 || h < 8) break;

    ImageBuffer scores(w, h, 1, 0.0);
    for (int y = 3; y < h - 3; ++y)
      for (int x = 3; x < w - 3; ++x) {
        const double s = corner_score(g, y, x);
        if (s > cfg.threshold) scores.at(0, y, x) = s;
      }

    const double mapScale = static_cast<double>(1 << o);
    const double mapOffset = (mapScale - 1.0) / 2.0;
    for (int y = 3; y < h - 3; ++y)
      for (int x = 3; x < w - 3; ++x) {
        const double s = scores.at(0, y, x);
        if (s <= 0.0) continue;
        bool maximal = true;
        for (int dy = -1; dy <= 1 && maximal; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const double n = scores.at(0, y + dy, x + dx);
            // strict on earlier-scanned neighbors, non-strict on later ones,
            // so plateaus yield exactly one detection
            if (n > s || (n == s && (dy < 0 || (dy == 0 && dx < 0)))) {
              maximal = false;
              break;
            }
          }
        if (!maximal) continue;
        Keypoint kp;
        kp.position = {x * mapScale + mapOffset, y * mapScale + mapOffset};
        kp.scale = mapScale;
        kp.score = s;
        kp.octave = o;
        kp.orientation = orientation_at(g, y, x, 8);
        found.push_back(kp);
      }
  }

  std::sort(found.begin(), found.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.position.y != b.position.y) return a.position.y < b.position.y;
    if (a.position.x != b.position.x) return a.position.x < b.position.x;
    return a.octave < b.octave;
  });
  if (static_cast<int>(found.size()) > cfg.maxCount) found.resize(static_cast<std::size_t>(cfg.maxCount));
  return found;
}

namespace {

struct PatternPoint {
  double x, y;
};

struct Pattern {
  std::vector<PatternPoint> points;
  std::vector<std::pair<int, int>> pairs;  // 512 shortest point pairs
  double radius = 0.0;
};

Pattern build_pattern() {
  Pattern p;
  const struct {
    double radius;
    int count;
  } rings[] = {{0.0, 1}, {3.0, 8}, {6.0, 12}, {9.0, 16}, {12.0, 20}};
  for (const auto& ring : rings) {
    for (int i = 0; i < ring.count; ++i) {
      const double a = 2.0 * M_PI * i / ring.count;
      p.points.push_back({ring.radius * std::cos(a), ring.radius * std::sin(a)});
      p.radius = std::max(p.radius, ring.radius);
    }
  }
  struct Cand {
    double d2;
    int i, j;
  };
  std::vector<Cand> cands;
  const int n = static_cast<int>(p.points.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = p.points[i].x - p.points[j].x;
      const double dy = p.points[i].y - p.points[j].y;
      cands.push_back({dx * dx + dy * dy, i, j});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  cands.resize(512);
  for (const Cand& c : cands) p.pairs.emplace_back(c.i, c.j);
  return p;
}

const Pattern& pattern() {
  static const Pattern p = build_pattern();
  return p;
}

double sample_clamped(const ImageBuffer& g, double x, double y) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, g.width() - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, g.height() - 1);
  const int x1 = std::min(x0 + 1, g.width() - 1);
  const int y1 = std::min(y0 + 1, g.height() - 1);
  const double fx = std::clamp(x - x0, 0.0, 1.0);
  const double fy = std::clamp(y - y0, 0.0, 1.0);
  return (1 - fy) * ((1 - fx) * g.at(0, y0, x0) + fx * g.at(0, y0, x1)) +
         fy * ((1 - fx) * g.at(0, y1, x0) + fx * g.at(0, y1, x1));
}

}  // namespace

DescribedKeypoints describe(const ImageBuffer& img, const std::vector<Keypoint>& keypoints, int octaves) {
  const std::vector<ImageBuffer> pyr = build_pyramid(img, octaves);
  std::vector<ImageBuffer> smoothed;
  smoothed.reserve(pyr.size());
  for (const ImageBuffer& level : pyr) smoothed.push_back(pre::denoise(level, 1.2));

  const Pattern& pat = pattern();
  const double margin = pat.radius + 2.5;  // rotation + interpolation support

  DescribedKeypoints out;
  std::vector<double> values(pat.points.size());
  for (const Keypoint& kp : keypoints) {
    const int o = std::min(kp.octave, static_cast<int>(smoothed.size()) - 1);
    const ImageBuffer& g = smoothed[static_cast<std::size_t>(o)];
    const double mapScale = static_cast<double>(1 << o);
    const double lx = (kp.position.x - (mapScale - 1.0) / 2.0) / mapScale;
    const double ly = (kp.position.y - (mapScale - 1.0) / 2.0) / mapScale;
    if (lx < margin || ly < margin || lx > g.width() - 1 - margin || ly > g.height() - 1 - margin) {
      ++out.droppedCount;
      continue;
    }
    const double c = std::cos(kp.orientation), s = std::sin(kp.orientation);
    for (std::size_t i = 0; i < pat.points.size(); ++i) {
      const double px = c * pat.points[i].x - s * pat.points[i].y;
      const double py = s * pat.points[i].x + c * pat.points[i].y;
      values[i] = sample_clamped(g, lx + px, ly + py);
    }
    BinaryDescriptor d;
    for (std::size_t b = 0; b < pat.pairs.size(); ++b) {
      if (values[static_cast<std::size_t>(pat.pairs[b].first)] <
          values[static_cast<std::size_t>(pat.pairs[b].second)])
        d.bits[b >> 6] |= (std::uint64_t{1} << (b & 63));
    }
    out.keypoints.push_back(kp);
    out.descriptors.push_back(d);
  }
  return out;
}

MatchSet match(const DescribedKeypoints& a, const DescribedKeypoints& b, double ratio) {
  MatchSet result;
  const std::size_t na = a.descriptors.size();
  const std::size_t nb = b.descriptors.size();
  if (na == 0 || nb == 0) return result;

  std::vector<int> bestForB(nb, -1);
  std::vector<int> bestDistB(nb, 1 << 30);
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t i = 0; i < na; ++i) {
      const int d = a.descriptors[i].hamming(b.descriptors[j]);
      if (d < bestDistB[j]) {
        bestDistB[j] = d;
        bestForB[j] = static_cast<int>(i);
      }
    }
  }

  for (std::size_t i = 0; i < na; ++i) {
    int best = 1 << 30, second = 1 << 30, bestJ = -1;
    for (std::size_t j = 0; j < nb; ++j) {
      const int d = a.descriptors[i].hamming(b.descriptors[j]);
      if (d < best) {
        second = best;
        best = d;
        bestJ = static_cast<int>(j);
      } else if (d < second) {
        second = d;
      }
    }
    if (bestJ < 0) continue;
    if (!(best < ratio * second)) continue;
    if (bestForB[static_cast<std::size_t>(bestJ)] != static_cast<int>(i)) continue;  // cross-check
    result.push_back({a.keypoints[i].position, b.keypoints[static_cast<std::size_t>(bestJ)].position, best});
  }
  return result;
}

}  // namespace histreg::feat
