#include "histreg/preprocess/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace histreg::pre {

double nearest_rank_percentile(std::span<const double> samples, double p) {
  if (samples.empty()) throw EmptyInput("nearest_rank_percentile: empty input");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

ImageBuffer contrast_stretch(const ImageBuffer& img, const PreprocessConfig& cfg) {
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    const double lo = nearest_rank_percentile(img.plane(c), cfg.stretchLowPercentile);
    const double hi = nearest_rank_percentile(img.plane(c), cfg.stretchHighPercentile);
    if (hi <= lo) throw DegenerateRange("contrast_stretch: constant channel " + std::to_string(c));
    const double scale = 1.0 / (hi - lo);
    auto src = img.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp((src[i] - lo) * scale, 0.0, 1.0);
  }
  return out;
}

ImageBuffer invert(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (double& s : out.data()) s = 1.0 - s;
  return out;
}

namespace {

constexpr int kBins = 256;

std::array<std::int64_t, kBins> luma_histogram(const ImageBuffer& img) {
  const ImageBuffer gray = to_gray(img);
  std::array<std::int64_t, kBins> h{};
  for (double s : gray.data()) {
    int bin = static_cast<int>(std::floor(s * kBins));
    bin = std::clamp(bin, 0, kBins - 1);
    ++h[bin];
  }
  return h;
}

/// Between-class-variance-maximizing split index T in [1, 255]: class 0 holds
/// bins [0, T), class 1 holds [T, 255]. Ties go to the smaller T.
int otsu_split(const std::array<std::int64_t, kBins>& h) {
  int occupied = 0;
  for (std::int64_t v : h)
    if (v > 0) ++occupied;
  if (occupied < 2) throw DegenerateHistogram("otsu: all samples in one bin");

  std::int64_t total = 0;
  double totalMoment = 0.0;
  for (int i = 0; i < kBins; ++i) {
    total += h[i];
    totalMoment += static_cast<double>(h[i]) * i;
  }

  int bestT = 1;
  double bestVar = -1.0;
  std::int64_t n0 = 0;
  double m0 = 0.0;
  for (int t = 1; t < kBins; ++t) {
    n0 += h[t - 1];
    m0 += static_cast<double>(h[t - 1]) * (t - 1);
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double mean0 = m0 / static_cast<double>(n0);
    const double mean1 = (totalMoment - m0) / static_cast<double>(n1);
    const double diff = mean0 - mean1;
    const double var = static_cast<double>(n0) * static_cast<double>(n1) * diff * diff;
    if (var > bestVar) {
      bestVar = var;
      bestT = t;
    }
  }
  return bestT;
}

}  // namespace

double otsu_threshold(const ImageBuffer& img) {
  return static_cast<double>(otsu_split(luma_histogram(img))) / kBins;
}

TissueMask otsu_mask(const ImageBuffer& img, MaskPolarity polarity) {
  const double t = otsu_threshold(img);
  const ImageBuffer gray = to_gray(img);
  TissueMask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double s = gray.at(0, y, x);
      const bool fg = polarity == MaskPolarity::darkForeground ? s < t : s >= t;
      mask.set(y, x, fg);
    }
  }
  return mask;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Symmetric reflection (the edge sample is repeated in the mirror image).
inline int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

ImageBuffer denoise(const ImageBuffer& img, double sigma) {
  if (sigma <= 0.0) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();

  ImageBuffer tmp(w, h, img.channels());
  ImageBuffer out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    // horizontal pass
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at(c, y, reflect(x + i, w));
        tmp.at(c, y, x) = acc;
      }
    }
    // vertical pass
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(c, reflect(y + i, h), x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

}  // namespace histreg::pre
