#include "histreg/stain/lab.hpp"

#include <cmath>

namespace histreg::stain {

namespace {

// Ruderman lalphabeta pipeline constants. The RGB->LMS matrix and the
// diagonal-scaled opponent transform are the published ones; inverses are
// computed numerically so the round trip is exact.
constexpr double kRgbToLms[3][3] = {
    {0.3811, 0.5783, 0.0402},
    {0.1967, 0.7244, 0.0782},
    {0.0241, 0.1288, 0.8444},
};

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt6 = std::sqrt(6.0);
const double kSqrt2 = std::sqrt(2.0);

struct Mat3 {
  double m[3][3];

  static Mat3 from(const double (&a)[3][3]) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = a[i][j];
    return r;
  }

  Mat3 inverse() const {
    const double a = m[0][0], b = m[0][1], c = m[0][2];
    const double d = m[1][0], e = m[1][1], f = m[1][2];
    const double g = m[2][0], h = m[2][1], i = m[2][2];
    const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    Mat3 r;
    r.m[0][0] = (e * i - f * h) / det;
    r.m[0][1] = (c * h - b * i) / det;
    r.m[0][2] = (b * f - c * e) / det;
    r.m[1][0] = (f * g - d * i) / det;
    r.m[1][1] = (a * i - c * g) / det;
    r.m[1][2] = (c * d - a * f) / det;
    r.m[2][0] = (d * h - e * g) / det;
    r.m[2][1] = (b * g - a * h) / det;
    r.m[2][2] = (a * e - b * d) / det;
    return r;
  }

  void apply(double x, double y, double z, double& ox, double& oy, double& oz) const {
    ox = m[0][0] * x + m[0][1] * y + m[0][2] * z;
    oy = m[1][0] * x + m[1][1] * y + m[1][2] * z;
    oz = m[2][0] * x + m[2][1] * y + m[2][2] * z;
  }
};

Mat3 lms_to_lab_matrix() {
  Mat3 r;
  r.m[0][0] = 1.0 / kSqrt3;
  r.m[0][1] = 1.0 / kSqrt3;
  r.m[0][2] = 1.0 / kSqrt3;
  r.m[1][0] = 1.0 / kSqrt6;
  r.m[1][1] = 1.0 / kSqrt6;
  r.m[1][2] = -2.0 / kSqrt6;
  r.m[2][0] = 1.0 / kSqrt2;
  r.m[2][1] = -1.0 / kSqrt2;
  r.m[2][2] = 0.0;
  return r;
}

const Mat3 kForwardLms = Mat3::from(kRgbToLms);
const Mat3 kForwardLab = lms_to_lab_matrix();
const Mat3 kInverseLms = kForwardLms.inverse();
const Mat3 kInverseLab = kForwardLab.inverse();

}  // namespace

ImageBuffer rgb_to_lab(const ImageBuffer& img) {
  if (img.channels() != 3) throw DimensionMismatch("rgb_to_lab: 3-channel input required");
  ImageBuffer out(img.width(), img.height(), 3);
  const std::size_t n = static_cast<std::size_t>(img.width()) * img.height();
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto l = out.plane(0), a = out.plane(1), be = out.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    double L, M, S;
    kForwardLms.apply(r[i], g[i], b[i], L, M, S);
    L = std::log10(std::max(L, 1e-6));
    M = std::log10(std::max(M, 1e-6));
    S = std::log10(std::max(S, 1e-6));
    kForwardLab.apply(L, M, S, l[i], a[i], be[i]);
  }
  return out;
}

ImageBuffer lab_to_rgb(const ImageBuffer& lab) {
  if (lab.channels() != 3) throw DimensionMismatch("lab_to_rgb: 3-channel input required");
  ImageBuffer out(lab.width(), lab.height(), 3);
  const std::size_t n = static_cast<std::size_t>(lab.width()) * lab.height();
  auto l = lab.plane(0), a = lab.plane(1), be = lab.plane(2);
  auto r = out.plane(0), g = out.plane(1), b = out.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    double L, M, S;
    kInverseLab.apply(l[i], a[i], be[i], L, M, S);
    L = std::pow(10.0, L);
    M = std::pow(10.0, M);
    S = std::pow(10.0, S);
    kInverseLms.apply(L, M, S, r[i], g[i], b[i]);
  }
  return out;
}

LabStats compute_lab_stats(const ImageBuffer& lab, const TissueMask& mask) {
  if (lab.width() != mask.width() || lab.height() != mask.height())
    throw DimensionMismatch("compute_lab_stats: mask dimensions differ from image");
  LabStats stats;
  std::size_t n = 0;
  for (int y = 0; y < lab.height(); ++y)
    for (int x = 0; x < lab.width(); ++x)
      if (mask.at(y, x)) {
        ++n;
        for (int c = 0; c < 3; ++c) stats.mean[c] += lab.at(c, y, x);
      }
  if (n == 0) throw EmptyInput("compute_lab_stats: empty mask");
  for (int c = 0; c < 3; ++c) stats.mean[c] /= static_cast<double>(n);
  for (int y = 0; y < lab.height(); ++y)
    for (int x = 0; x < lab.width(); ++x)
      if (mask.at(y, x))
        for (int c = 0; c < 3; ++c) {
          const double d = lab.at(c, y, x) - stats.mean[c];
          stats.stdDev[c] += d * d;
        }
  for (int c = 0; c < 3; ++c) stats.stdDev[c] = std::sqrt(stats.stdDev[c] / static_cast<double>(n));
  return stats;
}

ImageBuffer reinhard_transfer_lab(const ImageBuffer& sourceLab, const TissueMask& mask, const LabStats& sourceStats,
                                  const LabStats& targetStats) {
  for (int c = 0; c < 3; ++c)
    if (sourceStats.stdDev[c] < 1e-9)
      throw DegenerateStats("reinhard: source sigma < 1e-9 in channel " + std::to_string(c));
  ImageBuffer out = sourceLab;
  for (int y = 0; y < sourceLab.height(); ++y)
    for (int x = 0; x < sourceLab.width(); ++x)
      if (mask.at(y, x))
        for (int c = 0; c < 3; ++c) {
          const double v = sourceLab.at(c, y, x);
          out.at(c, y, x) =
              (v - sourceStats.mean[c]) * (targetStats.stdDev[c] / sourceStats.stdDev[c]) + targetStats.mean[c];
        }
  return out;
}

ImageBuffer reinhard_transfer(const ImageBuffer& source, const TissueMask& sourceMask, const LabStats& targetStats) {
  if (sourceMask.count() == 0) throw EmptyInput("reinhard_transfer: empty source mask");
  const ImageBuffer lab = rgb_to_lab(source);
  const LabStats srcStats = compute_lab_stats(lab, sourceMask);
  const ImageBuffer shifted = reinhard_transfer_lab(lab, sourceMask, srcStats, targetStats);
  const ImageBuffer rgb = lab_to_rgb(shifted);
  ImageBuffer out = source;
  for (int y = 0; y < source.height(); ++y)
    for (int x = 0; x < source.width(); ++x)
      if (sourceMask.at(y, x))
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = std::clamp(rgb.at(c, y, x), 0.0, 1.0);
  return out;
}

}  // namespace histreg::stain
