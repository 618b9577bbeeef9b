#include "histreg/core/resample.hpp"

#include <cmath>

namespace histreg {

double sample_bilinear(const ImageBuffer& img, int channel, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int w = img.width();
  const int h = img.height();

  auto tap = [&](int yy, int xx) -> double {
    if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
    return img.at(channel, yy, xx);
  };

  const double v00 = tap(y0, x0);
  const double v01 = tap(y0, x0 + 1);
  const double v10 = tap(y0 + 1, x0);
  const double v11 = tap(y0 + 1, x0 + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

ImageBuffer resample_pull(const ImageBuffer& img, const PointMap& pull, int outWidth, int outHeight) {
  ImageBuffer out(outWidth, outHeight, img.channels());
  for (int y = 0; y < outHeight; ++y) {
    for (int x = 0; x < outWidth; ++x) {
      const PixelCoord src = pull({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < img.channels(); ++c) out.at(c, y, x) = sample_bilinear(img, c, src.x, src.y);
    }
  }
  return out;
}

ImageBuffer resample_pull_grid(const ImageBuffer& img, const PointMap& pull, int outWidth, int outHeight,
                               int gridSpacing) {
  if (gridSpacing <= 1) return resample_pull(img, pull, outWidth, outHeight);

  const int nx = (outWidth - 1) / gridSpacing + 2;
  const int ny = (outHeight - 1) / gridSpacing + 2;
  std::vector<PixelCoord> nodes(static_cast<std::size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      nodes[static_cast<std::size_t>(gy) * nx + gx] =
          pull({static_cast<double>(gx * gridSpacing), static_cast<double>(gy * gridSpacing)});
    }
  }

  ImageBuffer out(outWidth, outHeight, img.channels());
  const double inv = 1.0 / gridSpacing;
  for (int y = 0; y < outHeight; ++y) {
    const int gy = y / gridSpacing;
    const double fy = (y - gy * gridSpacing) * inv;
    for (int x = 0; x < outWidth; ++x) {
      const int gx = x / gridSpacing;
      const double fx = (x - gx * gridSpacing) * inv;
      const PixelCoord n00 = nodes[static_cast<std::size_t>(gy) * nx + gx];
      const PixelCoord n01 = nodes[static_cast<std::size_t>(gy) * nx + gx + 1];
      const PixelCoord n10 = nodes[static_cast<std::size_t>(gy + 1) * nx + gx];
      const PixelCoord n11 = nodes[static_cast<std::size_t>(gy + 1) * nx + gx + 1];
      const double sx = (1 - fy) * ((1 - fx) * n00.x + fx * n01.x) + fy * ((1 - fx) * n10.x + fx * n11.x);
      const double sy = (1 - fy) * ((1 - fx) * n00.y + fx * n01.y) + fy * ((1 - fx) * n10.y + fx * n11.y);
      for (int c = 0; c < img.channels(); ++c) out.at(c, y, x) = sample_bilinear(img, c, sx, sy);
    }
  }
  return out;
}

ImageBuffer resample(const ImageBuffer& img, const AffineTransform2D& t, int outWidth, int outHeight) {
  const AffineTransform2D inv = t.inverse();
  return resample_pull(
      img, [&inv](PixelCoord p) { return inv.apply(p); }, outWidth, outHeight);
}

namespace {

// Invert the forward TPS at p by fixed-point iteration preconditioned with
// the inverse of the affine linear part: q <- q - Ainv*(t(q) - p).
PixelCoord invert_tps_at(const TpsWarp& t, const AffineTransform2D& affInv, PixelCoord p, PixelCoord seed) {
  PixelCoord q = seed;
  for (int iter = 0; iter < 25; ++iter) {
    const PixelCoord err = t.apply(q) - p;
    const PixelCoord step = {affInv.a11 * err.x + affInv.a12 * err.y, affInv.a21 * err.x + affInv.a22 * err.y};
    q = q - step;
    if (std::abs(step.x) + std::abs(step.y) < 1e-10) break;
  }
  return q;
}

}  // namespace

ImageBuffer resample(const ImageBuffer& img, const TpsWarp& t, int outWidth, int outHeight) {
  const AffineTransform2D affInv = t.affinePart.inverse();
  const int spacing = 2;
  const int nx = (outWidth - 1) / spacing + 2;
  const int ny = (outHeight - 1) / spacing + 2;
  std::vector<PixelCoord> nodes(static_cast<std::size_t>(nx) * ny);
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const PixelCoord p = {static_cast<double>(gx * spacing), static_cast<double>(gy * spacing)};
      PixelCoord seed = gx > 0 ? nodes[static_cast<std::size_t>(gy) * nx + gx - 1]
                               : (gy > 0 ? nodes[static_cast<std::size_t>(gy - 1) * nx] : affInv.apply(p));
      nodes[static_cast<std::size_t>(gy) * nx + gx] = invert_tps_at(t, affInv, p, seed);
    }
  }

  ImageBuffer out(outWidth, outHeight, img.channels());
  const double inv = 1.0 / spacing;
  for (int y = 0; y < outHeight; ++y) {
    const int gy = y / spacing;
    const double fy = (y - gy * spacing) * inv;
    for (int x = 0; x < outWidth; ++x) {
      const int gx = x / spacing;
      const double fx = (x - gx * spacing) * inv;
      const PixelCoord n00 = nodes[static_cast<std::size_t>(gy) * nx + gx];
      const PixelCoord n01 = nodes[static_cast<std::size_t>(gy) * nx + gx + 1];
      const PixelCoord n10 = nodes[static_cast<std::size_t>(gy + 1) * nx + gx];
      const PixelCoord n11 = nodes[static_cast<std::size_t>(gy + 1) * nx + gx + 1];
      const double sx = (1 - fy) * ((1 - fx) * n00.x + fx * n01.x) + fy * ((1 - fx) * n10.x + fx * n11.x);
      const double sy = (1 - fy) * ((1 - fx) * n00.y + fx * n01.y) + fy * ((1 - fx) * n10.y + fx * n11.y);
      for (int c = 0; c < img.channels(); ++c) out.at(c, y, x) = sample_bilinear(img, c, sx, sy);
    }
  }
  return out;
}

}  // namespace histreg
