#pragma once

#include <array>
#include <functional>
#include <vector>

#include "histreg/core/image.hpp"

namespace histreg {

/// 2x3 affine map (x,y) -> (a11*x + a12*y + tx, a21*x + a22*y + ty).
struct AffineTransform2D {
  double a11 = 1.0, a12 = 0.0;
  double a21 = 0.0, a22 = 1.0;
  double tx = 0.0, ty = 0.0;

  PixelCoord apply(PixelCoord p) const {
    return {a11 * p.x + a12 * p.y + tx, a21 * p.x + a22 * p.y + ty};
  }

  double determinant() const { return a11 * a22 - a12 * a21; }
  bool invertible(double eps = 1e-12) const;
  AffineTransform2D inverse() const;

  static AffineTransform2D identity() { return {}; }
  static AffineTransform2D translation(double tx, double ty) { return {1, 0, 0, 1, tx, ty}; }
  static AffineTransform2D rotation(double radians);
  static AffineTransform2D scaling(double sx, double sy) { return {sx, 0, 0, sy, 0, 0}; }
};

PixelCoord apply_affine(const AffineTransform2D& t, PixelCoord p);

/// result(p) == outer(inner(p)) for all p.
AffineTransform2D compose(const AffineTransform2D& outer, const AffineTransform2D& inner);

/// Thin-plate-spline warp: affinePart(p) + sum_i w_i * U(||p - c_i||),
/// U(r) = r^2 ln r with U(0) = 0. Kernel weights satisfy the TPS side
/// conditions sum w = 0, sum w*x = 0, sum w*y = 0.
struct TpsWarp {
  std::vector<PixelCoord> controlPoints;
  AffineTransform2D affinePart;
  std::vector<std::array<double, 2>> kernelWeights;  // one (wx, wy) per control point
  double regularization = 0.0;

  PixelCoord apply(PixelCoord p) const;
};

PixelCoord apply_tps(const TpsWarp& w, PixelCoord p);

/// TPS radial kernel U(r) = r^2 ln r, with U(0) = 0.
double tps_kernel(double r);

/// A generic point transform; composed registration maps and synthetic truth
/// warps are both exposed this way.
using PointMap = std::function<PixelCoord(PixelCoord)>;

}  // namespace histreg
