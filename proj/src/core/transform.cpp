#include "histreg/core/transform.hpp"

#include <cmath>

namespace histreg {

bool AffineTransform2D::invertible(double eps) const { return std::abs(determinant()) > eps; }

AffineTransform2D AffineTransform2D::inverse() const {
  const double det = determinant();
  if (std::abs(det) <= 1e-12) throw SingularSystem("AffineTransform2D::inverse: determinant within 1e-12 of zero");
  const double inv = 1.0 / det;
  AffineTransform2D r;
  r.a11 = a22 * inv;
  r.a12 = -a12 * inv;
  r.a21 = -a21 * inv;
  r.a22 = a11 * inv;
  r.tx = -(r.a11 * tx + r.a12 * ty);
  r.ty = -(r.a21 * tx + r.a22 * ty);
  return r;
}

AffineTransform2D AffineTransform2D::rotation(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  return {c, -s, s, c, 0.0, 0.0};
}

PixelCoord apply_affine(const AffineTransform2D& t, PixelCoord p) { return t.apply(p); }

AffineTransform2D compose(const AffineTransform2D& outer, const AffineTransform2D& inner) {
  AffineTransform2D r;
  r.a11 = outer.a11 * inner.a11 + outer.a12 * inner.a21;
  r.a12 = outer.a11 * inner.a12 + outer.a12 * inner.a22;
  r.a21 = outer.a21 * inner.a11 + outer.a22 * inner.a21;
  r.a22 = outer.a21 * inner.a12 + outer.a22 * inner.a22;
  r.tx = outer.a11 * inner.tx + outer.a12 * inner.ty + outer.tx;
  r.ty = outer.a21 * inner.tx + outer.a22 * inner.ty + outer.ty;
  return r;
}

double tps_kernel(double r) {
  if (r <= 0.0) return 0.0;
  return r * r * std::log(r);
}

PixelCoord TpsWarp::apply(PixelCoord p) const {
  PixelCoord out = affinePart.apply(p);
  for (std::size_t i = 0; i < controlPoints.size(); ++i) {
    const double u = tps_kernel(distance(p, controlPoints[i]));
    out.x += kernelWeights[i][0] * u;
    out.y += kernelWeights[i][1] * u;
  }
  return out;
}

PixelCoord apply_tps(const TpsWarp& w, PixelCoord p) { return w.apply(p); }

}  // namespace histreg
