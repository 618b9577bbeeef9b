#include "histreg/synth/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "histreg/core/rng.hpp"
#include "histreg/preprocess/preprocess.hpp"
#include "histreg/registration/tps_fit.hpp"

namespace histreg::synth {

Eigen::Matrix<double, 3, 2> SynthSpec::defaultStains() {
  Eigen::Matrix<double, 3, 2> w;
  w.col(0) = Eigen::Vector3d(0.651, 0.701, 0.290).normalized();  // hematoxylin-like
  w.col(1) = Eigen::Vector3d(0.070, 0.990, 0.110).normalized();  // eosin-like
  return w;
}

PixelCoord TruthWarp::apply(PixelCoord p) const {
  const double k = 2.0 * M_PI / wavelength;
  const PixelCoord displaced{p.x + amplitude * std::sin(k * p.y + phaseX),
                             p.y + amplitude * std::sin(k * p.x + phaseY)};
  return affine.apply(displaced);
}

PointMap TruthWarp::map() const {
  const TruthWarp copy = *this;
  return [copy](PixelCoord p) { return copy.apply(p); };
}

namespace {

struct Blob {
  double cx, cy, radius, amplitude;
  double mix;  // fraction of stain 1; general blobs defer to the dominance field
  bool pure = false;
};

struct FourierTexture {
  // fixed random cosine features; smooth, analytic, cheap to evaluate
  std::vector<double> wx, wy, phase;

  static FourierTexture make(Rng& rng, int terms, double minWavelength, double maxWavelength) {
    FourierTexture t;
    t.wx.resize(terms);
    t.wy.resize(terms);
    t.phase.resize(terms);
    for (int i = 0; i < terms; ++i) {
      const double wavelength = rng.uniform(minWavelength, maxWavelength);
      const double dir = rng.uniform(0.0, 2.0 * M_PI);
      const double k = 2.0 * M_PI / wavelength;
      t.wx[i] = k * std::cos(dir);
      t.wy[i] = k * std::sin(dir);
      t.phase[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
    return t;
  }

  double eval(double x, double y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < wx.size(); ++i) s += std::cos(wx[i] * x + wy[i] * y + phase[i]);
    return s / std::sqrt(static_cast<double>(wx.size()));
  }
};

/// Analytic tissue description: per-stain concentration fields over the
/// reference canvas. Stain dominance follows a smooth spatial field with an
/// arcsine-shaped marginal, so regions segregate into stain-1- and
/// stain-2-dominant zones the way nuclei and stroma do.
struct TissueField {
  std::vector<Blob> blobs;
  FourierTexture texture1, texture2, dominance;

  double mix_at(double x, double y) const {
    const double t = dominance.eval(x, y);
    const double u = 0.5 * (1.0 + std::tanh(1.4 * t));
    return 0.5 * (1.0 - std::cos(M_PI * u));
  }

  /// (c1, c2), each softly capped so optical densities stay moderate.
  std::pair<double, double> concentrations(double x, double y) const {
    const double m = mix_at(x, y);
    double c1 = 0.0, c2 = 0.0;
    for (const Blob& b : blobs) {
      const double dx = x - b.cx, dy = y - b.cy;
      const double g = b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
      const double mix = b.pure ? b.mix : m;
      c1 += mix * g;
      c2 += (1.0 - mix) * g;
    }
    const double t1 = std::exp(0.30 * std::clamp(texture1.eval(x, y), -2.0, 2.0));
    const double t2 = std::exp(0.30 * std::clamp(texture2.eval(x, y), -2.0, 2.0));
    c1 *= t1;
    c2 *= t2;
    constexpr double cap = 1.4;
    return {cap * c1 / (cap + c1), cap * c2 / (cap + c2)};
  }
};

TissueField build_tissue(const SynthSpec& spec, Rng& rng) {
  TissueField f;
  f.texture1 = FourierTexture::make(rng, 32, 14.0, 70.0);
  f.texture2 = FourierTexture::make(rng, 32, 14.0, 70.0);
  f.dominance = FourierTexture::make(rng, 16, 50.0, 180.0);
  const double margin = 0.12;
  const double w = spec.width, h = spec.height;
  f.blobs.reserve(static_cast<std::size_t>(spec.blobCount));

  // Pure single-stain calibration blobs come first, kept clear of everything
  // else so the angular extremes of the OD cloud sit on the true stain
  // directions. The rest mix freely.
  const int pureCount = std::min(8, std::max(2, spec.blobCount / 6));
  std::vector<Blob> calibration;
  for (int i = 0; i < pureCount; ++i) {
    Blob b;
    b.radius = rng.uniform(0.055, 0.085) * std::min(w, h);
    b.amplitude = rng.uniform(0.95, 1.15);
    b.mix = i % 2 == 0 ? 1.0 : 0.0;
    b.pure = true;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      b.cx = rng.uniform(margin * w, (1.0 - margin) * w);
      b.cy = rng.uniform(margin * h, (1.0 - margin) * h);
      placed = true;
      for (const Blob& other : calibration) {
        const double minDist = 2.5 * (b.radius + other.radius);
        if (std::hypot(b.cx - other.cx, b.cy - other.cy) < minDist) {
          placed = false;
          break;
        }
      }
    }
    calibration.push_back(b);
    f.blobs.push_back(b);
  }

  for (int i = pureCount; i < spec.blobCount; ++i) {
    Blob b;
    b.radius = rng.uniform(0.04, 0.11) * std::min(w, h);
    b.amplitude = rng.uniform(0.5, 1.0);
    b.mix = 0.5;  // unused; the dominance field decides
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      b.cx = rng.uniform(margin * w, (1.0 - margin) * w);
      b.cy = rng.uniform(margin * h, (1.0 - margin) * h);
      placed = true;
      for (const Blob& cal : calibration) {
        if (std::hypot(b.cx - cal.cx, b.cy - cal.cy) < 1.6 * (b.radius + cal.radius)) {
          placed = false;
          break;
        }
      }
    }
    f.blobs.push_back(b);
  }
  return f;
}

}  // namespace

SynthPair generate_pair(const SynthSpec& spec) {
  Rng rng(spec.seed);
  const TissueField tissue = build_tissue(spec, rng);

  SynthPair out;
  out.truthWarp.affine = spec.affine;
  out.truthWarp.amplitude = spec.deformAmplitude;
  out.truthWarp.wavelength = spec.deformScale;
  out.truthWarp.phaseX = rng.uniform(0.0, 2.0 * M_PI);
  out.truthWarp.phaseY = rng.uniform(0.0, 2.0 * M_PI);

  // Reference: Beer-Lambert brightfield rendering, white background.
  out.reference = ImageBuffer(spec.width, spec.height, 3);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const auto [c1, c2] = tissue.concentrations(x, y);
      for (int c = 0; c < 3; ++c) {
        const double od = spec.stainMatrix(c, 0) * c1 + spec.stainMatrix(c, 1) * c2;
        out.reference.at(c, y, x) = std::pow(10.0, -od);
      }
    }
  }

  // Moving: emission-like rendering of the same tissue, warped by the truth
  // map and remixed into different channels. Bright tissue, dark background.
  const Eigen::Matrix<double, 3, 2> emission = (Eigen::Matrix<double, 3, 2>() <<
      0.15, 0.80,
      0.85, 0.45,
      0.55, 0.10).finished();
  out.moving = ImageBuffer(spec.width, spec.height, 3);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const PixelCoord ref = out.truthWarp.apply({static_cast<double>(x), static_cast<double>(y)});
      double c1 = 0.0, c2 = 0.0;
      if (ref.x >= 0.0 && ref.x <= spec.width - 1.0 && ref.y >= 0.0 && ref.y <= spec.height - 1.0) {
        std::tie(c1, c2) = tissue.concentrations(ref.x, ref.y);
      }
      for (int c = 0; c < 3; ++c) {
        const double v = emission(c, 0) * c1 + emission(c, 1) * c2;
        out.moving.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }

  if (spec.noiseSigma > 0.0) {
    for (double& s : out.reference.data()) s = std::clamp(s + rng.normal(0.0, spec.noiseSigma), 0.0, 1.0);
    for (double& s : out.moving.data()) s = std::clamp(s + rng.normal(0.0, spec.noiseSigma), 0.0, 1.0);
  }

  // Landmarks sit on tissue visible in both frames: solid concentration plus
  // a full 3x3 neighborhood inside both Otsu masks of the rendered images.
  const TissueMask movingMask = pre::otsu_mask(out.moving, pre::MaskPolarity::brightForeground);
  const TissueMask referenceMask = pre::otsu_mask(out.reference, pre::MaskPolarity::darkForeground);
  auto solidly_inside = [](const TissueMask& mask, PixelCoord p) {
    const int x = static_cast<int>(std::lround(p.x));
    const int y = static_cast<int>(std::lround(p.y));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (!mask.at(y + dy, x + dx)) return false;
    return true;
  };

  const double margin = 16.0;
  int placed = 0;
  int attempts = 0;
  while (placed < spec.landmarkCount && attempts < 50000) {
    ++attempts;
    const PixelCoord p{rng.uniform(margin, spec.width - 1.0 - margin),
                       rng.uniform(margin, spec.height - 1.0 - margin)};
    const PixelCoord q = out.truthWarp.apply(p);
    if (q.x < margin || q.x > spec.width - 1.0 - margin || q.y < margin || q.y > spec.height - 1.0 - margin)
      continue;
    const auto [c1, c2] = tissue.concentrations(q.x, q.y);
    if (c1 + c2 < 0.6) continue;
    if (!solidly_inside(movingMask, p) || !solidly_inside(referenceMask, q)) continue;
    metrics::LandmarkPair lm;
    lm.movingPoint = p;
    lm.referencePoint = q;
    lm.label = "p" + std::to_string(placed);
    out.truthLandmarks.push_back(lm);
    ++placed;
  }
  return out;
}

TpsWarp fit_truth_tps(const TruthWarp& warp, int width, int height, int gridStep) {
  // lattice includes the far edges so the fit never extrapolates in-bounds
  std::vector<double> xs, ys;
  for (int x = 0; x < width - 1; x += gridStep) xs.push_back(x);
  xs.push_back(width - 1.0);
  for (int y = 0; y < height - 1; y += gridStep) ys.push_back(y);
  ys.push_back(height - 1.0);

  feat::MatchSet grid;
  for (double y : ys) {
    for (double x : xs) {
      feat::Match m;
      m.movingPoint = {x, y};
      m.referencePoint = warp.apply(m.movingPoint);
      grid.push_back(m);
    }
  }
  // forward orientation: control points on the moving side
  return reg::estimate_tps_forward(grid, 0.0);
}

}  // namespace histreg::synth
