#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "histreg/core/image.hpp"
#include "histreg/core/transform.hpp"
#include "histreg/eval/metrics.hpp"

namespace histreg::synth {

/// Parameters for one synthetic pair. Everything downstream of the seed is
/// deterministic, so identical specs produce bit-identical pairs.
struct SynthSpec {
  std::uint64_t seed = 1;
  int width = 800;
  int height = 600;
  Eigen::Matrix<double, 3, 2> stainMatrix = defaultStains();
  int blobCount = 60;
  AffineTransform2D affine;              // ground-truth global motion
  double deformAmplitude = 0.0;          // pixels
  double deformScale = 200.0;            // sinusoid wavelength, pixels
  double noiseSigma = 0.005;             // additive intensity noise
  int landmarkCount = 10;

  static Eigen::Matrix<double, 3, 2> defaultStains();
};

/// Exact moving-to-reference map: affine(p + D(p)) with D a pair of
/// orthogonal sinusoids. Analytic, so ground truth carries no interpolation
/// error; a diffeomorphism while deformAmplitude < deformScale / (2*pi).
struct TruthWarp {
  AffineTransform2D affine;
  double amplitude = 0.0;
  double wavelength = 200.0;
  double phaseX = 0.0;
  double phaseY = 0.0;

  PixelCoord apply(PixelCoord p) const;
  PointMap map() const;
};

struct SynthPair {
  ImageBuffer moving;      // multimodal-like: bright tissue on dark background
  ImageBuffer reference;   // brightfield-like: dark tissue on white background
  TruthWarp truthWarp;     // maps moving coordinates to reference coordinates
  std::vector<metrics::LandmarkPair> truthLandmarks;  // raw moving coords + reference coords
};

SynthPair generate_pair(const SynthSpec& spec);

/// Serializable stand-in for the truth warp: the exact affine when there is
/// no deformation, otherwise an interpolating TPS fit on a lattice of exact
/// correspondences.
TpsWarp fit_truth_tps(const TruthWarp& warp, int width, int height, int gridStep = 32);

}  // namespace histreg::synth
