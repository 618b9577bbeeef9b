#pragma once

#include <Eigen/Dense>
#include <optional>

#include "histreg/core/image.hpp"

namespace histreg::stain {

/// Two-stain optical-density model: columns of stainMatrix are unit-norm OD
/// color vectors (stain 1 = the more hematoxylin-like, i.e. larger blue OD
/// component); maxConcentration holds the per-stain 99th-percentile
/// concentration. backgroundIntensity is the I0 of the Beer-Lambert model.
struct StainModel {
  Eigen::Matrix<double, 3, 2> stainMatrix = Eigen::Matrix<double, 3, 2>::Zero();
  Eigen::Vector2d maxConcentration = Eigen::Vector2d::Ones();
  double backgroundIntensity = 1.0;
  bool converged = true;  // vahadane_estimate only; estimation warning, not an error

  void validate() const;  // throws Error when invariants are violated
};

struct MacenkoConfig {
  double odThreshold = 0.15;   // keep pixels with OD vector norm above this
  double anglePercentile = 0.01;
  std::optional<double> backgroundIntensity;  // nullopt: 99th-percentile intensity
};

struct VahadaneConfig {
  double sparsity = 0.1;
  int dictSize = 2;
  int iterations = 200;
  double relTolerance = 1e-6;
  MacenkoConfig init;  // deterministic initializer
};

/// OD = -log10(max(I, 1e-6) / I0) per channel over the whole image,
/// column-per-pixel (3 x N).
Eigen::MatrixXd to_optical_density(const ImageBuffer& img, double i0);

/// I = I0 * 10^-OD clamped to [0,1], reshaped back to an image.
ImageBuffer od_to_rgb(const Eigen::MatrixXd& od, int width, int height, double i0);

/// Macenko stain estimation: principal plane of the masked high-OD cloud,
/// stain vectors at the extreme angle quantiles.
/// Throws InsufficientTissue (< 100 usable pixels) or RankDeficient (second
/// eigenvalue < 1e-6 x first).
StainModel macenko_estimate(const ImageBuffer& img, const TissueMask& mask, const MacenkoConfig& cfg = {});

struct VahadaneResult {
  StainModel model;
  std::vector<double> objectiveTrace;  // one value per outer iteration
  double relativeReconstructionError = 0.0;
};

/// Sparse NMF stain estimation: min ||V - WH||_F^2 + sparsity * sum |H|,
/// W >= 0 with unit-norm columns, H >= 0. Multiplicative H updates alternate
/// with exact coordinate updates of the W columns; initialization comes from
/// macenko_estimate, so the whole solve is deterministic. Non-convergence is
/// reported through model.converged, not an error.
VahadaneResult vahadane_estimate(const ImageBuffer& img, const TissueMask& mask, const VahadaneConfig& cfg = {});

/// Per-pixel nonnegative decomposition of img under sourceModel, row rescale
/// by target/source maxConcentration, recomposition under targetModel.
ImageBuffer stain_normalize(const ImageBuffer& source, const StainModel& sourceModel, const StainModel& targetModel);

/// Nonnegative least squares for one OD pixel against a 3x2 stain matrix
/// (exact KKT enumeration).
Eigen::Vector2d nnls2(const Eigen::Matrix<double, 3, 2>& w, const Eigen::Vector3d& od);

/// Text serialization with 17-significant-digit entries.
void write_stain_model(const std::string& path, const StainModel& model);
StainModel read_stain_model(const std::string& path);

}  // namespace histreg::stain
