#include "histreg/stain/stain_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "histreg/core/serialize.hpp"
#include "histreg/preprocess/preprocess.hpp"

namespace histreg::stain {

void StainModel::validate() const {
  for (int j = 0; j < 2; ++j) {
    const double norm = stainMatrix.col(j).norm();
    if (std::abs(norm - 1.0) > 1e-9) throw Error("StainModel: column " + std::to_string(j) + " not unit norm");
    if (stainMatrix.col(j).minCoeff() < 0.0) throw Error("StainModel: negative entry in column " + std::to_string(j));
  }
  const double cosAngle = std::clamp(stainMatrix.col(0).dot(stainMatrix.col(1)), -1.0, 1.0);
  if (std::acos(cosAngle) < std::numbers::pi / 180.0) throw Error("StainModel: stain columns nearly parallel");
  if (!(maxConcentration.array() >= 0.0).all() || !maxConcentration.allFinite())
    throw Error("StainModel: bad maxConcentration");
}

Eigen::MatrixXd to_optical_density(const ImageBuffer& img, double i0) {
  if (i0 <= 0.0) throw Error("to_optical_density: I0 must be > 0");
  if (img.channels() != 3) throw DimensionMismatch("to_optical_density: 3-channel input required");
  const std::size_t n = static_cast<std::size_t>(img.width()) * img.height();
  Eigen::MatrixXd od(3, static_cast<Eigen::Index>(n));
  for (int c = 0; c < 3; ++c) {
    auto plane = img.plane(c);
    for (std::size_t i = 0; i < n; ++i) od(c, static_cast<Eigen::Index>(i)) = -std::log10(std::max(plane[i], 1e-6) / i0);
  }
  return od;
}

ImageBuffer od_to_rgb(const Eigen::MatrixXd& od, int width, int height, double i0) {
  if (od.rows() != 3 || od.cols() != static_cast<Eigen::Index>(width) * height)
    throw DimensionMismatch("od_to_rgb: shape mismatch");
  ImageBuffer out(width, height, 3);
  for (int c = 0; c < 3; ++c) {
    auto plane = out.plane(c);
    for (Eigen::Index i = 0; i < od.cols(); ++i)
      plane[static_cast<std::size_t>(i)] = std::clamp(i0 * std::pow(10.0, -od(c, i)), 0.0, 1.0);
  }
  return out;
}

namespace {

double auto_background(const ImageBuffer& img) {
  return histreg::pre::nearest_rank_percentile(std::span<const double>(img.data()), 0.99);
}

/// Masked pixels whose OD vector norm clears the threshold, as a 3xN matrix.
Eigen::MatrixXd masked_high_od(const ImageBuffer& img, const TissueMask& mask, double i0, double odThreshold) {
  if (img.width() != mask.width() || img.height() != mask.height())
    throw DimensionMismatch("stain estimate: mask dimensions differ from image");
  std::vector<Eigen::Vector3d> cols;
  const int w = img.width(), h = img.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      Eigen::Vector3d od;
      for (int c = 0; c < 3; ++c) od(c) = -std::log10(std::max(img.at(c, y, x), 1e-6) / i0);
      if (od.norm() > odThreshold) cols.push_back(od);
    }
  Eigen::MatrixXd v(3, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = cols[i];
  return v;
}

/// Order columns so stain 1 has the larger blue-channel OD component
/// (tie-break on red, then green).
void order_columns(Eigen::Matrix<double, 3, 2>& w) {
  const auto& c0 = w.col(0);
  const auto& c1 = w.col(1);
  bool swap = false;
  if (c0(2) != c1(2)) {
    swap = c0(2) < c1(2);
  } else if (c0(0) != c1(0)) {
    swap = c0(0) < c1(0);
  } else {
    swap = c0(1) < c1(1);
  }
  if (swap) w.col(0).swap(w.col(1));
}

Eigen::Vector3d clamp_unit_nonneg(Eigen::Vector3d v) {
  // Fix sign toward the dominant orientation, zero out residual negatives.
  if (v.sum() < 0.0) v = -v;
  v = v.cwiseMax(0.0);
  const double n = v.norm();
  if (n < 1e-12) throw RankDeficient("stain vector collapsed to zero after nonnegative clamp");
  return v / n;
}

double percentile99(std::vector<double>& values) {
  if (values.empty()) return 1.0;
  return histreg::pre::nearest_rank_percentile(std::span<const double>(values.data(), values.size()), 0.99);
}

}  // namespace

Eigen::Vector2d nnls2(const Eigen::Matrix<double, 3, 2>& w, const Eigen::Vector3d& od) {
  const Eigen::Matrix2d g = w.transpose() * w;
  const Eigen::Vector2d b = w.transpose() * od;

  // Unconstrained solution first; fall back to the KKT boundary candidates.
  const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  if (std::abs(det) > 1e-12) {
    Eigen::Vector2d c;
    c(0) = (b(0) * g(1, 1) - b(1) * g(0, 1)) / det;
    c(1) = (b(1) * g(0, 0) - b(0) * g(1, 0)) / det;
    if (c(0) >= 0.0 && c(1) >= 0.0) return c;
  }

  auto residual = [&](const Eigen::Vector2d& c) { return (od - w * c).squaredNorm(); };
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double bestErr = residual(best);
  for (int axis = 0; axis < 2; ++axis) {
    if (g(axis, axis) < 1e-15) continue;
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    c(axis) = std::max(0.0, b(axis) / g(axis, axis));
    const double err = residual(c);
    if (err < bestErr) {
      bestErr = err;
      best = c;
    }
  }
  return best;
}

StainModel macenko_estimate(const ImageBuffer& img, const TissueMask& mask, const MacenkoConfig& cfg) {
  const double i0 = cfg.backgroundIntensity.value_or(auto_background(img));
  const Eigen::MatrixXd v = masked_high_od(img, mask, i0, cfg.odThreshold);
  if (v.cols() < 100) throw InsufficientTissue("macenko: only " + std::to_string(v.cols()) + " high-OD pixels");

  const Eigen::Vector3d mean = v.rowwise().mean();
  const Eigen::MatrixXd centered = v.colwise() - mean;
  const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(v.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // eigenvalues ascending: [2] largest, [1] second
  const double ev1 = eig.eigenvalues()(2);
  const double ev2 = eig.eigenvalues()(1);
  if (ev2 < 1e-6 * ev1) throw RankDeficient("macenko: OD cloud is effectively single-stain");

  Eigen::Vector3d e1 = eig.eigenvectors().col(2);
  Eigen::Vector3d e2 = eig.eigenvectors().col(1);
  // Orient the basis so the mean OD direction sits at angle zero; the stain
  // cone then lives inside (-pi/2, pi/2) and the quantiles are cut-safe.
  Eigen::Vector2d meanProj(mean.dot(e1), mean.dot(e2));
  if (meanProj.norm() < 1e-12) meanProj = Eigen::Vector2d(1.0, 0.0);
  meanProj.normalize();
  const Eigen::Vector3d a1 = meanProj(0) * e1 + meanProj(1) * e2;
  const Eigen::Vector3d a2 = -meanProj(1) * e1 + meanProj(0) * e2;

  std::vector<double> angles(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index i = 0; i < v.cols(); ++i)
    angles[static_cast<std::size_t>(i)] = std::atan2(v.col(i).dot(a2), v.col(i).dot(a1));
  std::sort(angles.begin(), angles.end());
  const std::size_t n = angles.size();
  auto rank = [n](double p) {
    std::size_t r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    return std::clamp<std::size_t>(r, 1, n) - 1;
  };
  const double aLo = angles[rank(cfg.anglePercentile)];
  const double aHi = angles[rank(1.0 - cfg.anglePercentile)];

  StainModel model;
  model.backgroundIntensity = i0;
  Eigen::Matrix<double, 3, 2> w;
  w.col(0) = clamp_unit_nonneg(std::cos(aLo) * a1 + std::sin(aLo) * a2);
  w.col(1) = clamp_unit_nonneg(std::cos(aHi) * a1 + std::sin(aHi) * a2);
  order_columns(w);
  model.stainMatrix = w;

  std::vector<double> conc0, conc1;
  conc0.reserve(n);
  conc1.reserve(n);
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    const Eigen::Vector2d c = nnls2(w, v.col(i));
    conc0.push_back(c(0));
    conc1.push_back(c(1));
  }
  model.maxConcentration(0) = percentile99(conc0);
  model.maxConcentration(1) = percentile99(conc1);
  model.validate();
  return model;
}

VahadaneResult vahadane_estimate(const ImageBuffer& img, const TissueMask& mask, const VahadaneConfig& cfg) {
  if (cfg.dictSize != 2) throw Error("vahadane: only dictSize 2 is supported");
  MacenkoConfig init = cfg.init;
  const double i0 = init.backgroundIntensity.value_or(auto_background(img));
  init.backgroundIntensity = i0;

  const StainModel seed = macenko_estimate(img, mask, init);
  const Eigen::MatrixXd v = masked_high_od(img, mask, i0, init.odThreshold);
  const Eigen::Index n = v.cols();

  Eigen::Matrix<double, 3, 2> w = seed.stainMatrix;
  Eigen::MatrixXd hMat(2, n);
  for (Eigen::Index i = 0; i < n; ++i) hMat.col(i) = nnls2(w, v.col(i)).cwiseMax(1e-8);

  auto objective = [&]() {
    return (v - w * hMat).squaredNorm() + cfg.sparsity * hMat.sum();
  };

  VahadaneResult result;
  double prev = objective();
  result.objectiveTrace.push_back(prev);
  bool converged = false;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // H: multiplicative update for the L1-penalized Frobenius objective
    // ||V-WH||^2 + lambda*sum(H): h <- h (W'v - lambda/2)+ / (W'Wh), the
    // majorize-minimize form that keeps the objective non-increasing.
    const Eigen::MatrixXd numer = ((w.transpose() * v).array() - 0.5 * cfg.sparsity).cwiseMax(0.0);
    const Eigen::MatrixXd denom = (w.transpose() * w) * hMat;
    hMat = hMat.array() * numer.array() / (denom.array() + 1e-12);

    // W: exact minimization column by column on the nonnegative unit sphere.
    for (int j = 0; j < 2; ++j) {
      const Eigen::MatrixXd resid = v - w.col(1 - j) * hMat.row(1 - j);
      Eigen::Vector3d dir = resid * hMat.row(j).transpose();
      dir = dir.cwiseMax(0.0);
      const double norm = dir.norm();
      if (norm > 1e-12) w.col(j) = dir / norm;
    }

    const double cur = objective();
    result.objectiveTrace.push_back(cur);
    const double rel = std::abs(prev - cur) / std::max(prev, 1e-300);
    prev = cur;
    if (rel < cfg.relTolerance) {
      converged = true;
      break;
    }
  }

  order_columns(w);
  StainModel model;
  model.backgroundIntensity = i0;
  model.stainMatrix = w;
  model.converged = converged;

  // Concentrations and the reported reconstruction error come from an
  // unpenalized per-pixel refit under the final dictionary; the sparsity
  // term only shapes the dictionary search.
  std::vector<double> conc0, conc1;
  conc0.reserve(static_cast<std::size_t>(n));
  conc1.reserve(static_cast<std::size_t>(n));
  double residSq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d c = nnls2(w, v.col(i));
    conc0.push_back(c(0));
    conc1.push_back(c(1));
    residSq += (v.col(i) - w * c).squaredNorm();
  }
  model.maxConcentration(0) = percentile99(conc0);
  model.maxConcentration(1) = percentile99(conc1);
  model.validate();

  result.relativeReconstructionError = std::sqrt(residSq) / std::max(v.norm(), 1e-300);
  result.model = model;
  return result;
}

void write_stain_model(const std::string& path, const StainModel& model) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# stain_model v1\n";
  os << "background_intensity " << format_double(model.backgroundIntensity) << '\n';
  os << "converged " << (model.converged ? 1 : 0) << '\n';
  os << "stain_matrix\n";
  for (int r = 0; r < 3; ++r)
    os << format_double(model.stainMatrix(r, 0)) << ' ' << format_double(model.stainMatrix(r, 1)) << '\n';
  os << "max_concentration " << format_double(model.maxConcentration(0)) << ' '
     << format_double(model.maxConcentration(1)) << '\n';
}

StainModel read_stain_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line, key;
  if (!std::getline(is, line) || line != "# stain_model v1") throw ParseError(path + ": missing header", 1);
  StainModel model;
  int converged = 1;
  if (!(is >> key >> model.backgroundIntensity) || key != "background_intensity")
    throw ParseError(path + ": missing background_intensity", 2);
  if (!(is >> key >> converged) || key != "converged") throw ParseError(path + ": missing converged", 3);
  model.converged = converged != 0;
  if (!(is >> key) || key != "stain_matrix") throw ParseError(path + ": missing stain_matrix", 4);
  for (int r = 0; r < 3; ++r)
    if (!(is >> model.stainMatrix(r, 0) >> model.stainMatrix(r, 1)))
      throw ParseError(path + ": bad stain_matrix row", 5 + r);
  if (!(is >> key >> model.maxConcentration(0) >> model.maxConcentration(1)) || key != "max_concentration")
    throw ParseError(path + ": missing max_concentration", 8);
  model.validate();
  return model;
}

ImageBuffer stain_normalize(const ImageBuffer& source, const StainModel& sourceModel, const StainModel& targetModel) {
  sourceModel.validate();
  targetModel.validate();
  const Eigen::MatrixXd od = to_optical_density(source, sourceModel.backgroundIntensity);
  Eigen::MatrixXd odOut(3, od.cols());
  const Eigen::Vector2d scale(
      targetModel.maxConcentration(0) / std::max(sourceModel.maxConcentration(0), 1e-12),
      targetModel.maxConcentration(1) / std::max(sourceModel.maxConcentration(1), 1e-12));
  for (Eigen::Index i = 0; i < od.cols(); ++i) {
    Eigen::Vector2d c = nnls2(sourceModel.stainMatrix, od.col(i));
    c = c.cwiseProduct(scale);
    odOut.col(i) = targetModel.stainMatrix * c;
  }
  return od_to_rgb(odOut, source.width(), source.height(), targetModel.backgroundIntensity);
}

}  // namespace histreg::stain
