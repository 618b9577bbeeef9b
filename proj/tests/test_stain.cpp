#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "histreg/core/rng.hpp"
#include "histreg/stain/lab.hpp"
#include "histreg/stain/stain_matrix.hpp"

using namespace histreg;
using namespace histreg::stain;

namespace {

ImageBuffer random_rgb(int w, int h, Rng& rng, double lo = 0.05, double hi = 0.95) {
  ImageBuffer img(w, h, 3);
  for (double& s : img.data()) s = rng.uniform(lo, hi);
  return img;
}

TissueMask full_mask(int w, int h) { return TissueMask(w, h, true); }

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

Eigen::Matrix<double, 3, 2> he_stains() {
  Eigen::Matrix<double, 3, 2> w;
  w.col(0) = Eigen::Vector3d(0.651, 0.701, 0.290).normalized();
  w.col(1) = Eigen::Vector3d(0.070, 0.990, 0.110).normalized();
  return w;
}

/// Beer-Lambert rendering of random two-stain concentrations; a slice of the
/// pixels is near-pure in each stain so the angular extremes reach the
/// generator directions.
ImageBuffer render_two_stain(const Eigen::Matrix<double, 3, 2>& stains, int w, int h, Rng& rng,
                             double noise = 0.0) {
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double c1, c2;
      const double u = rng.uniform();
      if (u < 0.15) {
        c1 = rng.uniform(0.3, 1.2);
        c2 = rng.uniform(0.0, 0.02);
      } else if (u < 0.30) {
        c1 = rng.uniform(0.0, 0.02);
        c2 = rng.uniform(0.3, 1.2);
      } else {
        c1 = rng.uniform(0.05, 1.0);
        c2 = rng.uniform(0.05, 1.0);
      }
      for (int c = 0; c < 3; ++c) {
        const double od = stains(c, 0) * c1 + stains(c, 1) * c2;
        img.at(c, y, x) = std::clamp(std::pow(10.0, -od) + noise * rng.normal(), 1e-4, 1.0);
      }
    }
  return img;
}

}  // namespace

TEST_CASE("rgb_to_lab round trip") {
  Rng rng(211);
  const ImageBuffer img = random_rgb(16, 16, rng);
  const ImageBuffer back = lab_to_rgb(rgb_to_lab(img));
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) < 1e-4);
}

TEST_CASE("rgb_to_lab handles pure black via the log clamp") {
  const ImageBuffer black(2, 2, 3, 0.0);
  const ImageBuffer lab = rgb_to_lab(black);
  for (double s : lab.data()) CHECK(std::isfinite(s));
}

TEST_CASE("rgb_to_lab matches an independently transcribed matrix product") {
  // second, direct transcription of the published constants
  const double rgb[3] = {0.3, 0.55, 0.72};
  const double L = 0.3811 * rgb[0] + 0.5783 * rgb[1] + 0.0402 * rgb[2];
  const double M = 0.1967 * rgb[0] + 0.7244 * rgb[1] + 0.0782 * rgb[2];
  const double S = 0.0241 * rgb[0] + 0.1288 * rgb[1] + 0.8444 * rgb[2];
  const double lL = std::log10(L), lM = std::log10(M), lS = std::log10(S);
  const double expectL = (lL + lM + lS) / std::sqrt(3.0);
  const double expectA = (lL + lM - 2.0 * lS) / std::sqrt(6.0);
  const double expectB = (lL - lM) / std::sqrt(2.0);

  ImageBuffer img(1, 1, 3);
  img.at(0, 0, 0) = rgb[0];
  img.at(1, 0, 0) = rgb[1];
  img.at(2, 0, 0) = rgb[2];
  const ImageBuffer lab = rgb_to_lab(img);
  CHECK(lab.at(0, 0, 0) == doctest::Approx(expectL).epsilon(1e-12));
  CHECK(lab.at(1, 0, 0) == doctest::Approx(expectA).epsilon(1e-12));
  CHECK(lab.at(2, 0, 0) == doctest::Approx(expectB).epsilon(1e-12));
}

TEST_CASE("reinhard with the source's own stats is the identity") {
  Rng rng(223);
  const ImageBuffer img = random_rgb(20, 20, rng);
  const TissueMask mask = full_mask(20, 20);
  const LabStats own = compute_lab_stats(rgb_to_lab(img), mask);
  const ImageBuffer out = reinhard_transfer(img, mask, own);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-4);
}

TEST_CASE("reinhard pre-clamp masked stats equal the target stats") {
  Rng rng(227);
  const ImageBuffer img = random_rgb(24, 24, rng);
  TissueMask mask(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) mask.set(y, x, (x + y) % 3 != 0);

  LabStats target;
  target.mean = {-0.6, 0.02, -0.03};
  target.stdDev = {0.2, 0.01, 0.015};

  const ImageBuffer lab = rgb_to_lab(img);
  const LabStats src = compute_lab_stats(lab, mask);
  const ImageBuffer shifted = reinhard_transfer_lab(lab, mask, src, target);
  const LabStats result = compute_lab_stats(shifted, mask);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(result.mean[c] - target.mean[c]) < 1e-6);
    CHECK(std::abs(result.stdDev[c] - target.stdDev[c]) < 1e-6);
  }
}

TEST_CASE("reinhard moves channel means toward the target (per-pixel oracle)") {
  Rng rng(229);
  // pink-shifted source
  ImageBuffer img(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      img.at(0, y, x) = rng.uniform(0.7, 0.95);
      img.at(1, y, x) = rng.uniform(0.4, 0.6);
      img.at(2, y, x) = rng.uniform(0.5, 0.7);
    }
  const TissueMask mask = full_mask(16, 16);

  // purple-ish target statistics
  Rng rng2(231);
  ImageBuffer targetImg(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      targetImg.at(0, y, x) = rng2.uniform(0.45, 0.65);
      targetImg.at(1, y, x) = rng2.uniform(0.2, 0.4);
      targetImg.at(2, y, x) = rng2.uniform(0.6, 0.85);
    }
  const LabStats target = compute_lab_stats(rgb_to_lab(targetImg), mask);

  const ImageBuffer lab = rgb_to_lab(img);
  const LabStats src = compute_lab_stats(lab, mask);
  const ImageBuffer out = reinhard_transfer(img, mask, target);

  // independent scalar re-computation per pixel
  Rng probe(233);
  for (int trial = 0; trial < 30; ++trial) {
    const int x = static_cast<int>(probe.uniformIndex(16));
    const int y = static_cast<int>(probe.uniformIndex(16));
    double expectedLab[3];
    for (int c = 0; c < 3; ++c)
      expectedLab[c] = (lab.at(c, y, x) - src.mean[c]) * (target.stdDev[c] / src.stdDev[c]) + target.mean[c];
    ImageBuffer one(1, 1, 3);
    for (int c = 0; c < 3; ++c) one.at(c, 0, 0) = expectedLab[c];
    const ImageBuffer rgb = lab_to_rgb(one);
    for (int c = 0; c < 3; ++c) CHECK(out.at(c, y, x) == doctest::Approx(std::clamp(rgb.at(c, 0, 0), 0.0, 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("reinhard rejects degenerate source stats") {
  const ImageBuffer img(8, 8, 3, 0.5);  // constant -> zero sigma
  const TissueMask mask = full_mask(8, 8);
  const LabStats src = compute_lab_stats(rgb_to_lab(img), mask);
  LabStats target;
  target.mean = {0, 0, 0};
  target.stdDev = {1, 1, 1};
  CHECK_THROWS_AS(reinhard_transfer_lab(rgb_to_lab(img), mask, src, target), DegenerateStats);
}

TEST_CASE("optical density basics") {
  ImageBuffer img(1, 1, 3);
  img.at(0, 0, 0) = 1.0;    // I = I0 -> OD 0
  img.at(1, 0, 0) = 0.1;    // I = I0/10 -> OD 1
  img.at(2, 0, 0) = 0.0;    // clamp -> OD 6
  const Eigen::MatrixXd od = to_optical_density(img, 1.0);
  CHECK(od(0, 0) == doctest::Approx(0.0));
  CHECK(od(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(od(2, 0) == doctest::Approx(6.0).epsilon(1e-12));

  const ImageBuffer back = od_to_rgb(od, 1, 1, 1.0);
  CHECK(back.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(back.at(1, 0, 0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("macenko recovers generator stain vectors within 2 degrees") {
  Rng rng(239);
  const Eigen::Matrix<double, 3, 2> truth = he_stains();
  const ImageBuffer img = render_two_stain(truth, 80, 80, rng);
  MacenkoConfig cfg;
  cfg.backgroundIntensity = 1.0;
  const StainModel model = macenko_estimate(img, full_mask(80, 80), cfg);
  CHECK(angle_deg(model.stainMatrix.col(0), truth.col(0)) < 2.0);
  CHECK(angle_deg(model.stainMatrix.col(1), truth.col(1)) < 2.0);
  CHECK(std::abs(model.stainMatrix.col(0).norm() - 1.0) < 1e-9);
  CHECK(std::abs(model.stainMatrix.col(1).norm() - 1.0) < 1e-9);
}

TEST_CASE("macenko flags single-stain input as rank deficient") {
  Rng rng(241);
  ImageBuffer img(40, 40, 3);
  const Eigen::Vector3d stain = Eigen::Vector3d(0.65, 0.70, 0.29).normalized();
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const double c = rng.uniform(0.3, 1.2);
      for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = std::pow(10.0, -stain(ch) * c);
    }
  MacenkoConfig cfg;
  cfg.backgroundIntensity = 1.0;
  CHECK_THROWS_AS(macenko_estimate(img, full_mask(40, 40), cfg), RankDeficient);
}

TEST_CASE("macenko on a pure-white image reports insufficient tissue") {
  const ImageBuffer img(40, 40, 3, 1.0);
  MacenkoConfig cfg;
  cfg.backgroundIntensity = 1.0;
  CHECK_THROWS_AS(macenko_estimate(img, full_mask(40, 40), cfg), InsufficientTissue);
}

TEST_CASE("macenko invariant to uniform brightness scaling with auto I0") {
  Rng rng(251);
  const Eigen::Matrix<double, 3, 2> truth = he_stains();
  const ImageBuffer img = render_two_stain(truth, 64, 64, rng);
  const StainModel base = macenko_estimate(img, full_mask(64, 64));  // auto I0

  for (double scale : {0.5, 0.7, 0.9}) {
    ImageBuffer scaled = img;
    for (double& s : scaled.data()) s *= scale;
    const StainModel m = macenko_estimate(scaled, full_mask(64, 64));
    CHECK(angle_deg(m.stainMatrix.col(0), base.stainMatrix.col(0)) < 2.0);
    CHECK(angle_deg(m.stainMatrix.col(1), base.stainMatrix.col(1)) < 2.0);
  }
}

TEST_CASE("vahadane recovers stains and reconstructs the OD cloud") {
  Rng rng(257);
  const Eigen::Matrix<double, 3, 2> truth = he_stains();
  const ImageBuffer img = render_two_stain(truth, 80, 80, rng, 0.002);
  VahadaneConfig cfg;
  cfg.init.backgroundIntensity = 1.0;
  const VahadaneResult result = vahadane_estimate(img, full_mask(80, 80), cfg);
  CHECK(angle_deg(result.model.stainMatrix.col(0), truth.col(0)) < 5.0);
  CHECK(angle_deg(result.model.stainMatrix.col(1), truth.col(1)) < 5.0);
  CHECK(result.relativeReconstructionError < 0.05);

  // objective non-increasing across outer iterations
  for (std::size_t i = 1; i < result.objectiveTrace.size(); ++i)
    CHECK(result.objectiveTrace[i] <= result.objectiveTrace[i - 1] + 1e-9 * std::abs(result.objectiveTrace[i - 1]));
}

TEST_CASE("vahadane surfaces RankDeficient from the initializer on rank-1 data") {
  Rng rng(263);
  ImageBuffer img(40, 40, 3);
  const Eigen::Vector3d stain = Eigen::Vector3d(0.65, 0.70, 0.29).normalized();
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const double c = rng.uniform(0.3, 1.2);
      for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = std::pow(10.0, -stain(ch) * c);
    }
  VahadaneConfig cfg;
  cfg.init.backgroundIntensity = 1.0;
  CHECK_THROWS_AS(vahadane_estimate(img, full_mask(40, 40), cfg), RankDeficient);
}

TEST_CASE("stain_normalize is the identity when both models agree") {
  Rng rng(269);
  const ImageBuffer img = render_two_stain(he_stains(), 48, 48, rng);
  MacenkoConfig mcfg;
  mcfg.backgroundIntensity = 1.0;
  mcfg.anglePercentile = 0.0;  // the model cone must cover every pixel for an exact NNLS round trip
  const StainModel model = macenko_estimate(img, full_mask(48, 48), mcfg);
  const ImageBuffer out = stain_normalize(img, model, model);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-3);
}

TEST_CASE("stain_normalize rescales concentrations by the stated factors") {
  Rng rng(271);
  const ImageBuffer img = render_two_stain(he_stains(), 48, 48, rng);
  MacenkoConfig mcfg;
  mcfg.backgroundIntensity = 1.0;
  const StainModel src = macenko_estimate(img, full_mask(48, 48), mcfg);
  StainModel dst = src;
  dst.maxConcentration(0) *= 1.5;
  dst.maxConcentration(1) *= 0.75;
  const ImageBuffer out = stain_normalize(img, src, dst);

  // concentrations of the output differ from the input by exactly the two
  // per-stain scale factors (checked through the shared stain basis)
  const Eigen::MatrixXd odIn = to_optical_density(img, 1.0);
  const Eigen::MatrixXd odOut = to_optical_density(out, 1.0);
  Rng probe(277);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index i = static_cast<Eigen::Index>(probe.uniformIndex(static_cast<std::size_t>(odIn.cols())));
    const Eigen::Vector2d cIn = nnls2(src.stainMatrix, odIn.col(i));
    const Eigen::Vector2d cOut = nnls2(src.stainMatrix, odOut.col(i));
    if (cIn(0) > 0.05 && cIn(1) > 0.05 && cIn(0) * 1.5 < 5.5 && cOut.minCoeff() >= 0.0) {
      CHECK(cOut(0) == doctest::Approx(cIn(0) * 1.5).epsilon(5e-2));
      CHECK(cOut(1) == doctest::Approx(cIn(1) * 0.75).epsilon(5e-2));
    }
  }
}

TEST_CASE("stain_normalize to a rotated basis lets the estimator recover the target") {
  Rng rng(281);
  const Eigen::Matrix<double, 3, 2> truth = he_stains();
  const ImageBuffer img = render_two_stain(truth, 96, 96, rng);
  MacenkoConfig mcfg;
  mcfg.backgroundIntensity = 1.0;
  const StainModel src = macenko_estimate(img, full_mask(96, 96), mcfg);

  StainModel target = src;
  Eigen::Matrix<double, 3, 2> w;
  w.col(0) = Eigen::Vector3d(0.55, 0.76, 0.35).normalized();
  w.col(1) = Eigen::Vector3d(0.18, 0.92, 0.20).normalized();
  target.stainMatrix = w;

  const ImageBuffer recolored = stain_normalize(img, src, target);
  const StainModel recovered = macenko_estimate(recolored, full_mask(96, 96), mcfg);
  CHECK(angle_deg(recovered.stainMatrix.col(0), w.col(0)) < 3.0);
  CHECK(angle_deg(recovered.stainMatrix.col(1), w.col(1)) < 3.0);
}

TEST_CASE("nnls2 agrees with exhaustive grid search on random problems") {
  Rng rng(283);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix<double, 3, 2> w;
    w.col(0) = Eigen::Vector3d(rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)).normalized();
    w.col(1) = Eigen::Vector3d(rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)).normalized();
    const Eigen::Vector3d od(rng.uniform(-0.2, 1.5), rng.uniform(-0.2, 1.5), rng.uniform(-0.2, 1.5));
    const Eigen::Vector2d c = nnls2(w, od);
    REQUIRE(c(0) >= 0.0);
    REQUIRE(c(1) >= 0.0);
    const double err = (od - w * c).squaredNorm();
    // coarse nonnegative grid search cannot beat the KKT solution
    for (double a = 0.0; a <= 3.0; a += 0.05)
      for (double b = 0.0; b <= 3.0; b += 0.05) {
        const double gridErr = (od - w * Eigen::Vector2d(a, b)).squaredNorm();
        CHECK(err <= gridErr + 1e-9);
      }
  }
}

TEST_CASE("stain model text serialization round trip") {
  Rng rng(307);
  const ImageBuffer img = render_two_stain(he_stains(), 48, 48, rng);
  MacenkoConfig cfg;
  cfg.backgroundIntensity = 1.0;
  const StainModel model = macenko_estimate(img, full_mask(48, 48), cfg);

  const auto path = std::filesystem::temp_directory_path() / "histreg_stain_model.txt";
  write_stain_model(path.string(), model);
  const StainModel back = read_stain_model(path.string());
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) CHECK(back.stainMatrix(r, c) == model.stainMatrix(r, c));
  CHECK(back.maxConcentration(0) == model.maxConcentration(0));
  CHECK(back.maxConcentration(1) == model.maxConcentration(1));
  CHECK(back.backgroundIntensity == model.backgroundIntensity);
  CHECK(back.converged == model.converged);
  std::filesystem::remove(path);
}
