// Acceptance suite: one check per release criterion, each printed as a
// PASS/FAIL line with its measured runtime. Exit status is nonzero when any
// criterion fails. Tolerances are fixed here, not configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "histreg/core/resample.hpp"
#include "histreg/core/rng.hpp"
#include "histreg/eval/landmarks.hpp"
#include "histreg/eval/metrics.hpp"
#include "histreg/io/image_io.hpp"
#include "histreg/pipeline/run.hpp"
#include "histreg/preprocess/preprocess.hpp"
#include "histreg/registration/register_pair.hpp"
#include "histreg/registration/robust.hpp"
#include "histreg/stain/lab.hpp"
#include "histreg/stain/stain_matrix.hpp"
#include "histreg/stain/tiles.hpp"
#include "histreg/synth/synthgen.hpp"

using namespace histreg;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> check;
  double runtimeLimitSeconds = 0.0;  // 0 = unlimited
};

// ---------------------------------------------------------------------------
// 1. Metric fidelity: rtre / mmrtre / amrtre against a tiny independent
//    reference implementation, 1000 random landmark sets, 1e-12 relative.
// ---------------------------------------------------------------------------

// reference implementation, kept deliberately minimal
double ref_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
double ref_rtre(double mx, double my, double rx, double ry, double w, double h) {
  return std::sqrt((mx - rx) * (mx - rx) + (my - ry) * (my - ry)) / std::sqrt(w * w + h * h);
}
double ref_mm(const std::vector<double>& v) { return ref_median(v); }
double ref_am(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool check_metric_fidelity(std::string& detail) {
  Rng rng(11001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = 50 + static_cast<int>(rng.uniformIndex(2000));
    const int h = 50 + static_cast<int>(rng.uniformIndex(2000));
    const ImageBuffer ref(w, h, 1);
    const int count = 1 + static_cast<int>(rng.uniformIndex(20));
    std::vector<double> mine, theirs;
    for (int i = 0; i < count; ++i) {
      const double mx = rng.uniform(-100, 2100), my = rng.uniform(-100, 2100);
      const double rx = rng.uniform(-100, 2100), ry = rng.uniform(-100, 2100);
      const double a = metrics::rtre({{mx, my}, {rx, ry}, ""}, ref);
      const double b = ref_rtre(mx, my, rx, ry, w, h);
      worst = std::max(worst, std::abs(a - b) / std::max(b, 1e-300));
      mine.push_back(a);
      theirs.push_back(b);
    }
    const double mm = metrics::mmrtre(mine);
    const double am = metrics::amrtre(mine);
    worst = std::max(worst, std::abs(mm - ref_mm(theirs)) / std::max(ref_mm(theirs), 1e-300));
    worst = std::max(worst, std::abs(am - ref_am(theirs)) / std::max(ref_am(theirs), 1e-300));
  }
  // even-count median rule, pinned explicitly
  const bool evenRule = metrics::mmrtre({0.005, 0.015}) == 0.01 && metrics::mmrtre({0.01, 0.02, 0.03}) == 0.02;
  detail = "worst relative deviation " + std::to_string(worst);
  return worst < 1e-12 && evenRule;
}

// ---------------------------------------------------------------------------
// 2. Otsu exactness vs exhaustive threshold search, 100 random images.
// ---------------------------------------------------------------------------

int brute_otsu_split(const ImageBuffer& img) {
  const ImageBuffer gray = to_gray(img);
  std::vector<long long> hist(256, 0);
  for (double s : gray.data()) hist[static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(s * 256)), 0, 255))]++;
  double bestVar = -1.0;
  int bestT = 1;
  for (int t = 1; t < 256; ++t) {
    long long n0 = 0, n1 = 0;
    double s0 = 0, s1 = 0;
    for (int b = 0; b < t; ++b) {
      n0 += hist[static_cast<std::size_t>(b)];
      s0 += static_cast<double>(hist[static_cast<std::size_t>(b)]) * b;
    }
    for (int b = t; b < 256; ++b) {
      n1 += hist[static_cast<std::size_t>(b)];
      s1 += static_cast<double>(hist[static_cast<std::size_t>(b)]) * b;
    }
    if (n0 == 0 || n1 == 0) continue;
    const double m0 = s0 / static_cast<double>(n0), m1 = s1 / static_cast<double>(n1);
    const double var = static_cast<double>(n0) * static_cast<double>(n1) * (m0 - m1) * (m0 - m1);
    if (var > bestVar) {
      bestVar = var;
      bestT = t;
    }
  }
  return bestT;
}

bool check_otsu_exactness(std::string& detail) {
  Rng rng(11003);
  for (int trial = 0; trial < 100; ++trial) {
    ImageBuffer img(64, 64, 1);
    const int mode = static_cast<int>(rng.uniformIndex(3));
    const double muA = rng.uniform(0.05, 0.5), muB = rng.uniform(0.5, 0.95), sd = rng.uniform(0.01, 0.2);
    for (double& s : img.data()) {
      if (mode == 0)
        s = std::clamp(rng.uniform() < 0.5 ? rng.normal(muA, sd) : rng.normal(muB, sd), 0.0, 1.0);
      else if (mode == 1)
        s = rng.uniform();
      else
        s = std::round(rng.uniform() * 8.0) / 8.0;  // quantized plateaus exercise tie-breaking
    }
    const double expected = brute_otsu_split(img) / 256.0;
    if (pre::otsu_threshold(img) != expected) {
      detail = "threshold mismatch on trial " + std::to_string(trial);
      return false;
    }
    const TissueMask mask = pre::otsu_mask(img, pre::MaskPolarity::darkForeground);
    const ImageBuffer gray = to_gray(img);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (mask.at(y, x) != (gray.at(0, y, x) < expected)) {
          detail = "mask mismatch on trial " + std::to_string(trial);
          return false;
        }
  }
  detail = "100 images pixel-exact";
  return true;
}

// ---------------------------------------------------------------------------
// 3. Stain-estimation recovery on synthetic images.
// ---------------------------------------------------------------------------

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / M_PI;
}

bool check_stain_recovery(std::string& detail) {
  double macenkoSum = 0.0, vahadaneSum = 0.0, worstRecon = 0.0;
  int count = 0;
  for (int i = 0; i < 50; ++i) {
    synth::SynthSpec spec;
    spec.seed = 20000 + static_cast<std::uint64_t>(i);
    spec.width = 320;
    spec.height = 260;
    spec.blobCount = 48;
    const synth::SynthPair pair = synth::generate_pair(spec);
    const TissueMask mask = pre::otsu_mask(pair.reference, pre::MaskPolarity::darkForeground);

    stain::MacenkoConfig mcfg;
    mcfg.backgroundIntensity = 1.0;
    const stain::StainModel mm = stain::macenko_estimate(pair.reference, mask, mcfg);
    macenkoSum += 0.5 * (angle_deg(mm.stainMatrix.col(0), spec.stainMatrix.col(0)) +
                         angle_deg(mm.stainMatrix.col(1), spec.stainMatrix.col(1)));

    stain::VahadaneConfig vcfg;
    vcfg.init.backgroundIntensity = 1.0;
    const stain::VahadaneResult vr = stain::vahadane_estimate(pair.reference, mask, vcfg);
    vahadaneSum += 0.5 * (angle_deg(vr.model.stainMatrix.col(0), spec.stainMatrix.col(0)) +
                          angle_deg(vr.model.stainMatrix.col(1), spec.stainMatrix.col(1)));
    worstRecon = std::max(worstRecon, vr.relativeReconstructionError);
    ++count;
  }
  const double macenkoMean = macenkoSum / count;
  const double vahadaneMean = vahadaneSum / count;
  std::ostringstream os;
  os << "macenko mean " << macenkoMean << " deg, vahadane mean " << vahadaneMean << " deg, worst recon "
     << worstRecon;
  detail = os.str();
  return macenkoMean < 2.0 && vahadaneMean < 5.0 && worstRecon < 0.05;
}

// ---------------------------------------------------------------------------
// 4. Reinhard contract: pre-clamp masked stats equal the target within 1e-6.
// ---------------------------------------------------------------------------

bool check_reinhard_contract(std::string& detail) {
  Rng rng(11007);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 24 + static_cast<int>(rng.uniformIndex(60));
    const int h = 24 + static_cast<int>(rng.uniformIndex(60));
    ImageBuffer img(w, h, 3);
    for (double& s : img.data()) s = rng.uniform(0.02, 0.98);
    TissueMask mask(w, h);
    std::size_t kept = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool on = rng.uniform() < 0.7;
        mask.set(y, x, on);
        kept += on;
      }
    if (kept < 32) continue;

    stain::LabStats target;
    for (int c = 0; c < 3; ++c) {
      target.mean[c] = rng.uniform(-1.0, 0.2);
      target.stdDev[c] = rng.uniform(0.01, 0.4);
    }
    const ImageBuffer lab = stain::rgb_to_lab(img);
    const stain::LabStats src = stain::compute_lab_stats(lab, mask);
    const ImageBuffer shifted = stain::reinhard_transfer_lab(lab, mask, src, target);
    const stain::LabStats got = stain::compute_lab_stats(shifted, mask);
    for (int c = 0; c < 3; ++c) {
      worst = std::max(worst, std::abs(got.mean[c] - target.mean[c]));
      worst = std::max(worst, std::abs(got.stdDev[c] - target.stdDev[c]));
    }
  }
  detail = "worst stat deviation " + std::to_string(worst);
  return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// 5. Robust estimation: 200 planted trials, and a monotone IRLS objective.
// ---------------------------------------------------------------------------

bool check_robust_estimation(std::string& detail) {
  Rng rng(11009);
  int good = 0;
  bool monotone = true;
  for (int trial = 0; trial < 200; ++trial) {
    AffineTransform2D truth = AffineTransform2D::rotation(rng.uniform(-0.5, 0.5));
    const double s = rng.uniform(0.8, 1.25);
    truth.a11 *= s;
    truth.a12 *= s;
    truth.a21 *= s;
    truth.a22 *= s;
    truth.tx = rng.uniform(-60, 60);
    truth.ty = rng.uniform(-60, 60);

    reg::MatchSet matches;
    const int inlierCount = 80;
    for (int i = 0; i < inlierCount; ++i) {
      const PixelCoord p{rng.uniform(0, 600), rng.uniform(0, 600)};
      PixelCoord q = truth.apply(p);
      q.x += rng.normal(0.0, 1.0);
      q.y += rng.normal(0.0, 1.0);
      matches.push_back({p, q, 0});
    }
    for (int i = 0; i < 20; ++i)  // 80% inliers
      matches.push_back({{rng.uniform(0, 600), rng.uniform(0, 600)}, {rng.uniform(0, 600), rng.uniform(0, 600)}, 0});

    try {
      reg::RansacConfig rcfg;
      rcfg.seed = 500 + static_cast<std::uint64_t>(trial);
      const reg::RansacResult rr = reg::ransac_affine(matches, rcfg);
      const reg::TukeyResult tr = reg::tukey_refine(rr.inliers, rr.transform);
      for (std::size_t i = 1; i < tr.objectiveTrace.size(); ++i)
        if (tr.objectiveTrace[i] > tr.objectiveTrace[i - 1] + 1e-9 * std::max(1.0, tr.objectiveTrace[i - 1]))
          monotone = false;

      double sum = 0.0;
      for (int i = 0; i < inlierCount; ++i)
        sum += distance(tr.transform.apply(matches[static_cast<std::size_t>(i)].movingPoint),
                        truth.apply(matches[static_cast<std::size_t>(i)].movingPoint));
      if (sum / inlierCount < 0.5) ++good;
    } catch (const Error&) {
      // a failed trial simply does not count toward `good`
    }
  }
  detail = std::to_string(good) + "/200 trials under 0.5 px, objective monotone: " + (monotone ? "yes" : "no");
  return good >= 190 && monotone;
}

// ---------------------------------------------------------------------------
// 6. End-to-end registration on 20 synthetic pairs at max dim 1200.
// ---------------------------------------------------------------------------

ImageBuffer prep(const ImageBuffer& img, bool invertIt) {
  pre::PreprocessConfig cfg;
  ImageBuffer out = pre::contrast_stretch(img, cfg);
  if (invertIt) out = pre::invert(out);
  return pre::denoise(out, 1.0);
}

synth::SynthSpec e2e_spec(int index) {
  synth::SynthSpec spec;
  spec.seed = 30000 + static_cast<std::uint64_t>(index);
  spec.width = 1200;
  spec.height = 900;
  spec.blobCount = 70;
  spec.deformAmplitude = 8.0;
  spec.deformScale = 320.0;
  const double angle = ((index % 9) - 4) * 0.03;
  const double scale = 0.96 + 0.01 * (index % 8);
  AffineTransform2D a = AffineTransform2D::rotation(angle);
  a.a11 *= scale;
  a.a12 *= scale;
  a.a21 *= scale;
  a.a22 *= scale;
  a.tx = ((index * 13) % 50) - 25.0;
  a.ty = ((index * 29) % 50) - 25.0;
  spec.affine = a;
  return spec;
}

bool check_end_to_end(std::string& detail) {
  int goodRtre = 0;
  std::vector<double> pointMedians;
  double worstMedian = 0.0;
  for (int i = 0; i < 20; ++i) {
    const synth::SynthSpec spec = e2e_spec(i);
    const synth::SynthPair pair = synth::generate_pair(spec);
    const ImageBuffer moving = prep(pair.moving, true);
    const ImageBuffer reference = prep(pair.reference, false);

    reg::RegistrationConfig cfg;
    cfg.seed = 42;
    try {
      const reg::RegistrationResult result = reg::register_pair(moving, reference, cfg);
      const metrics::PairMetrics pm = metrics::point_eval(pair.truthLandmarks, result.forward_map(), pair.reference);
      if (pm.medianRtre < 0.01) ++goodRtre;
      worstMedian = std::max(worstMedian, pm.medianRtre);
      pointMedians.push_back(pm.medianPointDistance);
    } catch (const reg::RegistrationFailed&) {
      worstMedian = 1.0;
      pointMedians.push_back(1e9);
    }
  }
  const double medianPointDistance = metrics::median(pointMedians);
  std::ostringstream os;
  os << goodRtre << "/20 pairs with median rTRE < 0.01 (worst " << worstMedian << "), median point distance "
     << medianPointDistance << " px";
  detail = os.str();
  return goodRtre >= 18 && medianPointDistance < 10.0;
}

// ---------------------------------------------------------------------------
// 7. Inversion hypothesis: inversion increases post-filter keypoint counts.
// ---------------------------------------------------------------------------

bool check_inversion_hypothesis(std::string& detail) {
  std::vector<int> withInv, withoutInv;
  for (int i = 0; i < 20; ++i) {
    synth::SynthSpec spec;
    spec.seed = 40000 + static_cast<std::uint64_t>(i);
    spec.width = 700;
    spec.height = 560;
    spec.deformAmplitude = 5.0;
    spec.deformScale = 240.0;
    spec.affine = compose(AffineTransform2D::rotation(((i % 7) - 3) * 0.02),
                          AffineTransform2D::translation((i % 5) * 4.0 - 8.0, (i % 3) * 5.0 - 5.0));
    const synth::SynthPair pair = synth::generate_pair(spec);
    const ImageBuffer reference = prep(pair.reference, false);

    reg::RegistrationConfig cfg;
    cfg.seed = 7;
    for (const bool invert : {true, false}) {
      int count = 0;
      try {
        count = reg::register_pair(prep(pair.moving, invert), reference, cfg).keypointCount;
      } catch (const reg::RegistrationFailed&) {
        count = 0;
      }
      (invert ? withInv : withoutInv).push_back(count);
    }
  }
  std::vector<double> a(withInv.begin(), withInv.end()), b(withoutInv.begin(), withoutInv.end());
  const double medWith = metrics::median(a);
  const double medWithout = metrics::median(b);
  std::ostringstream os;
  os << "median keypoints with inversion " << medWith << ", without " << medWithout;
  detail = os.str();
  return medWith > medWithout;
}

// ---------------------------------------------------------------------------
// 8. Blend correctness: convex bound on random tilings, exact reassembly.
// ---------------------------------------------------------------------------

bool check_blend(std::string& detail) {
  Rng rng(11013);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 120 + static_cast<int>(rng.uniformIndex(260));
    const int h = 100 + static_cast<int>(rng.uniformIndex(200));
    const int tile = 48 + static_cast<int>(rng.uniformIndex(100));
    const int overlap = static_cast<int>(rng.uniformIndex(static_cast<std::size_t>(tile)));
    const stain::TileGrid grid = stain::TileGrid::cover(w, h, tile, overlap);
    std::vector<stain::Tile> tiles;
    for (int r = 0; r < grid.rows(); ++r)
      for (int c = 0; c < grid.cols(); ++c) {
        stain::Tile t;
        t.originX = grid.originsX()[c];
        t.originY = grid.originsY()[r];
        t.image = ImageBuffer(grid.tileWidth(c), grid.tileHeight(r), 1, rng.uniform());
        tiles.push_back(std::move(t));
      }
    const ImageBuffer out = stain::blend_tiles(tiles, grid, w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double lo = 2.0, hi = -1.0;
        for (const stain::Tile& t : tiles)
          if (x >= t.originX && x < t.originX + t.image.width() && y >= t.originY &&
              y < t.originY + t.image.height()) {
            lo = std::min(lo, t.image.at(0, 0, 0));
            hi = std::max(hi, t.image.at(0, 0, 0));
          }
        if (out.at(0, y, x) < lo - 1e-12 || out.at(0, y, x) > hi + 1e-12) {
          detail = "convex bound violated on trial " + std::to_string(trial);
          return false;
        }
      }
  }

  // bit-exact reassembly with zero overlap (content that quantizes exactly)
  Rng rng2(11017);
  ImageBuffer img(256, 192, 3);
  for (double& s : img.data()) s = static_cast<double>(rng2.uniformIndex(256)) / 255.0;
  const stain::TileGrid grid = stain::TileGrid::cover(256, 192, 64, 0);
  const fs::path dir = fs::temp_directory_path() / "histreg_acceptance_tiles";
  fs::remove_all(dir);
  stain::write_tile_dir(img, grid, dir.string());
  const ImageBuffer out = stain::apply_external_tiles(img, grid, dir.string(), /*postFilter=*/false);
  for (std::size_t i = 0; i < img.data().size(); ++i)
    if (out.data()[i] != img.data()[i]) {
      detail = "identity reassembly not bit-exact";
      fs::remove_all(dir);
      return false;
    }
  fs::remove_all(dir);
  detail = "100 tilings inside the convex bound; identity reassembly bit-exact";
  return true;
}

// ---------------------------------------------------------------------------
// 9. Determinism: a full synthetic sweep reproduces its metrics CSV
//    byte-for-byte under an identical config and seed.
// ---------------------------------------------------------------------------

bool check_determinism(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "histreg_acceptance_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);

  run::PipelineConfig cfg;
  cfg.methods = {run::ColorMethod::none, run::ColorMethod::reinhard};
  cfg.invertMoving = run::InvertSetting::both;
  cfg.seed = 777;
  cfg.outDir = (dir / "out").string();
  for (int i = 0; i < 3; ++i) {
    synth::SynthSpec spec;
    spec.seed = 50000 + static_cast<std::uint64_t>(i);
    spec.width = 420;
    spec.height = 340;
    spec.deformAmplitude = 4.0;
    spec.affine = AffineTransform2D::translation(8.0 - i * 3.0, i * 4.0 - 4.0);
    const synth::SynthPair pair = synth::generate_pair(spec);
    const std::string prefix = (dir / ("p" + std::to_string(i))).string();
    io::save_png(pair.moving, prefix + "_m.png");
    io::save_png(pair.reference, prefix + "_r.png");
    std::vector<metrics::Landmark> ml, rl;
    for (const auto& lm : pair.truthLandmarks) {
      ml.push_back({lm.label, lm.movingPoint});
      rl.push_back({lm.label, lm.referencePoint});
    }
    metrics::write_landmarks(prefix + "_ml.txt", ml);
    metrics::write_landmarks(prefix + "_rl.txt", rl);
    run::PairSpec p;
    p.id = "pair" + std::to_string(i);
    p.movingPath = prefix + "_m.png";
    p.referencePath = prefix + "_r.png";
    p.movingLandmarksPath = prefix + "_ml.txt";
    p.referenceLandmarksPath = prefix + "_rl.txt";
    cfg.pairs.push_back(p);
  }
  cfg.saveImages = false;

  auto slurp = [](const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  run::run_pipeline(cfg);
  const std::string first = slurp(fs::path(cfg.outDir) / "metrics.csv");
  run::run_pipeline(cfg);
  const std::string second = slurp(fs::path(cfg.outDir) / "metrics.csv");
  fs::remove_all(dir);

  detail = "sweep of 4 method combos x 3 pairs, " + std::to_string(first.size()) + " CSV bytes compared";
  return !first.empty() && first == second;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"metric-fidelity", check_metric_fidelity, 1.0},
      {"otsu-exactness", check_otsu_exactness, 10.0},
      {"stain-estimation-recovery", check_stain_recovery, 120.0},
      {"reinhard-contract", check_reinhard_contract, 0.0},
      {"robust-estimation", check_robust_estimation, 0.0},
      {"end-to-end-registration", check_end_to_end, 600.0},
      {"inversion-hypothesis", check_inversion_hypothesis, 0.0},
      {"blend-correctness", check_blend, 0.0},
      {"determinism", check_determinism, 0.0},
  };

  int failures = 0;
  for (Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.check(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.runtimeLimitSeconds > 0.0 && seconds > c.runtimeLimitSeconds) {
      ok = false;
      detail += " [runtime " + std::to_string(seconds) + " s exceeded limit " +
                std::to_string(c.runtimeLimitSeconds) + " s]";
    }
    std::printf("%s  %-28s (%.2f s)  %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), seconds, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
