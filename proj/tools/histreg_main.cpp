// Command-line front end: batch registration runs, transform re-evaluation,
// synthetic pair generation, and keypoint statistics over metric files.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "histreg/core/serialize.hpp"
#include "histreg/eval/landmarks.hpp"
#include "histreg/eval/metrics.hpp"
#include "histreg/io/image_io.hpp"
#include "histreg/pipeline/run.hpp"
#include "histreg/synth/synthgen.hpp"

namespace fs = std::filesystem;
using namespace histreg;

namespace {

int cmd_run(const std::string& configPath, const std::string& methodOverride, const std::string& invertOverride,
            std::optional<std::uint64_t> seedOverride, std::optional<int> jobsOverride,
            const std::string& outOverride) {
  run::PipelineConfig cfg = run::parse_config_file(configPath);
  if (!methodOverride.empty()) {
    cfg.methods.clear();
    std::istringstream is(methodOverride);
    std::string m;
    while (std::getline(is, m, ',')) cfg.methods.push_back(run::color_method_from_string(m));
  }
  if (!invertOverride.empty()) {
    if (invertOverride == "both")
      cfg.invertMoving = run::InvertSetting::both;
    else if (invertOverride == "true" || invertOverride == "on")
      cfg.invertMoving = run::InvertSetting::on;
    else if (invertOverride == "false" || invertOverride == "off")
      cfg.invertMoving = run::InvertSetting::off;
    else
      throw Error("--invert expects true|false|both");
  }
  if (seedOverride) cfg.seed = *seedOverride;
  if (jobsOverride) cfg.jobs = *jobsOverride;
  if (!outOverride.empty()) cfg.outDir = outOverride;

  const run::RunReport report = run::run_pipeline(cfg);
  std::cout << "pairs succeeded: " << report.succeeded << ", failed: " << report.failed << '\n';
  std::cout << "outputs under " << cfg.outDir << '\n';
  return report.succeeded > 0 ? 0 : 1;
}

int cmd_eval(const std::string& transform, const std::string& movingLm, const std::string& referenceLm,
             const std::string& referenceImage, const std::string& out) {
  const metrics::PairMetrics pm = run::eval_only(transform, movingLm, referenceLm, referenceImage, out);
  std::cout << "points: " << pm.pointCount;
  if (pm.expectedCountWarning) std::cout << " (warning: expected 10)";
  std::cout << "\nmedian distance: " << format_double(pm.medianPointDistance) << " px\n";
  std::cout << "median rtre: " << format_double(pm.medianRtre) << '\n';
  return 0;
}

int cmd_synth(const std::string& outDir, int count, std::uint64_t seed, int width, int height, double deformAmplitude,
              double deformScale, double noiseSigma, int blobs, int landmarks) {
  fs::create_directories(outDir);
  std::ofstream cfg(fs::path(outDir) / "histreg.cfg");
  cfg << "# generated synthetic batch\n";
  cfg << "methods = none\n";
  cfg << "invert_moving = true\n";
  cfg << "seed = " << seed << "\n";
  cfg << "out_dir = " << (fs::path(outDir) / "run").string() << "\n";

  for (int i = 0; i < count; ++i) {
    synth::SynthSpec spec;
    spec.seed = seed + static_cast<std::uint64_t>(i);
    spec.width = width;
    spec.height = height;
    spec.deformAmplitude = deformAmplitude;
    spec.deformScale = deformScale;
    spec.noiseSigma = noiseSigma;
    spec.blobCount = blobs;
    spec.landmarkCount = landmarks;
    // mild global motion derived deterministically from the pair index
    const double angle = (static_cast<double>((seed + i) % 21) - 10.0) * 0.015;
    const double s = 0.97 + 0.003 * static_cast<double>((seed + i) % 21);
    AffineTransform2D rot = AffineTransform2D::rotation(angle);
    rot.a11 *= s;
    rot.a12 *= s;
    rot.a21 *= s;
    rot.a22 *= s;
    rot.tx = static_cast<double>((seed + 3 * i) % 41) - 20.0;
    rot.ty = static_cast<double>((seed + 7 * i) % 41) - 20.0;
    spec.affine = rot;

    const synth::SynthPair pair = synth::generate_pair(spec);
    const std::string prefix = "pair_" + std::to_string(i);
    const fs::path base = fs::path(outDir);
    io::save_png(pair.moving, (base / (prefix + "_moving.png")).string());
    io::save_png(pair.reference, (base / (prefix + "_reference.png")).string());

    std::vector<metrics::Landmark> movingLm, referenceLm;
    for (const auto& lm : pair.truthLandmarks) {
      movingLm.push_back({lm.label, lm.movingPoint});
      referenceLm.push_back({lm.label, lm.referencePoint});
    }
    metrics::write_landmarks((base / (prefix + "_moving_landmarks.txt")).string(), movingLm);
    metrics::write_landmarks((base / (prefix + "_reference_landmarks.txt")).string(), referenceLm);

    if (deformAmplitude == 0.0) {
      write_transform_file((base / (prefix + "_truth_transform.txt")).string(), Transform(pair.truthWarp.affine));
    } else {
      write_transform_file((base / (prefix + "_truth_transform.txt")).string(),
                           Transform(synth::fit_truth_tps(pair.truthWarp, width, height)));
    }

    cfg << "pair = " << (base / (prefix + "_moving.png")).string() << ", "
        << (base / (prefix + "_reference.png")).string() << ", "
        << (base / (prefix + "_moving_landmarks.txt")).string() << ", "
        << (base / (prefix + "_reference_landmarks.txt")).string() << "\n";
    std::cout << prefix << " written\n";
  }
  std::cout << "config: " << (fs::path(outDir) / "histreg.cfg").string() << '\n';
  return 0;
}

int cmd_stats(const std::string& csvPath) {
  std::ifstream is(csvPath);
  if (!is) throw IoError("cannot open: " + csvPath);
  std::string line;
  std::getline(is, line);  // header
  std::vector<int> counts;
  std::vector<double> medians;
  while (std::getline(is, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    while (fields.size() < 7) fields.emplace_back();
    if (fields[1] == "ALL") continue;  // summary rows
    if (!fields[6].empty()) counts.push_back(std::stoi(fields[6]));
    if (!fields[2].empty()) medians.push_back(std::stod(fields[2]));
  }
  if (counts.empty()) {
    std::cout << "no per-pair rows found\n";
    return 1;
  }
  const metrics::KeypointStats ks = metrics::keypoint_stats(counts);
  std::cout << "keypoints: min " << ks.min << ", max " << ks.max << ", median " << format_double(ks.median)
            << ", mean " << format_double(ks.mean) << '\n';
  if (!medians.empty()) {
    std::cout << "mm_rtre " << format_double(metrics::mmrtre(medians)) << '\n';
    std::cout << "am_rtre " << format_double(metrics::amrtre(medians)) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histology image registration pipeline"};
  app.require_subcommand(1);

  // run
  std::string configPath, methodOverride, invertOverride, outOverride;
  std::optional<std::uint64_t> seedOverride;
  std::optional<int> jobsOverride;
  CLI::App* runCmd = app.add_subcommand("run", "execute a batch registration run");
  runCmd->add_option("--config", configPath, "config file")->required();
  runCmd->add_option("--method", methodOverride, "override methods (comma separated)");
  runCmd->add_option("--invert", invertOverride, "override inversion: true|false|both");
  runCmd->add_option("--seed", seedOverride, "override seed");
  runCmd->add_option("--jobs", jobsOverride, "worker count");
  runCmd->add_option("--out", outOverride, "override output directory");

  // eval
  std::string transformPath, movingLmPath, referenceLmPath, referenceImagePath, evalOut = "eval.csv";
  CLI::App* evalCmd = app.add_subcommand("eval", "apply a stored transform to landmarks and score");
  evalCmd->add_option("--transform", transformPath, "transform file")->required();
  evalCmd->add_option("--moving-landmarks", movingLmPath, "moving-side landmark file")->required();
  evalCmd->add_option("--reference-landmarks", referenceLmPath, "reference-side landmark file")->required();
  evalCmd->add_option("--reference-image", referenceImagePath, "reference image (for the diagonal)")->required();
  evalCmd->add_option("--out", evalOut, "output CSV path");

  // synth
  std::string synthOut = "synth";
  int synthCount = 5, synthWidth = 900, synthHeight = 700, synthBlobs = 60, synthLandmarks = 10;
  std::uint64_t synthSeed = 1;
  double synthDeform = 6.0, synthScale = 220.0, synthNoise = 0.01;
  CLI::App* synthCmd = app.add_subcommand("synth", "generate synthetic ground-truth pairs");
  synthCmd->add_option("--out", synthOut, "output directory");
  synthCmd->add_option("--count", synthCount, "number of pairs");
  synthCmd->add_option("--seed", synthSeed, "base seed");
  synthCmd->add_option("--width", synthWidth, "image width");
  synthCmd->add_option("--height", synthHeight, "image height");
  synthCmd->add_option("--deform-amplitude", synthDeform, "deformation amplitude, px");
  synthCmd->add_option("--deform-scale", synthScale, "deformation wavelength, px");
  synthCmd->add_option("--noise", synthNoise, "additive noise sigma");
  synthCmd->add_option("--blobs", synthBlobs, "tissue blob count");
  synthCmd->add_option("--landmarks", synthLandmarks, "landmarks per pair");

  // stats
  std::string statsCsv;
  CLI::App* statsCmd = app.add_subcommand("stats", "keypoint statistics over a metrics CSV");
  statsCmd->add_option("--csv", statsCsv, "metrics.csv from a run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (runCmd->parsed())
      return cmd_run(configPath, methodOverride, invertOverride, seedOverride, jobsOverride, outOverride);
    if (evalCmd->parsed()) return cmd_eval(transformPath, movingLmPath, referenceLmPath, referenceImagePath, evalOut);
    if (synthCmd->parsed())
      return cmd_synth(synthOut, synthCount, synthSeed, synthWidth, synthHeight, synthDeform, synthScale, synthNoise,
                       synthBlobs, synthLandmarks);
    if (statsCmd->parsed()) return cmd_stats(statsCsv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
