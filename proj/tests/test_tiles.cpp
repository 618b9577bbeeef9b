#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "histreg/core/rng.hpp"
#include "histreg/io/image_io.hpp"
#include "histreg/stain/tiles.hpp"

using namespace histreg;
using namespace histreg::stain;
namespace fs = std::filesystem;

namespace {

ImageBuffer random_image(int w, int h, int ch, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(w, h, ch);
  for (double& s : img.data()) s = rng.uniform();
  return img;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("histreg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("tile grid covers the image with clamped last tiles") {
  const TileGrid g = TileGrid::cover(1200, 700, 512, 256);
  CHECK(g.originsX().front() == 0);
  CHECK(g.originsX().back() == 1200 - 512);
  CHECK(g.originsY().back() == 700 - 512);
  // union covers the image
  std::vector<bool> covered(1200, false);
  for (int c = 0; c < g.cols(); ++c)
    for (int x = g.originsX()[c]; x < g.originsX()[c] + g.tileWidth(c); ++x) covered[static_cast<std::size_t>(x)] = true;
  for (bool b : covered) CHECK(b);

  const TileGrid small = TileGrid::cover(300, 200, 512, 256);
  CHECK(small.cols() == 1);
  CHECK(small.rows() == 1);
  CHECK(small.tileWidth(0) == 300);
  CHECK(small.tileHeight(0) == 200);

  CHECK_THROWS_AS(TileGrid::cover(100, 100, 512, 512), Error);
}

TEST_CASE("blend single full-image tile is bit-exact") {
  const TileGrid g = TileGrid::cover(100, 80, 512, 256);
  const ImageBuffer img = random_image(100, 80, 3, 404);
  const std::vector<Tile> tiles = slice_tiles(img, g);
  REQUIRE(tiles.size() == 1);
  const ImageBuffer out = blend_tiles(tiles, g, 100, 80);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(out.data()[i] == img.data()[i]);
}

TEST_CASE("blend of identical overlapping tiles reproduces the content") {
  const TileGrid g = TileGrid::cover(768, 512, 512, 256);
  const ImageBuffer img = random_image(768, 512, 1, 405);
  const std::vector<Tile> tiles = slice_tiles(img, g);
  REQUIRE(tiles.size() > 1);
  const ImageBuffer out = blend_tiles(tiles, g, 768, 512);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-9);
}

TEST_CASE("blend ramp across a 256-px overlap follows the weight ratio (closed-form oracle)") {
  const TileGrid g = TileGrid::cover(768, 512, 512, 256);
  REQUIRE(g.cols() == 2);
  REQUIRE(g.rows() == 1);
  std::vector<Tile> tiles;
  tiles.push_back({ImageBuffer(512, 512, 1, 0.0), 0, 0});
  tiles.push_back({ImageBuffer(512, 512, 1, 1.0), 256, 0});
  const ImageBuffer out = blend_tiles(tiles, g, 768, 512);

  const double sigma = 512.0 / 4.0;
  const double center = (512.0 - 1.0) / 2.0;
  const int y = 200;
  double prev = -1.0;
  for (int x = 256; x < 512; ++x) {
    // tile-local gaussian weights; the y factors cancel in the ratio
    const double d1 = x - center;
    const double d2 = (x - 256) - center;
    const double w1 = std::exp(-d1 * d1 / (2 * sigma * sigma));
    const double w2 = std::exp(-d2 * d2 / (2 * sigma * sigma));
    const double expected = w2 / (w1 + w2);
    CHECK(out.at(0, y, x) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(out.at(0, y, x) > prev);  // strictly monotone ramp
    prev = out.at(0, y, x);
  }
}

TEST_CASE("blend output is a convex combination of tile values") {
  Rng rng(409);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 200 + static_cast<int>(rng.uniformIndex(300));
    const int h = 150 + static_cast<int>(rng.uniformIndex(200));
    const int tile = 96 + static_cast<int>(rng.uniformIndex(100));
    const int overlap = static_cast<int>(rng.uniformIndex(static_cast<std::size_t>(tile / 2)));
    const TileGrid g = TileGrid::cover(w, h, tile, overlap);
    std::vector<Tile> tiles;
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) {
        Tile t;
        t.originX = g.originsX()[c];
        t.originY = g.originsY()[r];
        t.image = ImageBuffer(g.tileWidth(c), g.tileHeight(r), 1, rng.uniform());
        tiles.push_back(std::move(t));
      }
    const ImageBuffer out = blend_tiles(tiles, g, w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double lo = 2.0, hi = -1.0;
        for (const Tile& t : tiles) {
          if (x >= t.originX && x < t.originX + t.image.width() && y >= t.originY &&
              y < t.originY + t.image.height()) {
            lo = std::min(lo, t.image.at(0, 0, 0));
            hi = std::max(hi, t.image.at(0, 0, 0));
          }
        }
        REQUIRE(lo <= hi);  // coverage
        CHECK(out.at(0, y, x) >= lo - 1e-12);
        CHECK(out.at(0, y, x) <= hi + 1e-12);
      }
  }
}

TEST_CASE("apply_external_tiles identity slicing stays close to the source (PSNR oracle)") {
  const fs::path dir = temp_dir("tiles_psnr");
  ImageBuffer img(400, 300, 3);
  Rng rng(419);
  // smooth content: the post-filter must not destroy it
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 300; ++y)
      for (int x = 0; x < 400; ++x)
        img.at(c, y, x) = 0.5 + 0.3 * std::sin(0.05 * x + c) * std::cos(0.04 * y);
  const TileGrid g = TileGrid::cover(400, 300, 128, 64);
  write_tile_dir(img, g, dir.string());

  const ImageBuffer out = apply_external_tiles(img, g, dir.string());
  double mse = 0.0;
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const double d = out.data()[i] - img.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(img.data().size());
  const double psnr = 10.0 * std::log10(1.0 / mse);
  CHECK(psnr > 35.0);
  fs::remove_all(dir);
}

TEST_CASE("apply_external_tiles names the missing tile") {
  const fs::path dir = temp_dir("tiles_missing");
  const ImageBuffer img = random_image(300, 120, 3, 421);
  const TileGrid g = TileGrid::cover(300, 120, 128, 64);
  write_tile_dir(img, g, dir.string());
  fs::remove(dir / "tile_0_1.png");
  try {
    apply_external_tiles(img, g, dir.string());
    FAIL("expected MissingTile");
  } catch (const MissingTile& e) {
    CHECK(std::string(e.what()).find("tile_0_1") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("apply_external_tiles exact reassembly with zero overlap and no post-filter") {
  const fs::path dir = temp_dir("tiles_exact");
  const ImageBuffer img = random_image(256, 192, 3, 431);
  const TileGrid g = TileGrid::cover(256, 192, 64, 0);
  write_tile_dir(img, g, dir.string());
  const ImageBuffer out = apply_external_tiles(img, g, dir.string(), /*postFilter=*/false);
  // tiles round-trip through 8-bit PNG; compare against the quantized source
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 192; ++y)
      for (int x = 0; x < 256; ++x) {
        const double quantized = std::floor(img.at(c, y, x) * 255.0 + 0.5) / 255.0;
        CHECK(out.at(c, y, x) == doctest::Approx(quantized).epsilon(1e-12));
      }
  fs::remove_all(dir);
}

TEST_CASE("apply_external_tiles rejects wrong tile dimensions") {
  const fs::path dir = temp_dir("tiles_dims");
  const ImageBuffer img = random_image(256, 192, 3, 433);
  const TileGrid g = TileGrid::cover(256, 192, 64, 0);
  write_tile_dir(img, g, dir.string());
  io::save_png(ImageBuffer(10, 10, 3, 0.5), (dir / "tile_0_0.png").string());
  CHECK_THROWS_AS(apply_external_tiles(img, g, dir.string()), DimensionMismatch);
  fs::remove_all(dir);
}

TEST_CASE("grid manifest round trip") {
  const fs::path dir = temp_dir("grid_manifest");
  const TileGrid g = TileGrid::cover(1234, 567, 256, 128);
  write_grid_manifest(g, (dir / "grid.json").string());
  const TileGrid back = read_grid_manifest((dir / "grid.json").string());
  CHECK(back.tileSize == g.tileSize);
  CHECK(back.overlap == g.overlap);
  CHECK(back.imageWidth == g.imageWidth);
  CHECK(back.imageHeight == g.imageHeight);
  CHECK(back.cols() == g.cols());
  fs::remove_all(dir);
}
