#include "histreg/io/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace histreg::io {

namespace {

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageBuffer load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read error: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  int bitDepth = png_get_bit_depth(png, info);
  const int colorType = png_get_color_type(png, info);

  if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (colorType & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bitDepth == 16) png_set_swap(png);  // PNG stores big-endian

  png_read_update_info(png, info);
  bitDepth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: unsupported channel count after expansion: " + path);
  }

  const std::size_t rowBytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> raster(rowBytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * rowBytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageBuffer out(static_cast<int>(width), static_cast<int>(height), channels);
  const double maxVal = bitDepth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < height; ++y) {
    if (bitDepth == 16) {
      const std::uint16_t* row = reinterpret_cast<const std::uint16_t*>(raster.data() + y * rowBytes);
      for (png_uint_32 x = 0; x < width; ++x)
        for (int c = 0; c < channels; ++c) out.at(c, static_cast<int>(y), static_cast<int>(x)) = row[x * channels + c] / maxVal;
    } else {
      const std::uint8_t* row = raster.data() + y * rowBytes;
      for (png_uint_32 x = 0; x < width; ++x)
        for (int c = 0; c < channels; ++c) out.at(c, static_cast<int>(y), static_cast<int>(x)) = row[x * channels + c] / maxVal;
    }
  }
  return out;
}

ImageBuffer load_tiff(const std::string& path) {
  TIFF* tif = TIFFOpen(path.c_str(), "r");
  if (!tif) throw IoError("cannot open: " + path);

  std::uint32_t width = 0, height = 0;
  std::uint16_t bits = 8, samples = 1, planar = PLANARCONFIG_CONTIG, sampleFormat = SAMPLEFORMAT_UINT;
  TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &samples);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &sampleFormat);

  auto fail = [&](const std::string& msg) {
    TIFFClose(tif);
    throw IoError("tiff: " + msg + ": " + path);
  };

  if (width == 0 || height == 0) fail("bad dimensions");
  if (TIFFIsTiled(tif)) fail("tiled layout unsupported");
  if (planar != PLANARCONFIG_CONTIG) fail("separate planes unsupported");
  if (bits != 8 && bits != 16) fail("only 8/16 bits per sample supported");
  if (samples != 1 && samples != 3) fail("only 1 or 3 samples per pixel supported");
  if (sampleFormat != SAMPLEFORMAT_UINT) fail("only unsigned integer samples supported");

  const tmsize_t scanBytes = TIFFScanlineSize(tif);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(scanBytes));
  ImageBuffer out(static_cast<int>(width), static_cast<int>(height), samples);
  const double maxVal = bits == 16 ? 65535.0 : 255.0;
  for (std::uint32_t y = 0; y < height; ++y) {
    if (TIFFReadScanline(tif, row.data(), y) < 0) fail("scanline read failed");
    if (bits == 16) {
      const std::uint16_t* r16 = reinterpret_cast<const std::uint16_t*>(row.data());
      for (std::uint32_t x = 0; x < width; ++x)
        for (int c = 0; c < samples; ++c) out.at(c, static_cast<int>(y), static_cast<int>(x)) = r16[x * samples + c] / maxVal;
    } else {
      for (std::uint32_t x = 0; x < width; ++x)
        for (int c = 0; c < samples; ++c) out.at(c, static_cast<int>(y), static_cast<int>(x)) = row[x * samples + c] / maxVal;
    }
  }
  TIFFClose(tif);
  return out;
}

/// Round-half-up quantization to [0, maxVal].
inline std::uint32_t quantize(double s, std::uint32_t maxVal) {
  const double v = std::floor(std::clamp(s, 0.0, 1.0) * maxVal + 0.5);
  return static_cast<std::uint32_t>(std::min(v, static_cast<double>(maxVal)));
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return load_png(path);
  if (ext == "tif" || ext == "tiff") return load_tiff(path);
  throw IoError("unsupported image extension: " + path);
}

void save_png(const ImageBuffer& img, const std::string& path, int bitDepth) {
  if (bitDepth != 8 && bitDepth != 16) throw IoError("png: bitDepth must be 8 or 16");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write error: " + path);
  }

  png_init_io(png, fp.get());
  const int colorType = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width(), img.height(), bitDepth, colorType, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bitDepth == 16) png_set_swap(png);

  const std::uint32_t maxVal = bitDepth == 16 ? 65535u : 255u;
  const std::size_t rowSamples = static_cast<std::size_t>(img.width()) * img.channels();
  if (bitDepth == 16) {
    std::vector<std::uint16_t> row(rowSamples);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < img.channels(); ++c)
          row[static_cast<std::size_t>(x) * img.channels() + c] =
              static_cast<std::uint16_t>(quantize(img.at(c, y, x), maxVal));
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  } else {
    std::vector<std::uint8_t> row(rowSamples);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < img.channels(); ++c)
          row[static_cast<std::size_t>(x) * img.channels() + c] =
              static_cast<std::uint8_t>(quantize(img.at(c, y, x), maxVal));
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_tiff(const ImageBuffer& img, const std::string& path, int bitDepth, TiffCompression compression) {
  if (bitDepth != 8 && bitDepth != 16) throw IoError("tiff: bitDepth must be 8 or 16");
  TIFF* tif = TIFFOpen(path.c_str(), "w");
  if (!tif) throw IoError("cannot open for writing: " + path);

  TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.width()));
  TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.height()));
  TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(bitDepth));
  TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, static_cast<std::uint16_t>(img.channels()));
  TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, img.channels() == 1 ? PHOTOMETRIC_MINISBLACK : PHOTOMETRIC_RGB);
  TIFFSetField(tif, TIFFTAG_COMPRESSION,
               compression == TiffCompression::lzw ? COMPRESSION_LZW : COMPRESSION_NONE);
  TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(tif, 0));

  const std::uint32_t maxVal = bitDepth == 16 ? 65535u : 255u;
  const std::size_t rowSamples = static_cast<std::size_t>(img.width()) * img.channels();
  bool ok = true;
  if (bitDepth == 16) {
    std::vector<std::uint16_t> row(rowSamples);
    for (int y = 0; y < img.height() && ok; ++y) {
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < img.channels(); ++c)
          row[static_cast<std::size_t>(x) * img.channels() + c] =
              static_cast<std::uint16_t>(quantize(img.at(c, y, x), maxVal));
      ok = TIFFWriteScanline(tif, row.data(), y) >= 0;
    }
  } else {
    std::vector<std::uint8_t> row(rowSamples);
    for (int y = 0; y < img.height() && ok; ++y) {
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < img.channels(); ++c)
          row[static_cast<std::size_t>(x) * img.channels() + c] =
              static_cast<std::uint8_t>(quantize(img.at(c, y, x), maxVal));
      ok = TIFFWriteScanline(tif, row.data(), y) >= 0;
    }
  }
  TIFFClose(tif);
  if (!ok) throw IoError("tiff write failed: " + path);
}

void save_image(const ImageBuffer& img, const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") {
    save_png(img, path);
  } else if (ext == "tif" || ext == "tiff") {
    save_tiff(img, path);
  } else {
    throw IoError("unsupported image extension: " + path);
  }
}

}  // namespace histreg::io
