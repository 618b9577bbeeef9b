#pragma once

#include <string>

#include "histreg/core/image.hpp"

namespace histreg::io {

enum class TiffCompression { none, lzw };

/// Load an 8- or 16-bit PNG or TIFF (grayscale or RGB) as a normalized
/// ImageBuffer. 8-bit samples scale by 1/255, 16-bit by 1/65535. The format
/// is picked by file extension (.png, .tif, .tiff).
ImageBuffer load_image(const std::string& path);

/// Save as PNG. Samples are scaled to the integer range with round-half-up.
void save_png(const ImageBuffer& img, const std::string& path, int bitDepth = 8);

/// Save as TIFF, uncompressed or LZW.
void save_tiff(const ImageBuffer& img, const std::string& path, int bitDepth = 8,
               TiffCompression compression = TiffCompression::none);

/// Dispatch on extension: .png -> save_png (8-bit), .tif/.tiff -> save_tiff.
void save_image(const ImageBuffer& img, const std::string& path);

}  // namespace histreg::io
