#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "calscan/image.hpp"

namespace calscan {

/// Reads 1/2/4/8/16-bit gray, gray+alpha, palette, RGB or RGBA PNGs.
/// RGB is averaged; 16-bit data is rescaled so the image maximum maps to 255.
/// Throws IoError when the file cannot be opened and FormatError when it does
/// not decode.
GrayImage load_grayscale(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG. Throws IoError.
void save_png(const GrayImage& img, const std::filesystem::path& path);

/// Writes interleaved 8-bit RGB. Throws ArgumentError on a size mismatch.
void save_png_rgb(std::span<const std::uint8_t> rgb, int width, int height, const std::filesystem::path& path);

}  // namespace calscan
