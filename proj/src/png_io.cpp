#include "calscan/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "calscan/errors.hpp"

namespace calscan {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<png_byte> data;
};

void warning_sink(png_structp, png_const_charp) {}

// Decodes into `out`; returns false on a libpng error. Kept free of objects
// with non-trivial destructors between setjmp and the libpng calls.
bool decode(std::FILE* fp, DecodedPng& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, warning_sink);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.data.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

GrayImage load_grayscale(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());

  png_byte sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  std::rewind(fp.get());

  DecodedPng d;
  if (!decode(fp.get(), d)) throw FormatError(path.string() + ": corrupt or truncated PNG");
  if (d.channels != 1 && d.channels != 3) throw FormatError(path.string() + ": unsupported channel layout");
  if (d.bit_depth != 8 && d.bit_depth != 16) throw FormatError(path.string() + ": unsupported bit depth");

  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  std::vector<double> gray(n);
  const int bytes = d.bit_depth / 8;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < d.channels; ++c) {
      const png_byte* s = &d.data[(i * d.channels + c) * bytes];
      acc += bytes == 2 ? static_cast<double>((s[0] << 8) | s[1]) : static_cast<double>(s[0]);
    }
    gray[i] = acc / d.channels;
  }

  std::vector<std::uint8_t> px(n);
  if (bytes == 2) {
    const double peak = *std::max_element(gray.begin(), gray.end());
    const double k = peak > 0.0 ? 255.0 / peak : 0.0;
    for (std::size_t i = 0; i < n; ++i) px[i] = to_u8(gray[i] * k);
  } else {
    for (std::size_t i = 0; i < n; ++i) px[i] = to_u8(gray[i]);
  }
  return GrayImage(d.width, d.height, std::move(px));
}

namespace {

void write_png(const std::uint8_t* data, int width, int height, int channels, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, warning_sink);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(height);
  volatile bool ok = false;
  if (!setjmp(png_jmpbuf(png))) {
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    auto* base = const_cast<png_byte*>(data);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y) rows[y] = base + stride * y;
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    ok = true;
  }
  png_destroy_write_struct(&png, &info);
  if (!ok) throw IoError("failed writing " + path.string());
}

}  // namespace

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  write_png(img.pixels().data(), img.width(), img.height(), 1, path);
}

void save_png_rgb(std::span<const std::uint8_t> rgb, int width, int height, const std::filesystem::path& path) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw ArgumentError("save_png_rgb: size mismatch");
  write_png(rgb.data(), width, height, 3, path);
}

}  // namespace calscan
