#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "calscan/image.hpp"

namespace calscan::testing {

/// Smooth, rotation-friendly texture: a sum of oriented sinusoids plus blobs.
inline GrayImage textured_image(int w, int h, std::uint64_t seed, double freq_scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  struct Wave { double kx, ky, phase, amp; };
  struct Blob { double x, y, r, amp; };
  std::vector<Wave> waves;
  for (int k = 0; k < 5; ++k) {
    const double ang = U(rng) * 2 * M_PI;
    const double f = (0.04 + 0.10 * U(rng)) * freq_scale;
    waves.push_back({f * std::cos(ang), f * std::sin(ang), U(rng) * 6.28, 12 + 10 * U(rng)});
  }
  std::vector<Blob> blobs;
  for (int k = 0; k < w * h / 400; ++k) blobs.push_back({U(rng) * w, U(rng) * h, (3 + 6 * U(rng)) / freq_scale, 40 * U(rng) - 20});
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 128;
      for (const auto& wv : waves) v += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
      for (const auto& b : blobs) {
        const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
        if (d2 < 9 * b.r * b.r) v += b.amp * std::exp(-d2 / (2 * b.r * b.r));
      }
      img.at(x, y) = to_u8(v);
    }
  }
  return img;
}

/// Fresh scratch directory under the test's working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace calscan::testing
