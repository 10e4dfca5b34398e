#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "calscan/image.hpp"
#include "calscan/landmarks.hpp"

namespace calscan {

/// Synthetic lateral "radiograph" generator. A fixed calcaneus-like template
/// (outline, cortical rim, trabecular blobs, soft-tissue envelope) is placed
/// by a random similarity transform about the canvas centre, then blurred and
/// corrupted with noise. Landmarks are the transformed template vertices.
struct SynthParams {
  int count = 1;
  int side = 640;
  double rotation_min = -10.0 * 3.14159265358979323846 / 180.0;
  double rotation_max = 10.0 * 3.14159265358979323846 / 180.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double translation_max = 30.0;  // px, per axis, symmetric
  double noise = 4.0;             // Gaussian sigma, grey levels
  double fracture_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCase {
  GrayImage image;
  LandmarkSet landmarks;
  bool fractured = false;
  std::vector<Polygon> fracture_polygons;
  std::optional<std::string> fracture_kind;  // "intra" | "extra"
  Similarity2 transform;                     // template -> image
};

/// Canonical toe-left template for a side x side canvas.
LandmarkSet template_landmarks(int side);
Polygon template_outline(int side);

SynthCase generate_case(std::mt19937_64& rng, const SynthParams& params);

/// Case k uses its own generator seeded from (params.seed, k), so any subset
/// can be regenerated independently.
SynthCase generate_indexed_case(const SynthParams& params, int index);
std::vector<SynthCase> generate_dataset(const SynthParams& params);

}  // namespace calscan
