#pragma once

#include "calscan/image.hpp"

namespace calscan {

struct ClaheParams {
  int tiles = 8;      // per axis
  double clip = 2.0;  // relative to the mean bin height
};

/// Contrast-limited adaptive histogram equalization (256 bins, uniform excess
/// redistribution, bilinear blending between tile mappings).
GrayImage clahe(const GrayImage& img, int tiles, double clip);
inline GrayImage clahe(const GrayImage& img, ClaheParams p = {}) { return clahe(img, p.tiles, p.clip); }

}  // namespace calscan
