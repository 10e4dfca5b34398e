#include "calscan/clahe.hpp"

#include <algorithm>
#include <array>
#include <vector>

#include "calscan/errors.hpp"

namespace calscan {
namespace {

using Lut = std::array<float, 256>;

// Mid-rank mapping (average of the cdf before and at the bin) keeps constant
// regions at their own intensity.
Lut tile_lut(const GrayImage& img, int x0, int x1, int y0, int y1, double clip) {
  std::array<double, 256> hist{};
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) hist[img.at(x, y)] += 1.0;

  const double npix = static_cast<double>(x1 - x0) * (y1 - y0);
  const double limit = clip * npix / 256.0;
  double excess = 0.0;
  for (double& h : hist) {
    if (h > limit) {
      excess += h - limit;
      h = limit;
    }
  }
  const double share = excess / 256.0;
  Lut lut{};
  double cdf = 0.0;
  for (int v = 0; v < 256; ++v) {
    const double before = cdf;
    cdf += hist[v] + share;
    lut[v] = static_cast<float>(255.0 * 0.5 * (before + cdf) / npix);
  }
  return lut;
}

struct Axis {
  std::vector<int> bounds;     // tiles + 1 edges
  std::vector<double> centre;  // tile centres
};

Axis split(int extent, int tiles) {
  Axis a;
  for (int t = 0; t <= tiles; ++t) a.bounds.push_back(static_cast<int>(static_cast<long>(t) * extent / tiles));
  for (int t = 0; t < tiles; ++t) a.centre.push_back(0.5 * (a.bounds[t] + a.bounds[t + 1] - 1));
  return a;
}

// Neighbouring tile pair and weight of the second one for coordinate v.
void locate(const Axis& a, double v, int& lo, int& hi, double& w) {
  const int n = static_cast<int>(a.centre.size());
  if (v <= a.centre.front()) {
    lo = hi = 0;
    w = 0.0;
    return;
  }
  if (v >= a.centre.back()) {
    lo = hi = n - 1;
    w = 0.0;
    return;
  }
  hi = static_cast<int>(std::upper_bound(a.centre.begin(), a.centre.end(), v) - a.centre.begin());
  lo = hi - 1;
  w = (v - a.centre[lo]) / (a.centre[hi] - a.centre[lo]);
}

}  // namespace

GrayImage clahe(const GrayImage& img, int tiles, double clip) {
  if (tiles < 1) throw ArgumentError("clahe: tiles must be >= 1");
  if (!(clip >= 1.0)) throw ArgumentError("clahe: clip must be >= 1.0");

  const int tx = std::min(tiles, img.width());
  const int ty = std::min(tiles, img.height());
  const Axis ax = split(img.width(), tx);
  const Axis ay = split(img.height(), ty);

  std::vector<Lut> luts(static_cast<std::size_t>(tx) * ty);
  for (int j = 0; j < ty; ++j)
    for (int i = 0; i < tx; ++i)
      luts[j * tx + i] = tile_lut(img, ax.bounds[i], ax.bounds[i + 1], ay.bounds[j], ay.bounds[j + 1], clip);

  GrayImage out(img.width(), img.height());
  std::vector<int> xlo(img.width()), xhi(img.width());
  std::vector<double> xw(img.width());
  for (int x = 0; x < img.width(); ++x) locate(ax, x, xlo[x], xhi[x], xw[x]);

  for (int y = 0; y < img.height(); ++y) {
    int ylo = 0, yhi = 0;
    double yw = 0.0;
    locate(ay, y, ylo, yhi, yw);
    for (int x = 0; x < img.width(); ++x) {
      const int v = img.at(x, y);
      const double a = luts[ylo * tx + xlo[x]][v];
      const double b = luts[ylo * tx + xhi[x]][v];
      const double c = luts[yhi * tx + xlo[x]][v];
      const double d = luts[yhi * tx + xhi[x]][v];
      const double top = a + xw[x] * (b - a);
      const double bot = c + xw[x] * (d - c);
      out.at(x, y) = to_u8(top + yw * (bot - top));
    }
  }
  return out;
}

}  // namespace calscan
