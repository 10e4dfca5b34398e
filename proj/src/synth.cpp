#include "calscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "calscan/errors.hpp"

namespace calscan {
namespace {

constexpr double kPi = 3.14159265358979323846;

constexpr double kReferenceSide = 640.0;

// Template in px relative to the canvas centre at the reference side.
// Outline order: anterior-inferior corner, then along the upper border
// (L3, L4, L2, L1) and back along the plantar side.
constexpr std::array<Vec2, 11> kOutline = {{
    {-128, 12},  // anterior-inferior
    {-112, -30}, // L3 anterior process
    {-52, -8},   // L4 angle of Gissane
    {8, -62},    // L2 posterior facet
    {58, -44},
    {112, -22},  // L1 tuberosity
    {128, 20},
    {118, 58},
    {60, 72},
    {-30, 58},
    {-95, 40},
}};
constexpr std::array<int, 4> kLandmarkVertex = {5, 3, 1, 2};

// Conical shading centred on each landmark: peak amplitude and radius.
struct Mark {
  double amp, radius;
};
constexpr std::array<Mark, 4> kMarks = {{{-60, 40}, {-60, 45}, {60, 50}, {-60, 40}}};

// Broad soft-tissue thickness variation: centre, widths, amplitude.
struct Bump {
  Vec2 c;
  double sx, sy, amp;
};
constexpr std::array<Bump, 3> kBumps = {{
    {{150, -20}, 300, 220, 80},
    {{-120, 80}, 200, 160, -50},
    {{-60, -200}, 150, 250, 50},
}};

// Neighbouring bones (talus, navicular, cuboid, tibia, metatarsals) as
// rotated ellipses: centre, semi-axes, rotation, intensity above tissue.
struct Ellipse {
  Vec2 c;
  double a, b, rot, amp;
};
constexpr std::array<Ellipse, 7> kNeighbours = {{
    {{-5, -118}, 72, 36, 0.10, 95},
    {{-128, -92}, 30, 22, -0.4, 85},
    {{-178, 22}, 40, 30, 0.05, 90},
    {{25, -250}, 34, 110, 0.12, 105},
    {{-265, 0}, 60, 13, 0.06, 80},
    {{-262, 38}, 58, 12, 0.16, 80},
    {{-255, -34}, 55, 12, -0.05, 80},
}};

struct Blob {
  Vec2 c;
  double r;
  double amp;
};

// Fixed texture in reference units: trabecular blobs inside the bone and
// fainter soft-tissue mottling around it. Identical for every case, so local
// appearance near each landmark is learnable.
std::vector<Blob> make_blobs(std::uint64_t seed, int count, Vec2 lo, Vec2 hi, double r_lo, double r_hi, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x, hi.x), uy(lo.y, hi.y), ur(r_lo, r_hi), ua(-amp, amp);
  std::vector<Blob> b;
  for (int i = 0; i < count; ++i) {
    const Vec2 c{ux(rng), uy(rng)};
    const double r = ur(rng);
    const double a = ua(rng);
    b.push_back({c, r, a});
  }
  return b;
}

const std::vector<Blob>& bone_blobs() {
  static const std::vector<Blob> blobs = [] {
    std::vector<Blob> b = make_blobs(0x5EEDC0DE, 60, {-135, -70}, {135, 80}, 10.0, 28.0, 35.0);
    const std::vector<Blob> fine = make_blobs(0x5EEDC0DF, 160, {-135, -70}, {135, 80}, 2.0, 5.0, 12.0);
    b.insert(b.end(), fine.begin(), fine.end());
    return b;
  }();
  return blobs;
}

const std::vector<Blob>& tissue_blobs() {
  static const std::vector<Blob> blobs = make_blobs(0x7155E, 140, {-215, -135}, {215, 155}, 10.0, 32.0, 8.0);
  return blobs;
}

// Adds the blobs, mapped into the image by to_image, onto a side x side layer.
void splat(std::vector<double>& layer, int side, const std::vector<Blob>& blobs, const Similarity2& to_image,
           Point2 centre, double k) {
  for (const Blob& bl : blobs) {
    const Point2 q = to_image.apply(centre + bl.c * k);
    const double r = bl.r * k * to_image.scale;
    const int x0 = std::max(0, static_cast<int>(std::floor(q.x - 3 * r)));
    const int x1 = std::min(side - 1, static_cast<int>(std::ceil(q.x + 3 * r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(q.y - 3 * r)));
    const int y1 = std::min(side - 1, static_cast<int>(std::ceil(q.y + 3 * r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (x - q.x) * (x - q.x) + (y - q.y) * (y - q.y);
        if (d2 < 9.0 * r * r) layer[static_cast<std::size_t>(y) * side + x] += bl.amp * std::exp(-d2 / (2.0 * r * r));
      }
    }
  }
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(p - (a + ab * t));
}

double signed_distance(const Polygon& poly, Point2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    d = std::min(d, segment_distance(as_vec(p), as_vec(poly[j]), as_vec(poly[i])));
  }
  return point_in_polygon(poly, p) ? d : -d;
}

std::vector<double> gaussian_blur(const std::vector<double>& src, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

Polygon segment_band(Point2 a, Point2 b, double half_width) {
  const Vec2 d = b - a;
  const Vec2 n = Vec2{-d.y, d.x} / norm(d) * half_width;
  const Vec2 e = d / norm(d) * half_width;
  return {a - e + n, b + e + n, b + e - n, a - e - n};
}

}  // namespace

void SynthParams::validate() const {
  if (count < 0) throw ArgumentError("synth: count must be >= 0");
  if (side < 64) throw ArgumentError("synth: side must be >= 64");
  if (rotation_min > rotation_max || scale_min > scale_max || !(scale_min > 0.0)) {
    throw ArgumentError("synth: ranges must be ordered and scale positive");
  }
  if (translation_max < 0.0 || noise < 0.0) throw ArgumentError("synth: negative translation/noise");
  if (!(fracture_rate >= 0.0 && fracture_rate <= 1.0)) throw ArgumentError("synth: fracture_rate must be in [0,1]");
}

Polygon template_outline(int side) {
  const double k = side / kReferenceSide;
  const Point2 c{0.5 * (side - 1), 0.5 * (side - 1)};
  Polygon out;
  for (const Vec2& v : kOutline) out.push_back(c + v * k);
  return out;
}

LandmarkSet template_landmarks(int side) {
  const Polygon outline = template_outline(side);
  LandmarkSet lm;
  for (int i = 0; i < kNumLandmarks; ++i) lm[i] = outline[kLandmarkVertex[i]];
  return lm;
}

SynthCase generate_case(std::mt19937_64& rng, const SynthParams& params) {
  params.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int side = params.side;
  const double k = side / kReferenceSide;
  const Point2 centre{0.5 * (side - 1), 0.5 * (side - 1)};

  const double rotation = uniform(params.rotation_min, params.rotation_max);
  const double scale = uniform(params.scale_min, params.scale_max);
  const Vec2 shift{uniform(-params.translation_max, params.translation_max),
                   uniform(-params.translation_max, params.translation_max)};
  const Vec2 c = as_vec(centre);
  const Similarity2 to_image{rotation, scale, c - rotate_vec(c, rotation) * scale + shift};
  const Similarity2 to_template = to_image.inverse();

  const Vec2 gradient{uniform(-12.0, 12.0), uniform(-12.0, 12.0)};
  const double base = uniform(25.0, 40.0);
  const double tissue = uniform(28.0, 40.0);
  const double bone = uniform(105.0, 120.0);

  SynthCase out;
  out.transform = to_image;
  const Polygon outline = template_outline(side);
  out.landmarks = transform(template_landmarks(side), to_image);

  // Crack polyline in template coordinates.
  std::vector<Point2> crack;
  out.fractured = unit(rng) < params.fracture_rate;
  if (out.fractured) {
    const LandmarkSet tl = template_landmarks(side);
    const double t = uniform(0.15, 0.85);
    const Point2 start = tl.L4() + (tl.L1() - tl.L4()) * t + Vec2{0.0, -6.0 * k};
    const Point2 mid = start + Vec2{uniform(-20.0, 20.0), 35.0} * k;
    const Point2 end = mid + Vec2{uniform(-20.0, 20.0), 35.0} * k;
    crack = {start, mid, end};
    out.fracture_kind = std::abs(start.x - tl.L2().x) < 45.0 * k ? "intra" : "extra";
    for (std::size_t s = 0; s + 1 < crack.size(); ++s) {
      out.fracture_polygons.push_back(transform(segment_band(crack[s], crack[s + 1], 6.0 * k), to_image));
    }
  }

  std::vector<double> bone_tex(static_cast<std::size_t>(side) * side, 0.0);
  std::vector<double> tissue_tex(bone_tex.size(), 0.0);
  splat(bone_tex, side, bone_blobs(), to_image, centre, k);
  splat(tissue_tex, side, tissue_blobs(), to_image, centre, k);
  std::vector<double> field(bone_tex.size());
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const Point2 q{double(x), double(y)};
      const Point2 p = to_template.apply(q);  // canvas-centred template frame
      const Vec2 rel = (p - centre) / k;        // reference units

      double v = base + gradient.x * (x / double(side) - 0.5) + gradient.y * (y / double(side) - 0.5);
      const double ex = rel.x / 215.0, ey = (rel.y - 10.0) / 145.0;
      const double tissue_edge = (1.0 - std::sqrt(ex * ex + ey * ey)) * 150.0;  // ~px inside the envelope
      const std::size_t at = static_cast<std::size_t>(y) * side + x;
      v += (tissue + tissue_tex[at]) / (1.0 + std::exp(-tissue_edge / 4.0));

      for (const Ellipse& e : kNeighbours) {
        const Vec2 d = rotate_vec(rel - e.c, -e.rot);
        const double r = std::sqrt((d.x / e.a) * (d.x / e.a) + (d.y / e.b) * (d.y / e.b));
        if (r < 1.3) {
          const double edge = (1.0 - r) * std::min(e.a, e.b);
          v += e.amp * std::clamp(0.5 + edge, 0.0, 1.0) * (1.0 + 0.2 * std::exp(-std::max(edge, 0.0) / 3.0));
        }
      }

      if (std::abs(rel.x) < 220.0 && std::abs(rel.y - 5.0) < 160.0) {
        const double sd = signed_distance(outline, p) / k;
        if (sd < 0.0) v += 22.0 * std::exp(sd / 14.0);  // soft-tissue halo around the bone
        const double inside = std::clamp(0.5 + sd, 0.0, 1.0);
        if (inside > 0.0) {
          double b = bone - tissue - tissue_tex[at] + bone_tex[at];
          b += 38.0 * std::exp(-std::max(sd, 0.0) / 3.0);  // cortical rim
          for (std::size_t s = 0; s + 1 < crack.size(); ++s) {
            const double dc = segment_distance(as_vec(p), as_vec(crack[s]), as_vec(crack[s + 1])) / k;
            b -= 75.0 * std::exp(-dc * dc / (2.0 * 1.5 * 1.5));
          }
          v += inside * b;
        }
      }
      for (const Bump& bm : kBumps) {
        const Vec2 d = rel - bm.c;
        v += bm.amp * std::exp(-0.5 * (d.x * d.x / (bm.sx * bm.sx) + d.y * d.y / (bm.sy * bm.sy)));
      }
      for (int i = 0; i < kNumLandmarks; ++i) {
        const Mark& m = kMarks[i];
        v += m.amp * std::max(0.0, 1.0 - norm(rel - kOutline[kLandmarkVertex[i]]) / m.radius);
      }
      field[at] = v;
    }
  }

  field = gaussian_blur(field, side, side, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::uint8_t> px(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) px[i] = to_u8(field[i] + params.noise * noise(rng));
  out.image = GrayImage(side, side, std::move(px));
  return out;
}

SynthCase generate_indexed_case(const SynthParams& params, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  return generate_case(rng, params);
}

std::vector<SynthCase> generate_dataset(const SynthParams& params) {
  params.validate();
  std::vector<SynthCase> cases;
  cases.reserve(params.count);
  for (int i = 0; i < params.count; ++i) cases.push_back(generate_indexed_case(params, i));
  return cases;
}

}  // namespace calscan
