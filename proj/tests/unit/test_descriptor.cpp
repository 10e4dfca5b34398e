#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "calscan/descriptor.hpp"
#include "calscan/errors.hpp"
#include "calscan/svr.hpp"
#include "calscan/transforms.hpp"
#include "test_helpers.hpp"

using namespace calscan;

namespace {

GrayImage ramp(int w, int h, double kx, double ky) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = to_u8(40 + kx * x + ky * y);
  }
  return img;
}

double l2(const Descriptor& a, const Descriptor& b) { return std::sqrt(squared_distance(a.data(), b.data())); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("dominant orientation of axis-aligned ramps") {
  const GrayImage gx = ramp(64, 64, 2.0, 0.0);
  const GrayImage gy = ramp(64, 64, 0.0, 2.0);
  CHECK(std::abs(dominant_orientation(gx, {32, 32}, 20).angle) < 1e-9);
  CHECK(std::abs(dominant_orientation(gy, {32, 32}, 20).angle - std::numbers::pi / 2) < 1e-9);
  CHECK_FALSE(dominant_orientation(gx, {32, 32}, 20).degenerate);
}

TEST_CASE("dominant orientation of a flat window is degenerate") {
  const GrayImage flat(40, 40, 90);
  const Orientation o = dominant_orientation(flat, {20, 20}, 16);
  CHECK(o.degenerate);
  CHECK(o.angle == 0.0);
  CHECK_THROWS_AS(dominant_orientation(flat, {20, 20}, 3.5), ArgumentError);
}

TEST_CASE("dominant orientation follows image rotation") {
  const GrayImage img = testing::textured_image(200, 200, 11);
  const Point2 c{99.5, 99.5};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
  int good = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const double a = U(rng);
    const GrayImage rot = rotate_image(img, a, c);
    const double o0 = dominant_orientation(img, c, 40).angle;
    const double o1 = dominant_orientation(rot, c, 40).angle;
    good += std::abs(wrap_angle(o1 - o0 - a)) < 0.1;
  }
  CHECK(good >= trials * 8 / 10);
}

TEST_CASE("constant patch gives the zero vector") {
  const GrayImage flat(50, 50, 128);
  const Descriptor d = extract_descriptor(flat, {{25, 25}, 16, 0.3});
  CHECK(std::all_of(d.begin(), d.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("descriptor norm and clipping contract") {
  const GrayImage img = testing::textured_image(120, 120, 5);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const PatchSpec p{{20 + 80 * U(rng), 20 + 80 * U(rng)}, 4 + 40 * U(rng), wrap_angle(7 * U(rng))};
    const Descriptor d = extract_descriptor(img, p);
    double sq = 0.0;
    for (float v : d) {
      REQUIRE(std::isfinite(v));
      CHECK(v >= 0.0f);
      CHECK(v <= 0.2f + 1e-6f);
      sq += double(v) * v;
    }
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
  }
}

TEST_CASE("patches overlapping the border stay finite") {
  const GrayImage img = testing::textured_image(60, 60, 2);
  const Descriptor d = extract_descriptor(img, {{-5, 30}, 30, 1.0});
  for (float v : d) CHECK(std::isfinite(v));
}

TEST_CASE("normalize_clipped") {
  SUBCASE("water-filling reaches unit norm with every entry at most the clip") {
    std::vector<float> v(128, 0.01f);
    v[0] = 10.0f;
    v[1] = 5.0f;
    normalize_clipped(v);
    double sq = 0.0;
    for (float x : v) {
      CHECK(x <= 0.2f + 1e-6f);
      sq += double(x) * x;
    }
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(v[0] == doctest::Approx(0.2f));
  }
  SUBCASE("sparse vectors fall back to clip and renormalise") {
    std::vector<float> v{3.0f, 4.0f, 0.0f};
    normalize_clipped(v);
    CHECK(v[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    CHECK(v[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  }
  SUBCASE("zero stays zero") {
    std::vector<float> v(8, 0.0f);
    normalize_clipped(v);
    CHECK(std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; }));
  }
}

TEST_CASE("descriptor is rotation invariant on textured images") {
  const GrayImage img = testing::textured_image(240, 240, 21);
  const Point2 c{119.5, 119.5};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> dist;
  for (int t = 0; t < 100; ++t) {
    const double a = 2 * std::numbers::pi * U(rng);
    const Point2 p{c.x + 50 * (U(rng) - 0.5), c.y + 50 * (U(rng) - 0.5)};
    const double s = 16 + 24 * U(rng);
    const double theta = wrap_angle(6.3 * U(rng));
    const GrayImage rot = rotate_image(img, a, c);
    const Point2 q = rotation_about(a, c).apply(p);
    dist.push_back(l2(extract_descriptor(img, {p, s, theta}), extract_descriptor(rot, {q, s, wrap_angle(theta + a)})));
  }
  CHECK(median(dist) < 0.25);
}

TEST_CASE("descriptor is scale covariant") {
  const GrayImage img = testing::textured_image(120, 120, 8);
  const GrayImage up = resize_by(img, 2.0);
  const Similarity2 to_up = resize_transform(2.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> dist;
  for (int t = 0; t < 60; ++t) {
    const Point2 p{30 + 60 * U(rng), 30 + 60 * U(rng)};
    const double s = 12 + 20 * U(rng);
    const double theta = wrap_angle(6.3 * U(rng));
    dist.push_back(l2(extract_descriptor(img, {p, s, theta}), extract_descriptor(up, {to_up.apply(p), 2 * s, theta})));
  }
  CHECK(median(dist) < 0.25);
}

TEST_CASE("extraction is deterministic and batch extraction matches single calls") {
  const GrayImage img = testing::textured_image(80, 80, 1);
  const std::vector<PatchSpec> ps{{{40, 40}, 20, 0.2}, {{30, 50}, 13, -2.0}};
  const auto batch = extract_descriptors(img, ps);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(batch[i] == extract_descriptor(img, ps[i]));
    CHECK(batch[i] == extract_descriptor(img, ps[i]));
  }
}
