#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "calscan/errors.hpp"
#include "calscan/rirv.hpp"
#include "calscan/synth.hpp"
#include "calscan/transforms.hpp"
#include "test_helpers.hpp"

using namespace calscan;

namespace {

constexpr double kPi = std::numbers::pi;

// Returns the exact patch-frame displacement to the true landmark. It knows
// the landmarks of one working image and of its mirror.
class OraclePredictor final : public DisplacementPredictor {
 public:
  OraclePredictor(GrayImage work, LandmarkSet lm) : work_(std::move(work)), lm_(lm) {}

  std::vector<Vec2> predict(int, int landmark, const GrayImage& img,
                            std::span<const PatchSpec> patches) const override {
    const bool same = img == work_;
    const Point2 target = same ? lm_[landmark] : flip_point(lm_[landmark], work_.width());
    std::vector<Vec2> out;
    for (const PatchSpec& p : patches) out.push_back(to_patch_frame(target - p.center, p));
    return out;
  }

 private:
  GrayImage work_;
  LandmarkSet lm_;
};

// Always votes the same patch-frame displacement.
class ConstantPredictor final : public DisplacementPredictor {
 public:
  explicit ConstantPredictor(Vec2 d) : d_(d) {}
  std::vector<Vec2> predict(int, int, const GrayImage&, std::span<const PatchSpec> patches) const override {
    return std::vector<Vec2>(patches.size(), d_);
  }

 private:
  Vec2 d_;
};

// Abstains on patches centred left of `edge`, otherwise defers to `inner`.
class LeftBlindPredictor final : public DisplacementPredictor {
 public:
  LeftBlindPredictor(const DisplacementPredictor& inner, double edge) : inner_(inner), edge_(edge) {}
  std::vector<Vec2> predict(int stage, int landmark, const GrayImage& img,
                            std::span<const PatchSpec> patches) const override {
    std::vector<Vec2> out = inner_.predict(stage, landmark, img, patches);
    for (std::size_t k = 0; k < out.size(); ++k)
      if (patches[k].center.x < edge_) out[k] = {NAN, NAN};
    return out;
  }

 private:
  const DisplacementPredictor& inner_;
  double edge_;
};

VoteSet votes_from(const std::vector<Point2>& pts) {
  VoteSet v;
  for (Point2 p : pts) v.candidates.push_back({p, std::nullopt, true});
  return v;
}

double brute_density(const std::vector<Point2>& pts, Point2 at, double h) {
  double s = 0.0;
  for (Point2 q : pts) s += std::exp(-0.5 * std::pow(distance(q, at) / h, 2));
  return s;
}

SynthCase synth_case(int side, double rotation, std::uint64_t seed) {
  SynthParams p;
  p.side = side;
  p.rotation_min = p.rotation_max = rotation;
  p.seed = seed;
  return generate_indexed_case(p, 0);
}

}  // namespace

TEST_CASE("normalisation examples and round trip") {
  const Vec2 a = normalize_displacement({10, 0}, kPi / 2, 10);
  CHECK(a.x == doctest::Approx(0.0).scale(1.0));
  CHECK(a.y == doctest::Approx(1.0));
  const Vec2 b = denormalize_displacement({0, 1}, kPi / 2, 10);
  CHECK(b.x == doctest::Approx(10.0));
  CHECK(std::abs(b.y) < 1e-12);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> D(-500, 500), T(-kPi, kPi), S(1, 100);
  double worst = 0.0, worst_norm = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Vec2 d{D(rng), D(rng)};
    const double t = T(rng), s = S(rng);
    worst = std::max(worst, norm(denormalize_displacement(normalize_displacement(d, t, s), t, s) - d));
    worst_norm = std::max(worst_norm, std::abs(norm(rotate_vec(d, t)) - norm(d)) / std::max(1.0, norm(d)));
  }
  CHECK(worst < 1e-9);
  CHECK(worst_norm < 1e-12);
}

TEST_CASE("patch-frame target is unchanged when image and patch rotate together") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 100; ++k) {
    const Point2 c{100 * U(rng), 100 * U(rng)}, lm{100 * U(rng), 100 * U(rng)};
    const PatchSpec p{c, 20 + 10 * U(rng), kPi * U(rng)};
    const Similarity2 r = rotation_about(kPi * U(rng), {3, 4});
    const PatchSpec q{r.apply(c), p.side, wrap_angle(p.theta + r.rotation)};
    const Vec2 before = to_patch_frame(lm - p.center, p);
    const Vec2 after = to_patch_frame(r.apply(lm) - q.center, q);
    CHECK(norm(before - after) < 1e-9);
    CHECK(norm(from_patch_frame(before, p) - (lm - c)) < 1e-9);
  }
}

TEST_CASE("default stage table") {
  const StageTable t = default_stage_table();
  CHECK(t.train[0].count == 100);
  CHECK(t.train[1].count == 100);
  CHECK(t.train[2].count == 80);
  CHECK(t.train[3].count == 50);
  CHECK_FALSE(t.train[0].dtheta);
  CHECK_FALSE(t.predict[0].dtheta);
  CHECK(t.predict[1].region == 300.0);
  CHECK_FALSE(t.predict[3].threshold);
  for (int h = 0; h < 3; ++h) CHECK(t.predict[h].threshold);
  for (const auto& s : t.train) CHECK_NOTHROW(s.validate());
  StageParams bad = t.predict[0];
  bad.side = {10, 5};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("sample_patches honours region, sides and orientation") {
  const GrayImage img = testing::textured_image(400, 300, 3);
  StageParams s = default_stage_table().predict[1];
  s.count = 2000;
  std::mt19937_64 rng(4);
  const Point2 c{380, 150};
  const double base = 0.7;
  for (const PatchSpec& p : sample_patches(rng, c, s, base, img)) {
    CHECK(p.center.x >= c.x - 150);
    CHECK(p.center.x <= 399);
    CHECK(std::abs(p.center.y - c.y) <= 150);
    CHECK(p.side >= s.side.lo);
    CHECK(p.side <= s.side.hi);
    CHECK(std::abs(wrap_angle(p.theta - base)) <= kPi / 6 + 1e-12);
  }

  StageParams whole = default_stage_table().predict[0];
  whole.count = 20;
  std::mt19937_64 r1(5), r2(5);
  const auto a = sample_patches(r1, std::nullopt, whole, std::nullopt, img);
  const auto b = sample_patches(r2, std::nullopt, whole, std::nullopt, img);
  REQUIRE(a.size() == 20);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].center == b[k].center);
    CHECK(a[k].theta == dominant_orientation(img, a[k].center, a[k].side).angle);
  }
}

TEST_CASE("hpdv_filter") {
  auto one = [](Point2 c, Point2 h) {
    VoteSet v;
    v.candidates.push_back({c, h, true});
    return v;
  };
  CHECK(hpdv_filter(one({50, 50}, {52, 50}), 30).valid_count() == 1);
  CHECK(hpdv_filter(one({50, 50}, {90, 50}), 30).valid_count() == 0);
  CHECK(hpdv_filter(one({50, 50}, {80, 50}), 30).valid_count() == 0);

  VoteSet ten;
  for (int k = 0; k < 10; ++k) ten.candidates.push_back({{50, 50}, Point2{50.0 + 5 * k, 50}, true});
  CHECK(hpdv_filter(ten, 30).valid_count() == 6);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0, 100);
  VoteSet rnd;
  for (int k = 0; k < 300; ++k) rnd.candidates.push_back({{U(rng), U(rng)}, Point2{U(rng), U(rng)}, true});
  for (double th : {5.0, 20.0, 40.0, 80.0}) {
    const VoteSet f = hpdv_filter(rnd, th);
    const VoteSet g = hpdv_filter(rnd, th * 1.5);
    std::size_t expected = 0;
    for (std::size_t k = 0; k < rnd.candidates.size(); ++k) {
      const Candidate& c = rnd.candidates[k];
      const bool ok = std::hypot(c.c.x - c.c_half->x, c.c.y - c.c_half->y) < th;
      expected += ok;
      CHECK(f.candidates[k].valid == ok);
      CHECK(f.candidates[k].c == c.c);
      if (f.candidates[k].valid) CHECK(g.candidates[k].valid);
    }
    CHECK(f.valid_count() == expected);
  }

  VoteSet missing;
  missing.candidates.push_back({{1, 1}, std::nullopt, true});
  CHECK_THROWS(hpdv_filter(missing, 10));
}

TEST_CASE("kde_vote") {
  CHECK(kde_vote(votes_from(std::vector<Point2>(7, {10, 10}))) == Point2{10, 10});

  std::vector<Point2> cluster{{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}, {0.5, 0.5}, {-0.5, 0.5}, {0.5, -0.5}, {-0.5, -0.5},
                              {100, 100}};
  const Point2 r = kde_vote(votes_from(cluster));
  CHECK(distance(r, {0, 0}) <= 2.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0, 1);
  for (int t = 0; t < 25; ++t) {
    std::vector<Point2> pts;
    const int n = 5 + t * 7;
    for (int k = 0; k < n; ++k) {
      const double spread = k % 3 == 0 ? 40 : 6;
      pts.push_back({200 + spread * N(rng), 100 + spread * N(rng)});
    }
    VoteSet v = votes_from(pts);
    for (std::size_t k = 0; k < pts.size(); k += 4) v.candidates[k].valid = false;
    std::vector<Point2> valid;
    for (const Candidate& c : v.candidates)
      if (c.valid) valid.push_back(c.c);
    const double h = kde_bandwidth(valid);
    const Point2 got = kde_vote(v);
    double best = -1.0;
    for (Point2 p : valid) best = std::max(best, brute_density(valid, p, h));
    CHECK(std::find(valid.begin(), valid.end(), got) != valid.end());
    CHECK(brute_density(valid, got, h) == doctest::Approx(best).epsilon(1e-12));

    std::shuffle(v.candidates.begin(), v.candidates.end(), rng);
    CHECK(kde_vote(v) == got);
  }

  VoteSet none = votes_from({{1, 1}});
  none.candidates[0].valid = false;
  CHECK_THROWS_AS(kde_vote(none), DataError);
  CHECK(kde_bandwidth(std::vector<Point2>{{1, 1}, {1, 1}}) == 1.0);
}

TEST_CASE("predict_stage with an oracle regressor recovers the truth") {
  const SynthCase sc = synth_case(640, 0.1, 11);
  const OraclePredictor oracle(sc.image, sc.landmarks);
  const StageTable table = default_stage_table();
  std::mt19937_64 rng(8);
  const StageResult s1 = predict_stage(oracle, table, sc.image, 1, std::nullopt, rng);
  for (int i = 0; i < kNumLandmarks; ++i) {
    CHECK(distance(s1.estimate[i], sc.landmarks[i]) < 0.5);
    CHECK(s1.votes[i].candidates.size() == 200);
    CHECK(s1.votes[i].candidates[0].c_half);
    CHECK_FALSE(s1.fallback[i]);
  }
  LandmarkSet prior = sc.landmarks;
  for (auto& p : prior.points) p = p + Vec2{20, -15};
  const StageResult s2 = predict_stage(oracle, table, sc.image, 2, prior, rng);
  const StageResult s4 = predict_stage(oracle, table, sc.image, 4, prior, rng);
  for (int i = 0; i < kNumLandmarks; ++i) {
    CHECK(distance(s2.estimate[i], sc.landmarks[i]) < 0.5);
    CHECK(distance(s4.estimate[i], sc.landmarks[i]) < 0.5);
    CHECK(s4.votes[i].valid_count() == s4.votes[i].candidates.size());
    CHECK_FALSE(s4.votes[i].candidates[0].c_half);
  }
  CHECK_THROWS_AS(predict_stage(oracle, table, sc.image, 2, std::nullopt, rng), ArgumentError);
  CHECK_THROWS_AS(predict_stage(oracle, table, sc.image, 1, prior, rng), ArgumentError);
}

TEST_CASE("stage 2 searches a 300 px square around the prior") {
  const GrayImage img = testing::textured_image(800, 800, 9);
  // A zero displacement makes each vote the patch centre itself.
  const ConstantPredictor zero({0, 0});
  LandmarkSet prior;
  prior.points = {Point2{400, 300}, Point2{300, 250}, Point2{200, 350}, Point2{280, 400}};
  std::mt19937_64 rng(10);
  const StageResult r = predict_stage(zero, default_stage_table(), img, 2, prior, rng);
  for (int i = 0; i < kNumLandmarks; ++i) {
    double dx = 0, dy = 0;
    for (const Candidate& c : r.votes[i].candidates) {
      dx = std::max(dx, std::abs(c.c.x - prior[i].x));
      dy = std::max(dy, std::abs(c.c.y - prior[i].y));
    }
    CHECK(dx <= 150);
    CHECK(dy <= 150);
    CHECK(std::max(dx, dy) > 120);
  }
}

TEST_CASE("HPDV with nothing valid falls back; off-canvas estimates are clamped") {
  const GrayImage img = testing::textured_image(400, 400, 12);
  std::mt19937_64 rng(13);
  // Half votes land 10 sides away from the full votes: nothing survives.
  const StageResult far = predict_stage(ConstantPredictor({20, 0}), default_stage_table(), img, 1, std::nullopt, rng);
  for (int i = 0; i < kNumLandmarks; ++i) {
    CHECK(far.fallback[i]);
    CHECK(far.votes[i].valid_count() == 0);
    CHECK(far.clamped[i]);
    CHECK(far.estimate[i].x >= 0);
    CHECK(far.estimate[i].x <= 399);
    CHECK(far.estimate[i].y >= 0);
    CHECK(far.estimate[i].y <= 399);
  }
}

TEST_CASE("abstaining patches cast no vote") {
  const SynthCase sc = synth_case(640, 0.1, 11);
  const OraclePredictor oracle(sc.image, sc.landmarks);
  const LeftBlindPredictor half_blind(oracle, 320);
  std::mt19937_64 rng(8);
  const StageResult s1 = predict_stage(half_blind, default_stage_table(), sc.image, 1, std::nullopt, rng);
  for (int i = 0; i < kNumLandmarks; ++i) {
    CHECK(distance(s1.estimate[i], sc.landmarks[i]) < 0.5);
    CHECK_FALSE(s1.fallback[i]);
    const auto& cands = s1.votes[i].candidates;
    const auto blind = std::count_if(cands.begin(), cands.end(), [](const Candidate& c) { return std::isnan(c.c.x); });
    CHECK(blind > 40);
    CHECK(s1.votes[i].valid_count() <= cands.size() - blind);
  }

  LandmarkSet prior = sc.landmarks;
  for (auto& p : prior.points) p = p + Vec2{7, 3};
  const LeftBlindPredictor blind(oracle, 1e9);
  for (int stage : {2, 4}) {
    const StageResult r = predict_stage(blind, default_stage_table(), sc.image, stage, prior, rng);
    for (int i = 0; i < kNumLandmarks; ++i) {
      CHECK(r.fallback[i]);
      CHECK(r.votes[i].valid_count() == 0);
      CHECK(r.estimate[i] == prior[i]);
    }
  }
  const StageResult none = predict_stage(blind, default_stage_table(), sc.image, 1, std::nullopt, rng);
  CHECK(none.estimate[0] == Point2{319.5, 319.5});
}

TEST_CASE("detect_landmarks with an oracle, including resizing and mirroring") {
  const SynthCase sc = synth_case(640, -0.05, 21);
  for (bool mirror : {false, true}) {
    CAPTURE(mirror);
    const GrayImage img = mirror ? flip_horizontal(sc.image) : sc.image;
    const LandmarkSet truth = mirror ? flip_landmarks(sc.landmarks, img.width()) : sc.landmarks;
    const double f = 1280.0 / 640.0;
    const GrayImage work = resize_by(img, f);
    const OraclePredictor oracle(work, transform(truth, resize_transform(f)));
    const Detection d = detect_landmarks(oracle, default_stage_table(), 1280, img, 3);
    CHECK(d.diagnostics.flipped == mirror);
    CHECK(d.diagnostics.working_scale == doctest::Approx(2.0));
    for (int i = 0; i < kNumLandmarks; ++i) CHECK(distance(d.landmarks[i], truth[i]) < 0.5);
    CHECK_FALSE(d.diagnostics.fallback_any());
    CHECK(d.diagnostics.stages[3].survival[0] == 1.0);
    const Detection again = detect_landmarks(oracle, default_stage_table(), 1280, img, 3);
    CHECK(again.landmarks == d.landmarks);
  }
  CHECK_THROWS_AS(detect_landmarks(ConstantPredictor({0, 0}), default_stage_table(), 1280, GrayImage(63, 200), 0),
                  InputError);
}

TEST_CASE("train_pipeline builds 32 regressors and rejects bad landmarks") {
  TrainConfig cfg;
  cfg.working_side = 256;
  for (auto& s : cfg.stages.train) {
    s.count = 6;
    s.side = {std::max(4.0, s.side.lo / 4), std::max(4.0, s.side.hi / 4)};
    if (s.region) s.region = *s.region / 4;
  }
  for (auto& s : cfg.stages.predict) {
    s.count = 8;
    s.side = {std::max(4.0, s.side.lo / 4), std::max(4.0, s.side.hi / 4)};
    if (s.region) s.region = *s.region / 4;
  }
  cfg.threads = 1;
  std::vector<TrainingCase> data;
  for (int k = 0; k < 3; ++k) {
    const SynthCase sc = synth_case(256, 0.02 * k, 30 + k);
    data.push_back({sc.image, sc.landmarks, "case" + std::to_string(k)});
  }
  TrainReport report;
  const RirvModel m = train_pipeline(data, cfg, 1, &report);
  int pairs = 0;
  for (int h = 1; h <= kNumStages; ++h) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      const RegressorPair& r = m.regressors(h, i);
      CHECK(r.x.support_vectors.size() <= 18);
      CHECK(r.y.support_vectors.size() <= 18);
      pairs += 2;
    }
  }
  CHECK(pairs == 32);
  CHECK(m.working_side() == 256);
  CHECK(report.support_vectors > 0);

  const RirvModel again = train_pipeline(data, cfg, 1);
  CHECK(again.regressors(3, 2).x.dual_coefs == m.regressors(3, 2).x.dual_coefs);

  const Detection d = detect_landmarks(m, data[0].image, 0);
  CHECK(d.landmarks.finite());

  const PatchSpec flat_patch{{100, 100}, 20, 0.3};
  const Vec2 silent = m.predict(1, 0, GrayImage(256, 256, 90), std::span(&flat_patch, 1))[0];
  CHECK(std::isnan(silent.x));
  CHECK(std::isnan(silent.y));
  CHECK(std::isfinite(m.predict(1, 0, data[0].image, std::span(&flat_patch, 1))[0].x));

  data[1].landmarks[2] = {-3, 10};
  try {
    train_pipeline(data, cfg, 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("case1") != std::string::npos);
  }
}
