// Prints one PASS/FAIL line per acceptance criterion. Exit status is 0 when
// every criterion passes except those named with --expect-fail, which are
// still evaluated and reported.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calscan/angles.hpp"
#include "calscan/descriptor.hpp"
#include "calscan/model_io.hpp"
#include "calscan/rirv.hpp"
#include "calscan/svr.hpp"
#include "calscan/synth.hpp"
#include "calscan/transforms.hpp"
#include "json.hpp"
#include "metrics_oracle.hpp"
#include "test_helpers.hpp"

using namespace calscan;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  std::string id;
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

LandmarkSet lms(Point2 a, Point2 b, Point2 c, Point2 d) {
  LandmarkSet lm;
  lm.points = {a, b, c, d};
  return lm;
}

Outcome round_trip() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> D(-1000, 1000), T(-kPi, kPi), S(1, 100);
  std::vector<std::array<double, 4>> triples(10000);
  for (auto& t : triples) t = {D(rng), D(rng), T(rng), S(rng)};
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& [x, y, theta, s] : triples) {
    const Vec2 d{x, y};
    worst = std::max(worst, norm(denormalize_displacement(normalize_displacement(d, theta, s), theta, s) - d));
  }
  const double secs = seconds_since(t0);
  return {"normalisation-round-trip", worst < 1e-9 && secs < 1.0,
          fmt("10^4 triples, max error %.3g px, %.4f s", worst, secs)};
}

Outcome angles() {
  int bad = 0;
  auto expect = [&](double got, double want) { bad += !(std::abs(got - want) < 1e-9); };
  expect(signed_angle({1, 0}, {1, 0}), 0);
  expect(signed_angle({1, 0}, {0, 1}), 90);
  expect(signed_angle({1, 0}, {-1, 1}), 135);
  expect(bohler_angle(lms({0, 0}, {10, 0}, {20, 0}, {1, 1})), 0);
  expect(bohler_angle(lms({20, 10}, {10, 0}, {0, 10}, {1, 1})), 90);
  expect(bohler_angle(lms({20, 0}, {10, 5}, {0, 0}, {1, 1})), -std::atan2(100.0, 75.0) * 180 / kPi);
  expect(gissane_angle(lms({9, 9}, {0, 1}, {1, 0}, {0, 0})), 90);
  expect(gissane_angle(lms({9, 9}, {1, 0}, {-1, 0}, {0, 0})), 180);
  expect(gissane_angle(lms({9, 9}, {2, 0}, {1, 1}, {0, 0})), 45);
  const int examples = 9;

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const LandmarkSet lm = lms({200 + 30 * U(rng), 60 + 30 * U(rng)}, {110 + 30 * U(rng), 30 * U(rng)},
                               {30 * U(rng), 60 + 30 * U(rng)}, {90 + 30 * U(rng), 50 + 30 * U(rng)});
    Similarity2 s;
    s.rotation = kPi * U(rng);
    s.scale = std::exp(2 * U(rng));
    s.translation = {1000 * U(rng), 1000 * U(rng)};
    const LandmarkSet m = transform(lm, s);
    worst = std::max({worst, std::abs(bohler_angle(m) - bohler_angle(lm)), std::abs(gissane_angle(m) - gissane_angle(lm))});
  }
  return {"angles", bad == 0 && worst < 1e-6,
          fmt("%d/%d examples exact to 1e-9 deg; max drift over 10^3 similarities %.3g deg", examples - bad, examples,
              worst)};
}

Outcome metrics() {
  const int bad = oracle::metric_mismatches(1000, 3);
  return {"metrics-oracle", bad == 0, fmt("10^3 random instances, %d mismatches at 1e-12", bad)};
}

Outcome descriptor() {
  const GrayImage img = testing::textured_image(240, 240, 21);
  const Point2 c{119.5, 119.5};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> dist;
  for (int t = 0; t < 100; ++t) {
    const double a = 2 * kPi * U(rng);
    const Point2 p{c.x + 50 * (U(rng) - 0.5), c.y + 50 * (U(rng) - 0.5)};
    const double s = 16 + 24 * U(rng);
    const double theta = wrap_angle(2 * kPi * U(rng));
    const GrayImage rot = rotate_image(img, a, c);
    const Descriptor d0 = extract_descriptor(img, {p, s, theta});
    const Descriptor d1 = extract_descriptor(rot, {rotation_about(a, c).apply(p), s, wrap_angle(theta + a)});
    dist.push_back(std::sqrt(squared_distance(d0.data(), d1.data())));
  }
  std::nth_element(dist.begin(), dist.begin() + 50, dist.end());
  const double median = dist[50];
  const Descriptor flat = extract_descriptor(GrayImage(64, 64, 77), {{32, 32}, 20, 0.4});
  const bool zero = std::all_of(flat.begin(), flat.end(), [](float v) { return v == 0.0f; });
  return {"descriptor-rotation", median < 0.25 && zero,
          fmt("median L2 distance %.4f over 100 patches; constant patch %s", median, zero ? "exactly zero" : "NOT zero")};
}

Outcome svr(const std::string& fixture_dir) {
  std::ifstream in(fixture_dir + "/svr_qp.json");
  if (!in) return {"svr-vs-qp", false, "missing fixture " + fixture_dir + "/svr_qp.json"};
  const auto doc = nlohmann::json::parse(in);
  bool ok = true;
  std::string detail;
  for (const auto& c : doc) {
    SvrHyper h;
    h.C = c["C"];
    h.epsilon = c["epsilon"];
    h.gamma = c["gamma"];
    std::vector<Descriptor> x;
    for (const auto& row : c["features"]) {
      Descriptor d;
      for (int k = 0; k < kDescriptorSize; ++k) d[k] = row[k].get<float>();
      x.push_back(d);
    }
    const auto y = c["targets"].get<std::vector<double>>();
    const auto ref = c["predictions"].get<std::vector<double>>();
    const SvrModel m = svr_train(x, y, h, 0);
    double fit = 0.0, agree = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = svr_predict(m, x[i]);
      fit += std::abs(p - y[i]) / x.size();
      agree += std::abs(p - ref[i]) / x.size();
    }
    const bool pass = x.size() <= 50 && fit <= h.epsilon + 0.1 && agree <= h.epsilon + 0.1;
    ok = ok && pass;
    detail += fmt("%s%s n=%zu fit MAE %.3f, |SMO-QP| %.2g (bound %.2f)", detail.empty() ? "" : "; ",
                  c["name"].get<std::string>().c_str(), x.size(), fit, agree, h.epsilon + 0.1);
  }
  return {"svr-vs-qp", ok, detail};
}

// Filter and vote checks that need no model.
std::pair<bool, std::string> hpdv_kde_units() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 200);
  std::normal_distribution<double> N(0, 1);
  int filter_bad = 0, kde_bad = 0;
  const int fixtures = 200;
  for (int t = 0; t < fixtures; ++t) {
    VoteSet v;
    const int n = 1 + t % 60;
    for (int k = 0; k < n; ++k) v.candidates.push_back({{U(rng), U(rng)}, Point2{U(rng), U(rng)}, true});
    const double th = 5 + U(rng) / 2;
    std::size_t expected = 0;
    for (const Candidate& c : v.candidates) {
      const double dx = c.c.x - c.c_half->x, dy = c.c.y - c.c_half->y;
      expected += std::sqrt(dx * dx + dy * dy) < th;
    }
    filter_bad += hpdv_filter(v, th).valid_count() != expected;

    std::vector<Point2> pts;
    const Point2 mode{U(rng), U(rng)};
    for (int k = 0; k < n; ++k) {
      const double sd = k % 4 == 0 ? 50 : 4;
      pts.push_back(mode + Vec2{sd * N(rng), sd * N(rng)});
    }
    VoteSet votes;
    for (Point2 p : pts) votes.candidates.push_back({p, std::nullopt, true});
    const double h = kde_bandwidth(pts);
    double best = -1;
    for (Point2 a : pts) {
      double s = 0;
      for (Point2 b : pts) s += std::exp(-0.5 * (std::pow(a.x - b.x, 2) + std::pow(a.y - b.y, 2)) / (h * h));
      best = std::max(best, s);
    }
    const Point2 got = kde_vote(votes);
    double s = 0;
    for (Point2 b : pts) s += std::exp(-0.5 * (std::pow(got.x - b.x, 2) + std::pow(got.y - b.y, 2)) / (h * h));
    kde_bad += std::abs(s - best) > 1e-9 * best || std::find(pts.begin(), pts.end(), got) == pts.end();
  }
  return {filter_bad == 0 && kde_bad == 0,
          fmt("filter count mismatches %d/%d, KDE argmax mismatches %d/%d", filter_bad, fixtures, kde_bad, fixtures)};
}

struct BenchCase {
  GrayImage image;
  LandmarkSet truth;
};

struct BenchResult {
  double mre_px = 0.0;  // working resolution
  double median_px = 0.0;
  double seconds_per_image = 0.0;
  int spread_reduced = 0;
  int images = 0;
  int fallbacks = 0;
  std::vector<Detection> detections;
};

BenchResult run_benchmark(const RirvModel& model, const std::vector<BenchCase>& cases, std::uint64_t seed) {
  BenchResult r;
  std::vector<double> errors;
  double secs = 0.0;
  for (const BenchCase& c : cases) {
    const auto t0 = Clock::now();
    Detection d = detect_landmarks(model, c.image, seed);
    secs += seconds_since(t0);
    const double to_working = d.diagnostics.working_scale;
    for (int i = 0; i < kNumLandmarks; ++i) errors.push_back(distance(d.landmarks[i], c.truth[i]) * to_working);
    double all = 0.0, voted = 0.0;
    for (int h = 0; h < 3; ++h) {
      for (int i = 0; i < kNumLandmarks; ++i) {
        all += d.diagnostics.stages[h].spread_all[i];
        voted += d.diagnostics.stages[h].spread_voted[i];
      }
    }
    r.spread_reduced += voted <= all;
    r.fallbacks += d.diagnostics.fallback_any();
    r.detections.push_back(std::move(d));
  }
  r.images = static_cast<int>(cases.size());
  for (double e : errors) r.mre_px += e / errors.size();
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
  r.median_px = errors[errors.size() / 2];
  r.seconds_per_image = secs / cases.size();
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int train_count = 200, test_count = 50;
  double C = 100.0, gamma = 5.0, epsilon = 0.05;
  std::uint64_t seed = 2024;
  unsigned threads = 0;
  std::string fixture_dir = CALSCAN_FIXTURE_DIR;
  std::vector<std::string> expect_fail;
  std::string json_out;
  app.add_option("--train", train_count, "Synthetic training images")->check(CLI::PositiveNumber);
  app.add_option("--test", test_count, "Held-out test images")->check(CLI::PositiveNumber);
  app.add_option("--C", C);
  app.add_option("--gamma", gamma);
  app.add_option("--epsilon", epsilon);
  app.add_option("--seed", seed);
  app.add_option("--threads", threads, "0: all cores");
  app.add_option("--fixtures", fixture_dir);
  app.add_option("--expect-fail", expect_fail, "Criteria reported but not counted towards the exit status");
  app.add_option("--json", json_out, "Also write the outcomes as JSON");
  CLI11_PARSE(app, argc, argv);

  std::vector<Outcome> outcomes;
  auto report = [&](Outcome o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", o.id.c_str(), o.detail.c_str());
    std::fflush(stdout);
    outcomes.push_back(std::move(o));
  };

  report(round_trip());
  report(angles());
  report(metrics());
  report(descriptor());
  report(svr(fixture_dir));

  // Benchmark data: default synthetic poses (rotation within +/-10 degrees).
  SynthParams sp;
  sp.seed = seed;
  std::vector<TrainingCase> train;
  for (int k = 0; k < train_count; ++k) {
    SynthCase c = generate_indexed_case(sp, k);
    train.push_back({std::move(c.image), c.landmarks, "train " + std::to_string(k)});
  }
  std::vector<BenchCase> plain, rotated;
  std::mt19937_64 rot_rng(seed ^ 0x5EED);
  std::uniform_real_distribution<double> turn(0.0, 2 * kPi);
  for (int k = 0; plain.size() < static_cast<std::size_t>(test_count); ++k) {
    SynthCase c = generate_indexed_case(sp, 1'000'000 + k);
    const Point2 centre{(c.image.width() - 1) / 2.0, (c.image.height() - 1) / 2.0};
    const double a = turn(rot_rng);
    const Similarity2 r = rotation_about(a, centre);
    const LandmarkSet truth_rot = transform(c.landmarks, r);
    const bool fits = std::all_of(truth_rot.points.begin(), truth_rot.points.end(),
                                  [&](const Point2& p) { return c.image.contains(p); });
    if (!fits) continue;
    rotated.push_back({rotate_image(c.image, a, centre), truth_rot});
    plain.push_back({std::move(c.image), c.landmarks});
  }

  TrainConfig cfg;
  cfg.hyper.C = C;
  cfg.hyper.gamma = gamma;
  cfg.hyper.epsilon = epsilon;
  cfg.threads = threads;
  TrainReport train_report;
  const RirvModel model = train_pipeline(train, cfg, seed, &train_report);
  train.clear();

  const BenchResult bp = run_benchmark(model, plain, seed);
  const BenchResult br = run_benchmark(model, rotated, seed);

  const auto [units_ok, units_detail] = hpdv_kde_units();
  const double reduced = 100.0 * bp.spread_reduced / bp.images;
  report({"hpdv-kde", units_ok && reduced >= 90.0,
          units_detail + fmt("; HPDV reduced vote spread on %d/%d test images (%.1f%%, need >= 90%%)",
                             bp.spread_reduced, bp.images, reduced)});

  const double ratio = br.mre_px / bp.mre_px;
  const double train_min = train_report.seconds / 60.0;
  const double det = std::max(bp.seconds_per_image, br.seconds_per_image);
  const bool mre_ok = bp.mre_px < 4.0, ratio_ok = ratio <= 1.25, train_ok = train_min < 30.0, det_ok = det < 5.0;
  report({"end-to-end-benchmark", mre_ok && ratio_ok && train_ok && det_ok,
          fmt("train %d / test %d: MRE %.2f px (median %.2f) %s 4; rotated MRE %.2f px (median %.2f), ratio %.3f %s "
              "1.25; training %.1f min %s 30; detection %.2f s/image %s 5; fallbacks %d plain, %d rotated",
              train_count, bp.images, bp.mre_px, bp.median_px, mre_ok ? "<" : ">=", br.mre_px, br.median_px, ratio,
              ratio_ok ? "<=" : ">", train_min, train_ok ? "<" : ">=", det, det_ok ? "<" : ">=", bp.fallbacks,
              br.fallbacks)});

  std::stringstream buf;
  write_model(buf, model);
  const RirvModel back = read_model(buf);
  int identical = 0;
  const int n_persist = std::min<int>(10, static_cast<int>(plain.size()));
  for (int k = 0; k < n_persist; ++k) {
    const Detection d = detect_landmarks(back, plain[k].image, seed);
    bool same = d.landmarks == bp.detections[k].landmarks;
    for (int h = 0; h < kNumStages; ++h) same = same && d.diagnostics.stages[h].estimate == bp.detections[k].diagnostics.stages[h].estimate;
    identical += same;
  }
  report({"model-persistence", identical == n_persist && n_persist == 10,
          fmt("%d/%d detections bit-identical after serialise/deserialise (%zu bytes)", identical, n_persist,
              buf.str().size())});

  const std::set<std::string> allowed(expect_fail.begin(), expect_fail.end());
  int unexpected = 0, passed = 0;
  nlohmann::json doc = nlohmann::json::array();
  for (const Outcome& o : outcomes) {
    passed += o.pass;
    unexpected += !o.pass && !allowed.count(o.id);
    doc.push_back({{"id", o.id}, {"pass", o.pass}, {"detail", o.detail}});
  }
  std::printf("summary: %d/%zu criteria pass", passed, outcomes.size());
  if (!allowed.empty()) std::printf("; expected failures: %s", CLI::detail::join(expect_fail, ", ").c_str());
  std::printf("\n");
  if (!json_out.empty()) std::ofstream(json_out) << doc.dump(2) << "\n";
  return unexpected == 0 ? 0 : 1;
}
