#include "calscan/rirv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

#include "calscan/errors.hpp"
#include "calscan/transforms.hpp"
#include "parallel.hpp"

namespace calscan {

namespace {

constexpr double kPi = std::numbers::pi;

void check_side(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ArgumentError("displacement scale must be positive");
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), tags.begin(), tags.end());
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

bool inside(const GrayImage& img, Point2 p) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= img.width() - 1.0 && p.y <= img.height() - 1.0;
}

// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

double silverman_axis(std::vector<double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::sort(v.begin(), v.end());
  const double iqr = (quantile(v, 0.75) - quantile(v, 0.25)) / 1.349;
  const double spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace

Vec2 normalize_displacement(Vec2 d, double theta, double s) {
  check_side(s);
  return rotate_vec(d, theta) / s;
}

Vec2 denormalize_displacement(Vec2 d_norm, double theta, double s) {
  check_side(s);
  return rotate_vec(d_norm, -theta) * s;
}

void StageParams::validate() const {
  const std::string where = "stage " + std::to_string(stage) + ": ";
  if (stage < 1 || stage > kNumStages) throw ArgumentError(where + "stage index out of range");
  if (!(side.lo >= 4.0) || !(side.lo <= side.hi)) throw ArgumentError(where + "side range must satisfy 4 <= lo <= hi");
  if (dtheta && !(dtheta->lo <= dtheta->hi)) throw ArgumentError(where + "empty angle range");
  if (region && !(*region > 0.0)) throw ArgumentError(where + "sampling region must be positive");
  if (count < 1) throw ArgumentError(where + "patch count must be >= 1");
  if (threshold && !(*threshold > 0.0)) throw ArgumentError(where + "threshold must be positive");
}

StageTable default_stage_table() {
  StageTable t;
  t.train[0] = {1, std::nullopt, {30, 50}, std::nullopt, 100, std::nullopt};
  t.train[1] = {2, Range{-kPi / 4, kPi / 4}, {25, 35}, 440.0, 100, std::nullopt};
  t.train[2] = {3, Range{-kPi / 6, kPi / 6}, {15, 20}, 300.0, 80, std::nullopt};
  t.train[3] = {4, Range{-kPi / 6, kPi / 6}, {10, 16}, 200.0, 50, std::nullopt};
  t.predict[0] = {1, std::nullopt, {35, 45}, std::nullopt, 200, 100.0};
  t.predict[1] = {2, Range{-kPi / 6, kPi / 6}, {25, 35}, 300.0, 100, 60.0};
  t.predict[2] = {3, Range{-kPi / 12, kPi / 12}, {16, 19}, 160.0, 80, 30.0};
  t.predict[3] = {4, Range{-kPi / 12, kPi / 12}, {13, 14}, 80.0, 50, std::nullopt};
  return t;
}

std::vector<PatchSpec> sample_patches(std::mt19937_64& rng, std::optional<Point2> region_center,
                                      const StageParams& stage, std::optional<double> theta_base,
                                      const GrayImage& img) {
  stage.validate();
  const double xmax = img.width() - 1.0, ymax = img.height() - 1.0;
  double x0 = 0.0, x1 = xmax, y0 = 0.0, y1 = ymax;
  if (stage.region && region_center) {
    const double half = *stage.region / 2.0;
    const double cx = std::clamp(region_center->x, 0.0, xmax);
    const double cy = std::clamp(region_center->y, 0.0, ymax);
    x0 = std::max(0.0, region_center->x - half);
    x1 = std::min(xmax, region_center->x + half);
    y0 = std::max(0.0, region_center->y - half);
    y1 = std::min(ymax, region_center->y + half);
    if (x0 > x1) x0 = x1 = cx;
    if (y0 > y1) y0 = y1 = cy;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PatchSpec> out;
  out.reserve(stage.count);
  for (int k = 0; k < stage.count; ++k) {
    PatchSpec p;
    p.center = {x0 + (x1 - x0) * unit(rng), y0 + (y1 - y0) * unit(rng)};
    p.side = stage.side.lo + (stage.side.hi - stage.side.lo) * unit(rng);
    if (stage.dtheta) {
      const double d = stage.dtheta->lo + (stage.dtheta->hi - stage.dtheta->lo) * unit(rng);
      p.theta = wrap_angle(theta_base.value_or(0.0) + d);
    } else {
      p.theta = dominant_orientation(img, p.center, p.side).angle;
    }
    out.push_back(p);
  }
  return out;
}

std::size_t VoteSet::valid_count() const {
  return static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(), [](const Candidate& c) { return c.valid; }));
}

VoteSet hpdv_filter(const VoteSet& votes, double threshold) {
  VoteSet out = votes;
  for (Candidate& c : out.candidates) {
    if (!c.c_half) throw ArgumentError("hpdv_filter: candidate without a half-path vote");
    c.valid = distance(*c.c_half, c.c) < threshold;
  }
  return out;
}

double kde_bandwidth(std::span<const Point2> points) {
  if (points.size() < 2) return 1.0;
  std::vector<double> xs, ys;
  for (const Point2& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const double hx = silverman_axis(std::move(xs));
  const double hy = silverman_axis(std::move(ys));
  return std::max(1.0, std::sqrt((hx * hx + hy * hy) / 2.0));
}

Point2 kde_vote(const VoteSet& votes) {
  std::vector<Point2> pts;
  for (const Candidate& c : votes.candidates)
    if (c.valid) pts.push_back(c.position());
  if (pts.empty()) throw DataError("kde_vote: no valid candidates");
  // Sorting makes ties, and the floating-point sums, independent of input order.
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  const double h = kde_bandwidth(pts);
  const double k = -0.5 / (h * h);
  std::size_t best = 0;
  double best_density = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double density = 0.0;
    for (const Point2& q : pts) {
      const Vec2 d = pts[i] - q;
      density += std::exp(k * dot(d, d));
    }
    if (density > best_density) best_density = density, best = i;
  }
  return pts[best];
}

JointSvr::JointSvr(const SvrModel& x, const SvrModel& y)
    : bias_x_(x.bias), bias_y_(y.bias), gamma_x_(x.hyper.gamma), gamma_y_(y.hyper.gamma) {
  std::unordered_map<std::string, std::size_t> index;
  auto add = [&](const SvrModel& m, bool is_x) {
    for (std::size_t k = 0; k < m.support_vectors.size(); ++k) {
      std::string key(reinterpret_cast<const char*>(m.support_vectors[k].data()), sizeof(Descriptor));
      auto [it, fresh] = index.try_emplace(std::move(key), rows_.size());
      if (fresh) {
        rows_.push_back(m.support_vectors[k]);
        coef_x_.push_back(0.0);
        coef_y_.push_back(0.0);
      }
      (is_x ? coef_x_ : coef_y_)[it->second] += m.dual_coefs[k];
    }
  };
  add(x, true);
  add(y, false);
}

Vec2 JointSvr::predict(const Descriptor& f) const {
  double sx = 0.0, sy = 0.0;
  const bool shared = gamma_x_ == gamma_y_;
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    const double d = squared_distance(rows_[k].data(), f.data());
    const double kx = std::exp(-gamma_x_ * d);
    const double ky = shared ? kx : std::exp(-gamma_y_ * d);
    sx += coef_x_[k] * kx;
    sy += coef_y_[k] * ky;
  }
  return {sx + bias_x_, sy + bias_y_};
}

RirvModel::RirvModel(int working_side, StageTable stages,
                     std::array<std::array<RegressorPair, kNumLandmarks>, kNumStages> regressors)
    : working_side_(working_side), stages_(std::move(stages)), regressors_(std::move(regressors)) {
  if (working_side_ < kMinImageSide) throw ArgumentError("working side must be >= " + std::to_string(kMinImageSide));
  for (const auto& s : stages_.train) s.validate();
  for (const auto& s : stages_.predict) s.validate();
  for (int h = 0; h < kNumStages; ++h)
    for (int i = 0; i < kNumLandmarks; ++i) joint_[h][i] = JointSvr(regressors_[h][i].x, regressors_[h][i].y);
}

std::vector<Vec2> RirvModel::predict(int stage, int landmark, const GrayImage& img,
                                     std::span<const PatchSpec> patches) const {
  const JointSvr& m = joint_.at(stage - 1).at(landmark);
  const std::vector<Descriptor> f = extract_descriptors(img, patches);
  std::vector<Vec2> out(f.size());
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < f.size(); ++k) {
    const bool flat = std::all_of(f[k].begin(), f[k].end(), [](float v) { return v == 0.0f; });
    out[k] = flat ? Vec2{nan, nan} : m.predict(f[k]);
  }
  return out;
}

RirvModel train_pipeline(std::span<const TrainingCase> dataset, const TrainConfig& config, std::uint64_t seed,
                         TrainReport* report) {
  const auto t0 = std::chrono::steady_clock::now();
  if (dataset.empty()) throw ArgumentError("train_pipeline: empty dataset");
  if (config.working_side < kMinImageSide) throw ArgumentError("train_pipeline: working side too small");
  for (const auto& s : config.stages.train) s.validate();
  for (const auto& s : config.stages.predict) s.validate();
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const TrainingCase& c = dataset[k];
    const std::string name = c.name.empty() ? "case " + std::to_string(k) : c.name;
    if (!c.landmarks.finite()) throw DataError(name + ": non-finite landmark");
    for (int i = 0; i < kNumLandmarks; ++i)
      if (!inside(c.image, c.landmarks[i]))
        throw DataError(name + ": landmark L" + std::to_string(i + 1) + " lies outside the image");
  }

  struct Samples {
    std::vector<Descriptor> features;
    std::vector<double> tx, ty;
  };
  std::array<std::array<Samples, kNumLandmarks>, kNumStages> samples;

  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const TrainingCase& c = dataset[k];
    const double f = static_cast<double>(config.working_side) / std::max(c.image.width(), c.image.height());
    const GrayImage work = resize_by(c.image, f);
    const LandmarkSet lm = transform(c.landmarks, resize_transform(f));
    const bool mirror = is_mirrored(lm);
    const std::optional<GrayImage> flipped = mirror ? std::optional(flip_horizontal(work)) : std::nullopt;
    const LandmarkSet lm_flipped = mirror ? flip_landmarks(lm, work.width()) : lm;

    for (int h = 1; h <= kNumStages; ++h) {
      const bool fine = h >= 3;
      const GrayImage& img = fine && mirror ? *flipped : work;
      const LandmarkSet& gt = fine ? lm_flipped : lm;
      const StageParams& params = config.stages.train[h - 1];
      for (int i = 0; i < kNumLandmarks; ++i) {
        auto rng = derived_rng(seed, {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(h),
                                      static_cast<std::uint32_t>(i)});
        const std::optional<Point2> centre = h >= 2 ? std::optional(gt[i]) : std::nullopt;
        const std::optional<double> base = h >= 2 ? std::optional(l1_l3_angle(gt)) : std::nullopt;
        const std::vector<PatchSpec> patches = sample_patches(rng, centre, params, base, img);
        const std::vector<Descriptor> feats = extract_descriptors(img, patches);
        Samples& s = samples[h - 1][i];
        for (std::size_t j = 0; j < patches.size(); ++j) {
          const Vec2 d = to_patch_frame(gt[i] - patches[j].center, patches[j]);
          s.features.push_back(feats[j]);
          s.tx.push_back(d.x);
          s.ty.push_back(d.y);
        }
      }
    }
  }

  std::array<std::array<RegressorPair, kNumLandmarks>, kNumStages> regressors;
  const unsigned threads = detail::resolve_threads(config.threads);
  SvrTrainOptions options;
  options.cache_bytes = std::max<std::size_t>(config.cache_bytes / threads, std::size_t{16} << 20);
  // Largest problems first so the tail of the schedule is short.
  std::vector<int> jobs(kNumStages * kNumLandmarks);
  std::iota(jobs.begin(), jobs.end(), 0);
  std::stable_sort(jobs.begin(), jobs.end(), [&](int a, int b) {
    return samples[a / 4][a % 4].features.size() > samples[b / 4][b % 4].features.size();
  });
  detail::parallel_for(jobs.size(), threads, [&](std::size_t n) {
    const int j = jobs[n];
    const int h = j / 4, i = j % 4;
    Samples& s = samples[h][i];
    const std::uint64_t job_seed = derived_rng(seed, {0xA5u, static_cast<std::uint32_t>(j)})();
    const std::array<std::vector<double>, 2> targets{std::move(s.tx), std::move(s.ty)};
    std::vector<SvrModel> m = svr_train_shared(s.features, targets, config.hyper, job_seed, options);
    regressors[h][i].x = std::move(m[0]);
    regressors[h][i].y = std::move(m[1]);
    s = {};
  });

  if (report) {
    report->unconverged = 0;
    report->support_vectors = 0;
    for (const auto& stage : regressors) {
      for (const RegressorPair& p : stage) {
        report->unconverged += !p.x.converged + !p.y.converged;
        report->support_vectors += p.x.support_vectors.size() + p.y.support_vectors.size();
      }
    }
    report->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return RirvModel(config.working_side, config.stages, std::move(regressors));
}

StageResult predict_stage(const DisplacementPredictor& predictor, const StageTable& params, const GrayImage& img,
                          int stage, const std::optional<LandmarkSet>& prior, std::mt19937_64& rng) {
  if (stage < 1 || stage > kNumStages) throw ArgumentError("predict_stage: stage must be 1..4");
  if ((stage == 1) != !prior) throw ArgumentError("predict_stage: a prior is required exactly for stages 2..4");
  const StageParams& p = params.predict[stage - 1];
  p.validate();
  const std::uint64_t base_seed = rng();
  const std::optional<double> theta_base = prior ? std::optional(l1_l3_angle(*prior)) : std::nullopt;

  StageResult result;
  detail::parallel_for(kNumLandmarks, 0, [&](std::size_t n) {
    const int i = static_cast<int>(n);
    auto local = derived_rng(base_seed, {static_cast<std::uint32_t>(i)});
    const std::optional<Point2> centre = prior ? std::optional((*prior)[i]) : std::nullopt;
    const std::vector<PatchSpec> patches = sample_patches(local, centre, p, theta_base, img);
    const std::vector<Vec2> d = predictor.predict(stage, i, img, patches);

    VoteSet votes;
    votes.candidates.resize(patches.size());
    std::vector<PatchSpec> half(patches.size());
    std::vector<bool> cast(patches.size());
    for (std::size_t j = 0; j < patches.size(); ++j) {
      cast[j] = std::isfinite(d[j].x) && std::isfinite(d[j].y);
      const Vec2 shift = cast[j] ? from_patch_frame(d[j], patches[j]) : Vec2{};
      votes.candidates[j].c = cast[j] ? patches[j].center + shift : Point2{NAN, NAN};
      votes.candidates[j].valid = cast[j];
      half[j] = {patches[j].center + shift / 2.0, patches[j].side, patches[j].theta};
      // Dominant-orientation stages were trained on self-oriented windows.
      if (p.threshold && !p.dtheta) half[j].theta = dominant_orientation(img, half[j].center, half[j].side).angle;
    }
    const bool any_cast = std::find(cast.begin(), cast.end(), true) != cast.end();

    const VoteSet* ballot = &votes;
    VoteSet unfiltered;
    if (p.threshold && any_cast) {
      const std::vector<Vec2> dh = predictor.predict(stage, i, img, half);
      for (std::size_t j = 0; j < half.size(); ++j)
        votes.candidates[j].c_half = half[j].center + from_patch_frame(dh[j], half[j]);
      votes = hpdv_filter(votes, *p.threshold);
      for (std::size_t j = 0; j < half.size(); ++j) votes.candidates[j].valid = votes.candidates[j].valid && cast[j];
      if (votes.valid_count() == 0) {
        result.fallback[i] = true;
        for (std::size_t j = 0; j < half.size(); ++j)
          if (cast[j]) unfiltered.candidates.push_back({votes.candidates[j].c, std::nullopt, true});
        ballot = &unfiltered;
      }
    }
    Point2 est;
    if (any_cast) {
      est = kde_vote(*ballot);
    } else {
      result.fallback[i] = true;
      est = centre ? *centre : Point2{(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
    }
    if (!inside(img, est)) {
      est = {std::clamp(est.x, 0.0, img.width() - 1.0), std::clamp(est.y, 0.0, img.height() - 1.0)};
      result.clamped[i] = true;
    }
    result.estimate[i] = est;
    result.votes[i] = std::move(votes);
  });
  return result;
}

double vote_spread(std::span<const Point2> points) {
  if (points.empty()) return 0.0;
  Vec2 mean{};
  for (const Point2& p : points) mean = mean + as_vec(p) / static_cast<double>(points.size());
  double ss = 0.0;
  for (const Point2& p : points) ss += std::pow(norm(p - as_point(mean)), 2);
  return std::sqrt(ss / points.size());
}

bool Diagnostics::fallback_any() const {
  for (const StageDiagnostics& s : stages)
    for (bool f : s.fallback)
      if (f) return true;
  return false;
}

Detection detect_landmarks(const RirvModel& model, const GrayImage& img, std::uint64_t seed) {
  return detect_landmarks(model, model.stages(), model.working_side(), img, seed);
}

Detection detect_landmarks(const DisplacementPredictor& predictor, const StageTable& stages, int working_side,
                           const GrayImage& img, std::uint64_t seed) {
  if (std::min(img.width(), img.height()) < kMinImageSide) {
    throw InputError("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                     "; both sides must be at least " + std::to_string(kMinImageSide) + " px");
  }
  const double f = static_cast<double>(working_side) / std::max(img.width(), img.height());
  const GrayImage work = resize_by(img, f);
  const Similarity2 to_original = resize_transform(f).inverse();
  std::mt19937_64 rng(seed);

  Detection out;
  out.diagnostics.working_scale = f;
  std::array<StageResult, kNumStages> results;
  results[0] = predict_stage(predictor, stages, work, 1, std::nullopt, rng);
  results[1] = predict_stage(predictor, stages, work, 2, results[0].estimate, rng);

  const bool flip = is_mirrored(results[1].estimate);
  out.diagnostics.flipped = flip;
  const std::optional<GrayImage> flipped = flip ? std::optional(flip_horizontal(work)) : std::nullopt;
  const GrayImage& fine = flip ? *flipped : work;
  LandmarkSet prior = flip ? flip_landmarks(results[1].estimate, work.width()) : results[1].estimate;
  results[2] = predict_stage(predictor, stages, fine, 3, prior, rng);
  results[3] = predict_stage(predictor, stages, fine, 4, results[2].estimate, rng);

  for (int h = 0; h < kNumStages; ++h) {
    StageDiagnostics& d = out.diagnostics.stages[h];
    LandmarkSet est = results[h].estimate;
    if (h >= 2 && flip) est = flip_landmarks(est, work.width());
    d.estimate = transform(est, to_original);
    for (int i = 0; i < kNumLandmarks; ++i) {
      const VoteSet& v = results[h].votes[i];
      d.votes[i] = v.candidates.size();
      d.valid[i] = v.valid_count();
      d.survival[i] = d.votes[i] ? static_cast<double>(d.valid[i]) / d.votes[i] : 0.0;
      d.fallback[i] = results[h].fallback[i];
      d.clamped[i] = results[h].clamped[i];
      std::vector<Point2> all, voted;
      for (const Candidate& c : v.candidates) {
        if (!std::isfinite(c.c.x)) continue;
        all.push_back(c.c);
        if (c.valid) voted.push_back(c.position());
      }
      d.spread_all[i] = vote_spread(all);
      d.spread_voted[i] = d.fallback[i] ? d.spread_all[i] : vote_spread(voted);
    }
  }
  out.landmarks = out.diagnostics.stages[kNumStages - 1].estimate;
  return out;
}

}  // namespace calscan
