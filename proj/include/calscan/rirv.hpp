#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "calscan/descriptor.hpp"
#include "calscan/geometry.hpp"
#include "calscan/image.hpp"
#include "calscan/landmarks.hpp"
#include "calscan/svr.hpp"

namespace calscan {

inline constexpr int kNumStages = 4;
inline constexpr int kDefaultWorkingSide = 1280;
inline constexpr int kMinImageSide = 64;

/// rotate_vec(d, theta) / s.
Vec2 normalize_displacement(Vec2 d, double theta, double s);
/// rotate_vec(d_norm, -theta) * s; inverse of normalize_displacement.
Vec2 denormalize_displacement(Vec2 d_norm, double theta, double s);

/// Displacement expressed along the patch's own axes, in units of its side.
/// This is normalize_displacement with the angle that undoes the patch
/// rotation, so it is unchanged when image and patch rotate together.
inline Vec2 to_patch_frame(Vec2 d, const PatchSpec& p) { return normalize_displacement(d, -p.theta, p.side); }
inline Vec2 from_patch_frame(Vec2 d_norm, const PatchSpec& p) { return denormalize_displacement(d_norm, -p.theta, p.side); }

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct StageParams {
  int stage = 1;
  std::optional<Range> dtheta;  // absent: dominant gradient orientation
  Range side{16, 16};
  std::optional<double> region;  // SR width; absent: whole image
  int count = 1;
  std::optional<double> threshold;  // HPDV threshold (prediction only)

  void validate() const;
  friend bool operator==(const StageParams&, const StageParams&) = default;
};

struct StageTable {
  std::array<StageParams, kNumStages> train;
  std::array<StageParams, kNumStages> predict;
  friend bool operator==(const StageTable&, const StageTable&) = default;
};

/// Training and prediction parameters at the 1280 px working resolution.
StageTable default_stage_table();

/// Draws stage.count patches. Centres are uniform over the sampling region
/// (the clamped region x region square around region_center, or the whole
/// canvas), sides uniform in stage.side. With stage.dtheta absent each
/// orientation is the dominant gradient direction of its window in `img`;
/// otherwise theta_base plus a uniform draw from stage.dtheta.
std::vector<PatchSpec> sample_patches(std::mt19937_64& rng, std::optional<Point2> region_center,
                                      const StageParams& stage, std::optional<double> theta_base,
                                      const GrayImage& img);

struct Candidate {
  Point2 c;
  std::optional<Point2> c_half;
  bool valid = true;

  /// Voting position: the half-path vote when present.
  Point2 position() const { return c_half ? *c_half : c; }
};

struct VoteSet {
  std::vector<Candidate> candidates;
  std::size_t valid_count() const;
};

/// Marks candidates valid iff |c_half - c| < threshold. Every candidate must
/// carry c_half.
VoteSet hpdv_filter(const VoteSet& votes, double threshold);

/// Isotropic bandwidth used by kde_vote: Silverman's robust rule per axis,
/// pooled by root mean square, floored at 1 px.
double kde_bandwidth(std::span<const Point2> points);

/// Root-mean-square distance of the points from their centroid; 0 when empty.
double vote_spread(std::span<const Point2> points);

/// Valid candidate position with the highest Gaussian kernel density over
/// all valid positions. Throws DataError when nothing is valid.
Point2 kde_vote(const VoteSet& votes);

/// Source of normalised displacement predictions for a batch of patches.
class DisplacementPredictor {
 public:
  virtual ~DisplacementPredictor() = default;
  /// Patch-frame displacement to landmark `landmark` for each patch (stage 1..4).
  /// A non-finite entry abstains: that patch casts no vote.
  virtual std::vector<Vec2> predict(int stage, int landmark, const GrayImage& img,
                                    std::span<const PatchSpec> patches) const = 0;
};

/// x and y regressors of one (stage, landmark) merged over the union of their
/// support vectors, so each kernel value is computed once.
class JointSvr {
 public:
  JointSvr() = default;
  JointSvr(const SvrModel& x, const SvrModel& y);
  Vec2 predict(const Descriptor& f) const;
  std::size_t size() const { return coef_x_.size(); }

 private:
  std::vector<Descriptor> rows_;
  std::vector<double> coef_x_;
  std::vector<double> coef_y_;
  double bias_x_ = 0.0;
  double bias_y_ = 0.0;
  double gamma_x_ = 1.0;
  double gamma_y_ = 1.0;
};

struct RegressorPair {
  SvrModel x;
  SvrModel y;
};

struct TrainConfig {
  StageTable stages = default_stage_table();
  SvrHyper hyper;
  int working_side = kDefaultWorkingSide;
  std::size_t cache_bytes = std::size_t{2} << 30;  // shared by concurrent solvers
  unsigned threads = 0;                                // 0: hardware concurrency
};

class RirvModel final : public DisplacementPredictor {
 public:
  static constexpr int kFormatVersion = 1;

  RirvModel(int working_side, StageTable stages,
            std::array<std::array<RegressorPair, kNumLandmarks>, kNumStages> regressors);

  int working_side() const { return working_side_; }
  const StageTable& stages() const { return stages_; }
  const RegressorPair& regressors(int stage, int landmark) const { return regressors_[stage - 1][landmark]; }

  /// Abstains on patches whose descriptor is all zero (flat windows).
  std::vector<Vec2> predict(int stage, int landmark, const GrayImage& img,
                            std::span<const PatchSpec> patches) const override;

 private:
  int working_side_;
  StageTable stages_;
  std::array<std::array<RegressorPair, kNumLandmarks>, kNumStages> regressors_;
  std::array<std::array<JointSvr, kNumLandmarks>, kNumStages> joint_;
};

struct TrainingCase {
  GrayImage image;
  LandmarkSet landmarks;
  std::string name;
};

struct TrainReport {
  double seconds = 0.0;
  int unconverged = 0;
  std::size_t support_vectors = 0;
};

RirvModel train_pipeline(std::span<const TrainingCase> dataset, const TrainConfig& config, std::uint64_t seed,
                         TrainReport* report = nullptr);

struct StageResult {
  std::array<VoteSet, kNumLandmarks> votes;
  LandmarkSet estimate;
  std::array<bool, kNumLandmarks> fallback{};  // HPDV left nothing valid
  std::array<bool, kNumLandmarks> clamped{};   // estimate pulled back onto the canvas
};

/// One prediction stage on a working-resolution image. `params` supplies the
/// prediction table.
StageResult predict_stage(const DisplacementPredictor& predictor, const StageTable& params, const GrayImage& img,
                          int stage, const std::optional<LandmarkSet>& prior, std::mt19937_64& rng);

struct StageDiagnostics {
  LandmarkSet estimate;  // original image coordinates
  std::array<std::size_t, kNumLandmarks> votes{};
  std::array<std::size_t, kNumLandmarks> valid{};
  std::array<double, kNumLandmarks> survival{};  // valid / votes; 1 without HPDV
  std::array<bool, kNumLandmarks> fallback{};
  std::array<bool, kNumLandmarks> clamped{};
  // Root-mean-square distance of votes from their centroid, working px: all
  // full-path votes, and the positions actually voted on after HPDV.
  std::array<double, kNumLandmarks> spread_all{};
  std::array<double, kNumLandmarks> spread_voted{};
};

struct Diagnostics {
  double working_scale = 1.0;  // working px per original px
  bool flipped = false;
  std::array<StageDiagnostics, kNumStages> stages;
  bool fallback_any() const;
};

struct Detection {
  LandmarkSet landmarks;  // original image coordinates
  Diagnostics diagnostics;
};

Detection detect_landmarks(const RirvModel& model, const GrayImage& img, std::uint64_t seed = 0);
Detection detect_landmarks(const DisplacementPredictor& predictor, const StageTable& stages, int working_side,
                           const GrayImage& img, std::uint64_t seed = 0);

}  // namespace calscan
