#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calscan/angles.hpp"
#include "calscan/annotation.hpp"
#include "calscan/metrics.hpp"
#include "calscan/rirv.hpp"

namespace calscan {

struct CaseResult {
  std::string name;
  LandmarkSet truth;
  LandmarkSet predicted;
  std::array<double, kNumLandmarks> error_mm{};
  std::array<double, kNumLandmarks> error_working_px{};  // error scaled to the working resolution
  AngleReport truth_angles;
  std::optional<AngleReport> predicted_angles;  // absent when the prediction is degenerate
  double rotation = 0.0;                         // test-time rotation applied, radians
  bool fallback = false;
  double seconds = 0.0;
};

struct EvalOptions {
  EvalConfig config;
  bool rotate = false;  // rotate each image uniformly in [0, 2pi) about its centre
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Detects every annotated image (records without landmarks are skipped).
/// With rotate set, image and truth are rotated on the same canvas first;
/// cases whose rotated truth leaves the canvas are skipped.
std::vector<CaseResult> evaluate_cases(const DisplacementPredictor& predictor, const StageTable& stages,
                                       int working_side, std::span<const Annotation> records,
                                       const EvalOptions& options);
std::vector<CaseResult> evaluate_cases(const RirvModel& model, std::span<const Annotation> records,
                                       const EvalOptions& options);

struct LandmarkSummary {
  std::size_t cases = 0;
  MeanSd mre_mm;
  MeanSd mre_working_px;
  std::vector<double> sdr;  // percent, one per config threshold
  std::array<MeanSd, kNumLandmarks> per_landmark_mm{};
  MeanSd bohler_mae;
  MeanSd gissane_mae;
  std::size_t degenerate_predictions = 0;
  std::size_t fallbacks = 0;
  double seconds_per_image = 0.0;
};

LandmarkSummary summarize(std::span<const CaseResult> cases, const EvalConfig& config);

/// Metrics document shared with the fracture network tooling. `rotated`
/// and the classification/segmentation blocks are emitted as null when absent.
std::string metrics_json(const EvalConfig& config, const LandmarkSummary& plain,
                         const std::optional<LandmarkSummary>& rotated,
                         const std::optional<ConfusionCounts>& classification = std::nullopt,
                         const std::optional<std::vector<double>>& ious = std::nullopt);

/// Table-style CSV: one row per block (plain, rotated).
std::string metrics_csv(const EvalConfig& config, const LandmarkSummary& plain,
                        const std::optional<LandmarkSummary>& rotated);

}  // namespace calscan
