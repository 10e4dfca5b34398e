#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "calscan/landmarks.hpp"

namespace calscan {

struct EvalConfig {
  double ref_length_mm = 70.0;  // physical |L1 - L3|
  std::vector<double> sdr_thresholds_mm{2.0, 4.0, 6.0};
  void validate() const;
};

/// Per-landmark error in mm, scaling pixels by ref_length_mm / |gt.L1 - gt.L3|.
std::array<double, kNumLandmarks> radial_errors_mm(const LandmarkSet& pred, const LandmarkSet& gt,
                                                   const EvalConfig& cfg = {});

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population
};

MeanSd mre_sd(std::span<const double> errors);

/// Percentage of errors strictly below p.
double sdr(std::span<const double> errors, double p);

/// Mean and population SD of |pred - gt|.
MeanSd angle_mae(std::span<const std::pair<double, double>> pairs);

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

/// Undefined quantities are nullopt.
struct Prf1 {
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> f1;
};

Prf1 prf1(const ConfusionCounts& c);

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> on;  // row-major, non-zero = set
};

struct IouResult {
  double value = 0.0;
  bool both_empty = false;  // value defined as 1.0
};

IouResult iou(const Mask& x, const Mask& y);

}  // namespace calscan
