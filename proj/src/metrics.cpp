#include "calscan/metrics.hpp"

#include <cmath>
#include <string>

#include "calscan/errors.hpp"

namespace calscan {

void EvalConfig::validate() const {
  if (!(ref_length_mm > 0.0)) throw ArgumentError("ref_length_mm must be positive");
  for (std::size_t i = 0; i < sdr_thresholds_mm.size(); ++i) {
    if (!(sdr_thresholds_mm[i] > 0.0)) throw ArgumentError("SDR thresholds must be positive");
    if (i > 0 && !(sdr_thresholds_mm[i] > sdr_thresholds_mm[i - 1]))
      throw ArgumentError("SDR thresholds must be ascending");
  }
}

std::array<double, kNumLandmarks> radial_errors_mm(const LandmarkSet& pred, const LandmarkSet& gt,
                                                   const EvalConfig& cfg) {
  cfg.validate();
  const double ref = distance(gt.L1(), gt.L3());
  if (!(ref > 0.0)) throw InputError("radial_errors_mm: ground-truth L1 and L3 coincide");
  std::array<double, kNumLandmarks> out{};
  for (int i = 0; i < kNumLandmarks; ++i) out[i] = distance(pred[i], gt[i]) * cfg.ref_length_mm / ref;
  return out;
}

MeanSd mre_sd(std::span<const double> errors) {
  if (errors.empty()) throw ArgumentError("mre_sd: empty error list");
  double sum = 0.0;
  for (double e : errors) sum += e;
  const double mean = sum / errors.size();
  double ss = 0.0;
  for (double e : errors) ss += (e - mean) * (e - mean);
  return {mean, std::sqrt(ss / errors.size())};
}

double sdr(std::span<const double> errors, double p) {
  if (errors.empty()) throw ArgumentError("sdr: empty error list");
  if (!(p > 0.0)) throw ArgumentError("sdr: threshold must be positive");
  std::size_t hits = 0;
  for (double e : errors) hits += e < p;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

MeanSd angle_mae(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw ArgumentError("angle_mae: empty list");
  std::vector<double> abs_err;
  abs_err.reserve(pairs.size());
  for (const auto& [pred, gt] : pairs) abs_err.push_back(std::abs(pred - gt));
  return mre_sd(abs_err);
}

Prf1 prf1(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) throw ArgumentError("prf1: negative count");
  Prf1 r;
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (r.recall && r.precision && *r.recall + *r.precision > 0.0)
    r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  return r;
}

IouResult iou(const Mask& x, const Mask& y) {
  if (x.width != y.width || x.height != y.height) {
    throw ArgumentError("iou: mask sizes differ (" + std::to_string(x.width) + "x" + std::to_string(x.height) +
                        " vs " + std::to_string(y.width) + "x" + std::to_string(y.height) + ")");
  }
  const std::size_t n = static_cast<std::size_t>(x.width) * x.height;
  if (x.on.size() != n || y.on.size() != n) throw ArgumentError("iou: mask buffer does not match its size");
  std::size_t inter = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = x.on[i] != 0, b = y.on[i] != 0;
    cx += a;
    cy += b;
    inter += a && b;
  }
  const std::size_t uni = cx + cy - inter;
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

}  // namespace calscan
