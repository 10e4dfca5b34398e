#include "calscan/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "calscan/errors.hpp"
#include "calscan/png_io.hpp"
#include "calscan/transforms.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace calscan {
namespace {

std::uint64_t case_seed(std::uint64_t seed, std::size_t index, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), salt};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

std::optional<AngleReport> try_angles(const LandmarkSet& lm) {
  try {
    return angle_report(lm);
  } catch (const DegenerateGeometryError&) {
    return std::nullopt;
  }
}

nlohmann::json mean_sd_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

nlohmann::json summary_json(const EvalConfig& config, const LandmarkSummary& s) {
  nlohmann::json sdr = nlohmann::json::object();
  for (std::size_t k = 0; k < config.sdr_thresholds_mm.size(); ++k) {
    std::ostringstream key;
    key << config.sdr_thresholds_mm[k];
    sdr[key.str()] = s.sdr[k];
  }
  nlohmann::json per = nlohmann::json::array();
  for (const MeanSd& m : s.per_landmark_mm) per.push_back(mean_sd_json(m));
  return {
      {"cases", s.cases},
      {"mre_mm", mean_sd_json(s.mre_mm)},
      {"mre_working_px", mean_sd_json(s.mre_working_px)},
      {"sdr_percent", sdr},
      {"per_landmark_mm", per},
      {"bohler_mae_deg", mean_sd_json(s.bohler_mae)},
      {"gissane_mae_deg", mean_sd_json(s.gissane_mae)},
      {"degenerate_predictions", s.degenerate_predictions},
      {"fallbacks", s.fallbacks},
      {"seconds_per_image", s.seconds_per_image},
  };
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

std::vector<CaseResult> evaluate_cases(const DisplacementPredictor& predictor, const StageTable& stages,
                                       int working_side, std::span<const Annotation> records,
                                       const EvalOptions& options) {
  options.config.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].landmarks) usable.push_back(i);
  }
  std::vector<std::optional<CaseResult>> slots(usable.size());
  detail::parallel_for(usable.size(), options.threads, [&](std::size_t k) {
    const std::size_t index = usable[k];
    const Annotation& rec = records[index];
    GrayImage img = load_grayscale(rec.image);
    LandmarkSet truth = *rec.landmarks;
    CaseResult r;
    r.name = rec.image.string();
    if (options.rotate) {
      std::mt19937_64 rng(case_seed(options.seed, index, 0x0707A7Eu));
      r.rotation = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      const Point2 centre{(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
      img = rotate_image(img, r.rotation, centre);
      truth = transform(truth, rotation_about(r.rotation, centre));
      for (const Point2& p : truth.points) {
        if (!img.contains(p)) return;
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Detection det =
        detect_landmarks(predictor, stages, working_side, img, case_seed(options.seed, index, 0xDE7EC7u));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.truth = truth;
    r.predicted = det.landmarks;
    r.error_mm = radial_errors_mm(det.landmarks, truth, options.config);
    for (int i = 0; i < kNumLandmarks; ++i) {
      r.error_working_px[i] = distance(det.landmarks[i], truth[i]) * det.diagnostics.working_scale;
    }
    r.truth_angles = angle_report(truth);
    r.predicted_angles = try_angles(det.landmarks);
    r.fallback = det.diagnostics.fallback_any();
    slots[k] = std::move(r);
  });
  std::vector<CaseResult> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

std::vector<CaseResult> evaluate_cases(const RirvModel& model, std::span<const Annotation> records,
                                       const EvalOptions& options) {
  return evaluate_cases(model, model.stages(), model.working_side(), records, options);
}

LandmarkSummary summarize(std::span<const CaseResult> cases, const EvalConfig& config) {
  config.validate();
  if (cases.empty()) throw ArgumentError("summarize: no cases");
  LandmarkSummary s;
  s.cases = cases.size();
  std::vector<double> mm, px;
  std::array<std::vector<double>, kNumLandmarks> per;
  std::vector<std::pair<double, double>> bohler, gissane;
  double seconds = 0.0;
  for (const CaseResult& c : cases) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      mm.push_back(c.error_mm[i]);
      px.push_back(c.error_working_px[i]);
      per[i].push_back(c.error_mm[i]);
    }
    if (c.predicted_angles) {
      bohler.emplace_back(c.predicted_angles->bohler, c.truth_angles.bohler);
      gissane.emplace_back(c.predicted_angles->gissane, c.truth_angles.gissane);
    } else {
      ++s.degenerate_predictions;
    }
    s.fallbacks += c.fallback;
    seconds += c.seconds;
  }
  s.mre_mm = mre_sd(mm);
  s.mre_working_px = mre_sd(px);
  for (double p : config.sdr_thresholds_mm) s.sdr.push_back(sdr(mm, p));
  for (int i = 0; i < kNumLandmarks; ++i) s.per_landmark_mm[i] = mre_sd(per[i]);
  if (!bohler.empty()) {
    s.bohler_mae = angle_mae(bohler);
    s.gissane_mae = angle_mae(gissane);
  }
  s.seconds_per_image = seconds / cases.size();
  return s;
}

std::string metrics_json(const EvalConfig& config, const LandmarkSummary& plain,
                         const std::optional<LandmarkSummary>& rotated,
                         const std::optional<ConfusionCounts>& classification,
                         const std::optional<std::vector<double>>& ious) {
  nlohmann::json doc;
  doc["schema"] = "calscan-metrics/1";
  doc["config"] = {{"ref_length_mm", config.ref_length_mm},
                   {"sdr_thresholds_mm", config.sdr_thresholds_mm},
                   {"sd", "population"},
                   {"angle_convention", kAngleConvention}};
  doc["landmarks"] = {{"plain", summary_json(config, plain)},
                      {"rotated", rotated ? summary_json(config, *rotated) : nlohmann::json()}};
  if (classification) {
    const Prf1 m = prf1(*classification);
    doc["classification"] = {{"tp", classification->tp},       {"tn", classification->tn},
                             {"fp", classification->fp},       {"fn", classification->fn},
                             {"recall", optional_number(m.recall)}, {"precision", optional_number(m.precision)},
                             {"f1", optional_number(m.f1)}};
  } else {
    doc["classification"] = nullptr;
  }
  if (ious && !ious->empty()) {
    const MeanSd m = mre_sd(*ious);
    doc["segmentation"] = {{"cases", ious->size()}, {"mean_iou", m.mean}, {"sd_iou", m.sd}};
  } else {
    doc["segmentation"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

std::string metrics_csv(const EvalConfig& config, const LandmarkSummary& plain,
                        const std::optional<LandmarkSummary>& rotated) {
  std::ostringstream out;
  out << "set,cases,mre_mm,sd_mm";
  for (double p : config.sdr_thresholds_mm) out << ",sdr_" << p << "mm";
  out << ",bohler_mae,bohler_sd,gissane_mae,gissane_sd,mre_working_px\n";
  auto row = [&](const char* name, const LandmarkSummary& s) {
    out << name << ',' << s.cases << ',' << s.mre_mm.mean << ',' << s.mre_mm.sd;
    for (double v : s.sdr) out << ',' << v;
    out << ',' << s.bohler_mae.mean << ',' << s.bohler_mae.sd << ',' << s.gissane_mae.mean << ','
        << s.gissane_mae.sd << ',' << s.mre_working_px.mean << '\n';
  };
  row("plain", plain);
  if (rotated) row("rotated", *rotated);
  return out.str();
}

}  // namespace calscan
