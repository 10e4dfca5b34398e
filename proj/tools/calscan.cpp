#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calscan/angles.hpp"
#include "calscan/annotation.hpp"
#include "calscan/errors.hpp"
#include "calscan/evaluate.hpp"
#include "calscan/model_io.hpp"
#include "calscan/overlay.hpp"
#include "calscan/png_io.hpp"
#include "calscan/rirv.hpp"
#include "calscan/roi.hpp"
#include "calscan/synth.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace calscan;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void write_text(const fs::path& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

json landmarks_json(const LandmarkSet& lm) {
  json out = json::array();
  for (const Point2& p : lm.points) out.push_back(point_json(p));
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  int count = 0;
  int start = 0;
  std::uint64_t seed = 0;
  std::string out;
  int side = 640;
  double rotation_deg = 10.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double translation = 30.0;
  double noise = 4.0;
  double fracture_rate = 0.0;
  unsigned threads = 0;
};

int run_synth(const SynthArgs& a) {
  SynthParams p;
  p.count = a.count;
  p.seed = a.seed;
  p.side = a.side;
  p.rotation_min = -a.rotation_deg * kDegToRad;
  p.rotation_max = a.rotation_deg * kDegToRad;
  p.scale_min = a.scale_min;
  p.scale_max = a.scale_max;
  p.translation_max = a.translation;
  p.noise = a.noise;
  p.fracture_rate = a.fracture_rate;
  p.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::vector<Annotation> records(a.count);
  detail::parallel_for(a.count, a.threads, [&](std::size_t i) {
    const int index = a.start + static_cast<int>(i);
    SynthCase c = generate_indexed_case(p, index);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%05d.png", index);
    const fs::path tmp = dir / (std::string(name) + ".tmp");
    save_png(c.image, tmp);
    fs::rename(tmp, dir / name);
    records[i] = Annotation{name, c.landmarks, c.fractured, c.fracture_polygons, c.fracture_kind};
  });
  save_annotations(dir / "annotations.json", records);
  std::cout << "wrote " << a.count << " cases to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string annotations;
  std::string out;
  std::uint64_t seed = 0;
  SvrHyper hyper;
  int working_side = kDefaultWorkingSide;
  unsigned threads = 0;
  std::size_t cache_mb = 2048;
};

int run_train(const TrainArgs& a) {
  const std::vector<Annotation> records = load_annotations(a.annotations);
  std::vector<TrainingCase> cases;
  for (const Annotation& r : records) {
    if (!r.landmarks) continue;
    cases.push_back({load_grayscale(r.image), *r.landmarks, r.image.string()});
  }
  if (cases.empty()) throw DataError(a.annotations + ": no annotated images");
  TrainConfig config;
  config.hyper = a.hyper;
  config.working_side = a.working_side;
  config.threads = a.threads;
  config.cache_bytes = a.cache_mb << 20;
  TrainReport report;
  const RirvModel model = train_pipeline(cases, config, a.seed, &report);
  save_model(model, a.out);
  std::cout << "trained on " << cases.size() << " images in " << report.seconds << " s; "
            << report.support_vectors << " support vectors, " << report.unconverged
            << " regressors hit the iteration budget\n";
  return 0;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string model;
  std::string image;
  std::string out = "-";
  std::string overlay;
  std::uint64_t seed = 0;
  double ref_mm = 70.0;
};

int run_detect(const DetectArgs& a) {
  const RirvModel model = load_model(a.model);
  const GrayImage img = load_grayscale(a.image);
  const Detection det = detect_landmarks(model, img, a.seed);
  const LandmarkSet& lm = det.landmarks;

  json doc;
  doc["image"] = a.image;
  doc["landmarks"] = landmarks_json(lm);
  const double chord = distance(lm.L1(), lm.L3());
  doc["mm_per_px"] = chord > 0.0 ? json(a.ref_mm / chord) : json();
  doc["angle_convention"] = kAngleConvention;
  try {
    const AngleReport r = angle_report(lm);
    doc["bohler_deg"] = r.bohler;
    doc["gissane_deg"] = r.gissane;
    doc["bohler_in_range"] = r.bohler_in_range;
    doc["gissane_in_range"] = r.gissane_in_range;
  } catch (const DegenerateGeometryError& e) {
    doc["bohler_deg"] = doc["gissane_deg"] = nullptr;
    doc["angle_error"] = e.what();
  }
  json stages = json::array();
  for (const StageDiagnostics& s : det.diagnostics.stages) {
    stages.push_back({{"landmarks", landmarks_json(s.estimate)},
                      {"votes", s.votes},
                      {"valid", s.valid},
                      {"survival", s.survival},
                      {"fallback", s.fallback},
                      {"clamped", s.clamped}});
  }
  doc["diagnostics"] = {{"working_scale", det.diagnostics.working_scale},
                        {"flipped", det.diagnostics.flipped},
                        {"fallback", det.diagnostics.fallback_any()},
                        {"stages", stages}};
  write_text(a.out, doc.dump(2) + "\n");
  if (!a.overlay.empty()) {
    const RgbImage ov = render_overlay(img, lm);
    save_png_rgb(ov.data, ov.width, ov.height, a.overlay);
  }
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string model;
  std::string annotations;
  std::string out = "-";
  std::string csv;
  bool rotate = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double ref_mm = 70.0;
  std::vector<double> sdr{2.0, 4.0, 6.0};
};

int run_evaluate(const EvaluateArgs& a) {
  const RirvModel model = load_model(a.model);
  const std::vector<Annotation> records = load_annotations(a.annotations);
  EvalOptions opt;
  opt.config.ref_length_mm = a.ref_mm;
  opt.config.sdr_thresholds_mm = a.sdr;
  opt.seed = a.seed;
  opt.threads = a.threads;
  const auto plain_cases = evaluate_cases(model, records, opt);
  if (plain_cases.empty()) throw DataError(a.annotations + ": no annotated images");
  const LandmarkSummary plain = summarize(plain_cases, opt.config);
  std::optional<LandmarkSummary> rotated;
  if (a.rotate) {
    opt.rotate = true;
    const auto rot_cases = evaluate_cases(model, records, opt);
    if (rot_cases.empty()) throw DataError(a.annotations + ": every rotated case left the canvas");
    rotated = summarize(rot_cases, opt.config);
  }
  write_text(a.out, metrics_json(opt.config, plain, rotated));
  if (!a.csv.empty()) write_text(a.csv, metrics_csv(opt.config, plain, rotated));
  return 0;
}

// ---------------------------------------------------------------- roi

struct RoiArgs {
  std::string annotations;
  std::string out;
  std::string model;
  std::uint64_t seed = 0;
  RoiParams params;
};

int run_roi(const RoiArgs& a) {
  const std::vector<Annotation> records = load_annotations(a.annotations);
  std::optional<RirvModel> model;
  if (!a.model.empty()) model = load_model(a.model);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  json index = json::array();
  for (const Annotation& r : records) {
    const GrayImage img = load_grayscale(r.image);
    LandmarkSet lm;
    std::string source;
    if (model) {
      lm = detect_landmarks(*model, img, a.seed).landmarks;
      source = "detected";
    } else if (r.landmarks) {
      lm = *r.landmarks;
      source = "annotation";
    } else {
      throw DataError(r.image.string() + ": no landmarks and no --model given");
    }
    std::optional<std::vector<Polygon>> polys;
    if (r.fractured || !r.fracture_polygons.empty()) polys = r.fracture_polygons;
    const RoiResult roi = normalize_roi(img, lm, polys, a.params);

    const std::string stem = r.image.stem().string();
    save_png(roi.roi, dir / (stem + "_roi.png"));
    json mask_name = nullptr;
    if (roi.mask) {
      GrayImage m(roi.mask->width, roi.mask->height);
      for (std::size_t i = 0; i < roi.mask->on.size(); ++i) m.pixels()[i] = roi.mask->on[i] ? 255 : 0;
      save_png(m, dir / (stem + "_mask.png"));
      mask_name = stem + "_mask.png";
    }
    LandmarkSet in_roi;
    for (int i = 0; i < kNumLandmarks; ++i) in_roi[i] = roi.to_roi.apply(lm[i]);
    const Similarity2& t = roi.to_roi.transform;
    json sidecar = {
        {"source", r.image.string()},
        {"roi", stem + "_roi.png"},
        {"mask", mask_name},
        {"side", a.params.out_side},
        {"label", r.fractured ? "fractured" : "normal"},
        {"fracture_kind", r.fracture_kind ? json(*r.fracture_kind) : json()},
        {"landmarks_source", source},
        {"landmarks", landmarks_json(in_roi)},
        {"to_roi",
         {{"flipped", roi.to_roi.flipped},
          {"source_width", roi.to_roi.source_width},
          {"rotation", t.rotation},
          {"scale", t.scale},
          {"translation", json::array({t.translation.x, t.translation.y})}}},
    };
    write_text(dir / (stem + ".json"), sidecar.dump(2) + "\n");
    index.push_back(stem + ".json");
  }
  write_text(dir / "index.json", index.dump(2) + "\n");
  std::cout << "wrote " << records.size() << " ROIs to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calscan: calcaneus landmark detection, angle measurement and ROI extraction"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
  synth->add_option("--count", sa.count, "Number of cases")->required()->check(CLI::PositiveNumber);
  synth->add_option("--start", sa.start, "Index of the first case")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sa.seed, "Dataset seed");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--side", sa.side, "Image side, px")->check(CLI::Range(64, 8192));
  synth->add_option("--rotation-deg", sa.rotation_deg, "Rotation range +/- degrees");
  synth->add_option("--scale-min", sa.scale_min);
  synth->add_option("--scale-max", sa.scale_max);
  synth->add_option("--translation", sa.translation, "Translation range +/- px");
  synth->add_option("--noise", sa.noise, "Noise sigma, grey levels");
  synth->add_option("--fracture-rate", sa.fracture_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--threads", sa.threads, "0: all cores");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the four-stage regression-voting model");
  train->add_option("--annotations", ta.annotations, "Annotation JSON")->required();
  train->add_option("--out", ta.out, "Model file")->required();
  train->add_option("--seed", ta.seed);
  train->add_option("--C", ta.hyper.C)->check(CLI::PositiveNumber);
  train->add_option("--epsilon", ta.hyper.epsilon)->check(CLI::NonNegativeNumber);
  train->add_option("--gamma", ta.hyper.gamma)->check(CLI::PositiveNumber);
  train->add_option("--tol", ta.hyper.tol)->check(CLI::PositiveNumber);
  train->add_option("--max-passes", ta.hyper.max_passes)->check(CLI::PositiveNumber);
  train->add_option("--working-side", ta.working_side)->check(CLI::Range(kMinImageSide, 8192));
  train->add_option("--threads", ta.threads, "0: all cores");
  train->add_option("--cache-mb", ta.cache_mb, "Kernel cache shared by concurrent solvers");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Detect landmarks and report the calcaneal angles");
  detect->add_option("--model", da.model)->required();
  detect->add_option("--image", da.image)->required();
  detect->add_option("--out", da.out, "Report JSON ('-' for stdout)");
  detect->add_option("--overlay", da.overlay, "Overlay PNG");
  detect->add_option("--seed", da.seed);
  detect->add_option("--ref-mm", da.ref_mm, "Physical L1-L3 distance")->check(CLI::PositiveNumber);

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Landmark and angle metrics over an annotated test set");
  evaluate->add_option("--model", ea.model)->required();
  evaluate->add_option("--annotations", ea.annotations)->required();
  evaluate->add_option("--out", ea.out, "Metrics JSON ('-' for stdout)");
  evaluate->add_option("--csv", ea.csv, "Metrics CSV");
  evaluate->add_flag("--rotate-test", ea.rotate, "Also evaluate on images rotated uniformly in [0, 360)");
  evaluate->add_option("--seed", ea.seed);
  evaluate->add_option("--threads", ea.threads, "0: all cores");
  evaluate->add_option("--ref-mm", ea.ref_mm)->check(CLI::PositiveNumber);
  evaluate->add_option("--sdr", ea.sdr, "SDR thresholds, mm")->expected(1, -1);

  RoiArgs ra;
  auto* roi = app.add_subcommand("roi", "Write normalised ROI/mask PNG pairs with JSON sidecars");
  roi->add_option("--annotations", ra.annotations)->required();
  roi->add_option("--out", ra.out, "Output directory")->required();
  roi->add_option("--model", ra.model, "Use detected instead of annotated landmarks");
  roi->add_option("--seed", ra.seed);
  roi->add_option("--side", ra.params.out_side)->check(CLI::Range(16, 4096));
  roi->add_option("--crop-factor", ra.params.crop_factor)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*train) return run_train(ta);
    if (*detect) return run_detect(da);
    if (*evaluate) return run_evaluate(ea);
    if (*roi) return run_roi(ra);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
