#include <numbers>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "calscan/angles.hpp"
#include "calscan/errors.hpp"
#include "calscan/metrics.hpp"
#include "calscan/model_io.hpp"
#include "calscan/png_io.hpp"
#include "calscan/rirv.hpp"
#include "calscan/roi.hpp"
#include "calscan/synth.hpp"

namespace py = pybind11;
using namespace calscan;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

GrayImage to_image(const U8Array& a) {
  if (a.ndim() != 2) throw ArgumentError("image must be a 2-D uint8 array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return GrayImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_image(const GrayImage& img) {
  U8Array out({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

LandmarkSet to_landmarks(const F64Array& a) {
  if (a.ndim() != 2 || a.shape(0) != kNumLandmarks || a.shape(1) != 2)
    throw ArgumentError("landmarks must be a (4, 2) array of (x, y)");
  LandmarkSet lm;
  for (int i = 0; i < kNumLandmarks; ++i) lm[i] = {a.at(i, 0), a.at(i, 1)};
  return lm;
}

F64Array from_landmarks(const LandmarkSet& lm) {
  F64Array out({kNumLandmarks, 2});
  for (int i = 0; i < kNumLandmarks; ++i) {
    out.mutable_at(i, 0) = lm[i].x;
    out.mutable_at(i, 1) = lm[i].y;
  }
  return out;
}

std::vector<Polygon> to_polygons(const std::vector<F64Array>& polys) {
  std::vector<Polygon> out;
  for (const F64Array& a : polys) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw ArgumentError("polygons must be (n, 2) arrays");
    Polygon p;
    for (py::ssize_t k = 0; k < a.shape(0); ++k) p.push_back({a.at(k, 0), a.at(k, 1)});
    out.push_back(std::move(p));
  }
  return out;
}

py::list from_polygons(const std::vector<Polygon>& polys) {
  py::list out;
  for (const Polygon& p : polys) {
    F64Array a({static_cast<py::ssize_t>(p.size()), py::ssize_t{2}});
    for (std::size_t k = 0; k < p.size(); ++k) {
      a.mutable_at(k, 0) = p[k].x;
      a.mutable_at(k, 1) = p[k].y;
    }
    out.append(a);
  }
  return out;
}

U8Array from_mask(const Mask& m) {
  U8Array out({m.height, m.width});
  std::copy(m.on.begin(), m.on.end(), out.mutable_data());
  return out;
}

Mask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw ArgumentError("mask must be a 2-D array");
  return {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
          std::vector<std::uint8_t>(a.data(), a.data() + a.size())};
}

py::object opt(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::none(); }

py::dict diagnostics_dict(const Diagnostics& d) {
  py::dict out;
  out["working_scale"] = d.working_scale;
  out["flipped"] = d.flipped;
  py::list stages;
  for (const StageDiagnostics& s : d.stages) {
    py::dict st;
    st["estimate"] = from_landmarks(s.estimate);
    st["votes"] = s.votes;
    st["valid"] = s.valid;
    st["survival"] = s.survival;
    st["fallback"] = s.fallback;
    st["clamped"] = s.clamped;
    stages.append(st);
  }
  out["stages"] = stages;
  return out;
}

}  // namespace

PYBIND11_MODULE(_calscan, m) {
  m.doc() = "Calcaneus radiograph landmark detection, angles, ROI normalisation and metrics.";

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DegenerateGeometryError>(m, "DegenerateGeometryError", PyExc_ValueError);

  m.def("load_png", [](const std::filesystem::path& p) { return from_image(load_grayscale(p)); }, py::arg("path"));
  m.def("save_png", [](const U8Array& a, const std::filesystem::path& p) { save_png(to_image(a), p); },
        py::arg("image"), py::arg("path"));

  m.def("template_landmarks", [](int side) { return from_landmarks(template_landmarks(side)); }, py::arg("side") = 640);
  m.def(
      "synth_case",
      [](int index, std::uint64_t seed, int side, double rotation_deg, double noise, double fracture_rate) {
        SynthParams p;
        p.seed = seed;
        p.side = side;
        p.rotation_min = -rotation_deg * std::numbers::pi / 180.0;
        p.rotation_max = -p.rotation_min;
        p.noise = noise;
        p.fracture_rate = fracture_rate;
        const SynthCase c = generate_indexed_case(p, index);
        py::dict out;
        out["image"] = from_image(c.image);
        out["landmarks"] = from_landmarks(c.landmarks);
        out["fractured"] = c.fractured;
        out["fracture_polygons"] = from_polygons(c.fracture_polygons);
        out["fracture_kind"] = c.fracture_kind ? py::object(py::str(*c.fracture_kind)) : py::none();
        return out;
      },
      py::arg("index"), py::arg("seed") = 0, py::arg("side") = 640, py::arg("rotation_deg") = 10.0,
      py::arg("noise") = 4.0, py::arg("fracture_rate") = 0.0);

  m.def("bohler_angle", [](const F64Array& lm) { return bohler_angle(to_landmarks(lm)); });
  m.def("gissane_angle", [](const F64Array& lm) { return gissane_angle(to_landmarks(lm)); });
  m.def("angle_report", [](const F64Array& lm) {
    const AngleReport r = angle_report(to_landmarks(lm));
    py::dict out;
    out["bohler_deg"] = r.bohler;
    out["gissane_deg"] = r.gissane;
    out["bohler_in_range"] = r.bohler_in_range;
    out["gissane_in_range"] = r.gissane_in_range;
    out["convention"] = kAngleConvention;
    return out;
  });

  m.def(
      "radial_errors_mm",
      [](const F64Array& pred, const F64Array& gt, double ref_mm) {
        EvalConfig cfg;
        cfg.ref_length_mm = ref_mm;
        return radial_errors_mm(to_landmarks(pred), to_landmarks(gt), cfg);
      },
      py::arg("pred"), py::arg("gt"), py::arg("ref_length_mm") = 70.0);
  m.def("mre_sd", [](const std::vector<double>& e) {
    const MeanSd r = mre_sd(e);
    return py::make_tuple(r.mean, r.sd);
  });
  m.def("sdr", [](const std::vector<double>& e, double p) { return sdr(e, p); }, py::arg("errors"), py::arg("p"));
  m.def(
      "prf1",
      [](std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
        const Prf1 r = prf1({tp, tn, fp, fn});
        py::dict out;
        out["recall"] = opt(r.recall);
        out["precision"] = opt(r.precision);
        out["f1"] = opt(r.f1);
        return out;
      },
      py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
  m.def("iou", [](const U8Array& x, const U8Array& y) { return iou(to_mask(x), to_mask(y)).value; });

  m.def(
      "normalize_roi",
      [](const U8Array& img, const F64Array& lm, std::optional<std::vector<F64Array>> polygons, int side,
         double crop_factor) {
        RoiParams params;
        params.out_side = side;
        params.crop_factor = crop_factor;
        std::optional<std::vector<Polygon>> polys;
        if (polygons) polys = to_polygons(*polygons);
        const LandmarkSet set = to_landmarks(lm);
        const RoiResult r = normalize_roi(to_image(img), set, polys, params);
        LandmarkSet mapped;
        for (int i = 0; i < kNumLandmarks; ++i) mapped[i] = r.to_roi.apply(set[i]);
        py::dict out;
        out["roi"] = from_image(r.roi);
        out["mask"] = r.mask ? py::object(from_mask(*r.mask)) : py::none();
        out["landmarks"] = from_landmarks(mapped);
        out["flipped"] = r.to_roi.flipped;
        out["rotation"] = r.to_roi.transform.rotation;
        out["scale"] = r.to_roi.transform.scale;
        out["translation"] = py::make_tuple(r.to_roi.transform.translation.x, r.to_roi.transform.translation.y);
        return out;
      },
      py::arg("image"), py::arg("landmarks"), py::arg("polygons") = py::none(), py::arg("side") = 512,
      py::arg("crop_factor") = 2.0);

  py::class_<RirvModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"))
      .def_static(
          "train",
          [](const std::vector<U8Array>& images, const std::vector<F64Array>& landmarks, std::uint64_t seed,
             int working_side, double C, double epsilon, double gamma, unsigned threads) {
            if (images.size() != landmarks.size()) throw ArgumentError("images and landmarks differ in length");
            std::vector<TrainingCase> data;
            for (std::size_t k = 0; k < images.size(); ++k)
              data.push_back({to_image(images[k]), to_landmarks(landmarks[k]), "case " + std::to_string(k)});
            TrainConfig cfg;
            cfg.working_side = working_side;
            cfg.hyper.C = C;
            cfg.hyper.epsilon = epsilon;
            cfg.hyper.gamma = gamma;
            cfg.threads = threads;
            py::gil_scoped_release release;
            return train_pipeline(data, cfg, seed);
          },
          py::arg("images"), py::arg("landmarks"), py::arg("seed") = 0, py::arg("working_side") = kDefaultWorkingSide,
          py::arg("C") = 100.0, py::arg("epsilon") = 0.2, py::arg("gamma") = 1.0, py::arg("threads") = 0)
      .def("save", [](const RirvModel& self, const std::filesystem::path& p) { save_model(self, p); })
      .def_property_readonly("working_side", &RirvModel::working_side)
      .def(
          "detect",
          [](const RirvModel& self, const U8Array& img, std::uint64_t seed) {
            const GrayImage g = to_image(img);
            Detection d;
            {
              py::gil_scoped_release release;
              d = detect_landmarks(self, g, seed);
            }
            return py::make_tuple(from_landmarks(d.landmarks), diagnostics_dict(d.diagnostics));
          },
          py::arg("image"), py::arg("seed") = 0);
}
