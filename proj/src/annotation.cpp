#include "calscan/annotation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "calscan/errors.hpp"
#include "json.hpp"

namespace calscan {
namespace {

using nlohmann::json;

Point2 read_point(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw FormatError("expected [x, y]");
  }
  const Point2 p{j[0].get<double>(), j[1].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FormatError("non-finite coordinate");
  return p;
}

json write_point(Point2 p) { return json::array({p.x, p.y}); }

Annotation read_record(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw FormatError("record is not an object");
  Annotation a;
  const auto image = j.find("image");
  if (image == j.end() || !image->is_string()) throw FormatError("missing \"image\"");
  a.image = std::filesystem::path(image->get<std::string>());
  if (a.image.is_relative() && !base_dir.empty()) a.image = base_dir / a.image;

  if (const auto lm = j.find("landmarks"); lm != j.end() && !lm->is_null()) {
    if (!lm->is_array() || lm->size() != kNumLandmarks) throw FormatError("\"landmarks\" must hold four points");
    LandmarkSet set;
    for (int i = 0; i < kNumLandmarks; ++i) set[i] = read_point((*lm)[i]);
    a.landmarks = set;
  }
  a.fractured = j.value("fractured", false);
  if (const auto polys = j.find("fracture_polygons"); polys != j.end() && !polys->is_null()) {
    if (!polys->is_array()) throw FormatError("\"fracture_polygons\" must be an array");
    for (const json& ring : *polys) {
      if (!ring.is_array() || ring.size() < 3) throw FormatError("polygon needs at least three points");
      Polygon poly;
      for (const json& p : ring) poly.push_back(read_point(p));
      a.fracture_polygons.push_back(std::move(poly));
    }
  }
  if (const auto kind = j.find("fracture_kind"); kind != j.end() && !kind->is_null()) {
    if (!kind->is_string()) throw FormatError("\"fracture_kind\" must be a string or null");
    const std::string k = kind->get<std::string>();
    if (k != "intra" && k != "extra") throw FormatError("unknown fracture_kind \"" + k + "\"");
    a.fracture_kind = k;
  }
  return a;
}

json write_record(const Annotation& a) {
  json j;
  j["image"] = a.image.generic_string();
  if (a.landmarks) {
    json lm = json::array();
    for (const Point2& p : a.landmarks->points) lm.push_back(write_point(p));
    j["landmarks"] = lm;
  } else {
    j["landmarks"] = nullptr;
  }
  j["fractured"] = a.fractured;
  json polys = json::array();
  for (const Polygon& poly : a.fracture_polygons) {
    json ring = json::array();
    for (const Point2& p : poly) ring.push_back(write_point(p));
    polys.push_back(ring);
  }
  j["fracture_polygons"] = polys;
  j["fracture_kind"] = a.fracture_kind ? json(*a.fracture_kind) : json(nullptr);
  return j;
}

}  // namespace

std::string annotations_to_json(std::span<const Annotation> records) {
  json doc = json::array();
  for (const Annotation& a : records) doc.push_back(write_record(a));
  return doc.dump(2) + "\n";
}

std::vector<Annotation> annotations_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError("annotation document must be a JSON array");
  std::vector<Annotation> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      out.push_back(read_record(doc[i], base_dir));
    } catch (const FormatError& e) {
      throw FormatError("record " + std::to_string(i) + ": " + e.what());
    } catch (const json::exception& e) {
      throw FormatError("record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return annotations_from_json(ss.str(), path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_annotations(const std::filesystem::path& path, std::span<const Annotation> records) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << annotations_to_json(records);
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace calscan
