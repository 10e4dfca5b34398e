#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calscan/landmarks.hpp"

namespace calscan {

/// One record of a dataset annotation document (a JSON array).
struct Annotation {
  std::filesystem::path image;
  std::optional<LandmarkSet> landmarks;
  bool fractured = false;
  std::vector<Polygon> fracture_polygons;
  std::optional<std::string> fracture_kind;  // "intra" | "extra"
};

/// Relative image paths are resolved against the document's directory.
/// Malformed records throw FormatError naming the file and record index.
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

/// Image paths are written as stored.
void save_annotations(const std::filesystem::path& path, std::span<const Annotation> records);

std::string annotations_to_json(std::span<const Annotation> records);
std::vector<Annotation> annotations_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

}  // namespace calscan
