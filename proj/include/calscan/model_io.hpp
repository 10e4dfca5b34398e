#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "calscan/rirv.hpp"

namespace calscan {

inline constexpr char kModelMagic[] = "CALSCANRIRV1";

/// Container: the 12 magic bytes, a u64 header length, a JSON header
/// (format version, working side, stage tables, solver reports), then 32
/// regressor blocks in stage, landmark, axis order. A block is u64 support
/// vector count, u64 dimension, the rows, the dual coefficients, the bias and
/// the hyperparameters (C, epsilon, gamma, tol, max_passes). All integers
/// are u64 and all reals f64, little-endian.
void write_model(std::ostream& out, const RirvModel& model);
RirvModel read_model(std::istream& in);

void save_model(const RirvModel& model, const std::filesystem::path& path);
RirvModel load_model(const std::filesystem::path& path);

}  // namespace calscan
