#pragma once

#include <filesystem>

#include "aistk/vrnn/model.hpp"

namespace aistk::vrnn {

/// Checkpoint layout: a magic line, a human-readable key/value header (ROI
/// geometry, model dims, tensor manifest), a "data" line, then the parameter
/// tensors as little-endian binary32 in params() order.
void save_checkpoint(const VrnnModel& m, const std::filesystem::path& path);

/// Throws IoError if unreadable, FormatError on any structural mismatch.
VrnnModel load_checkpoint(const std::filesystem::path& path);

/// Throws FormatError naming the first ROI field that disagrees.
void check_roi_compatible(const VrnnModel& m, const RoiConfig& roi);

}  // namespace aistk::vrnn
