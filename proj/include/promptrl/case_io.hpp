#pragma once

#include <filesystem>
#include <vector>

#include "promptrl/image.hpp"

namespace promptrl {

// Case directory layout:
//   image.pgm  P5, 16-bit big-endian samples (maxval 65535)
//   mask.pgm   P5, 8-bit, 0 or 255
//   meta.json  {"id": str, "spacing_mm": [sx, sy], "dataset_tag": str}
void save_case(const std::filesystem::path& dir, const LabeledCase& c);
LabeledCase load_case(const std::filesystem::path& dir);

// Loads every immediate subdirectory holding a meta.json, sorted by name.
std::vector<LabeledCase> load_case_directory(const std::filesystem::path& root);

// Rounds each intensity to the nearest multiple of 1/65535, the precision
// image.pgm stores.
float quantize16(double v);

}  // namespace promptrl
