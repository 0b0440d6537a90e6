#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "promptrl/image.hpp"

namespace promptrl {

enum class Location { Center, Surface, Union };

std::string_view to_string(Location location);
Location location_from_string(std::string_view name);

enum class PointCountGroup { One, TwoToFour, FiveOrMore };

std::string_view to_string(PointCountGroup group);

PointCountGroup bin_point_count(int n);

struct PromptSample {
  PromptSet prompts;
  // Sub-region each point was drawn from, parallel to `prompts`.
  std::vector<Location> sources;
  bool used_fallback = false;
};

// Draws n distinct positive prompts uniformly from the requested sub-region
// of the ground truth. When that region is too small the remainder comes
// from the other regions in the order Union, Surface, Center.
//
// Draws are a seeded partial Fisher-Yates shuffle, so for a fixed seed the
// first k points do not depend on n.
PromptSample sample_prompts(const LabeledCase& c, Location location, int n, std::uint64_t seed,
                            int delta = 5);

}  // namespace promptrl
