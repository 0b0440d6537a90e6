#include "promptrl/prompts.hpp"

#include <array>

#include "promptrl/geometry.hpp"
#include "promptrl/rng.hpp"

namespace promptrl {

std::string_view to_string(Location location) {
  switch (location) {
    case Location::Center: return "center";
    case Location::Surface: return "surface";
    case Location::Union: return "union";
  }
  return "?";
}

Location location_from_string(std::string_view name) {
  if (name == "center") return Location::Center;
  if (name == "surface") return Location::Surface;
  if (name == "union") return Location::Union;
  throw Error(ErrorCode::InvalidConfig, "unknown prompt location '" + std::string(name) + "'");
}

std::string_view to_string(PointCountGroup group) {
  switch (group) {
    case PointCountGroup::One: return "1";
    case PointCountGroup::TwoToFour: return "2-4";
    case PointCountGroup::FiveOrMore: return "5+";
  }
  return "?";
}

PointCountGroup bin_point_count(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidCount, "point count must be at least 1");
  if (n == 1) return PointCountGroup::One;
  if (n <= 4) return PointCountGroup::TwoToFour;
  return PointCountGroup::FiveOrMore;
}

PromptSample sample_prompts(const LabeledCase& c, Location location, int n, std::uint64_t seed,
                            int delta) {
  if (n < 1) throw Error(ErrorCode::InvalidCount, "need at least one prompt");
  if (static_cast<std::size_t>(n) > c.truth.count()) {
    throw Error(ErrorCode::InsufficientRegion,
                "requested " + std::to_string(n) + " prompts from a lesion of " +
                    std::to_string(c.truth.count()) + " pixels");
  }
  const SubRegionPartition part = decompose_subregions(c.truth, delta);
  auto region_of = [&](Location l) -> const Mask& {
    switch (l) {
      case Location::Center: return part.center;
      case Location::Surface: return part.surface;
      case Location::Union: break;
    }
    return part.union_region;
  };

  std::vector<Location> order{location};
  for (Location l : {Location::Union, Location::Surface, Location::Center}) {
    if (l != location) order.push_back(l);
  }

  Rng rng(seed);
  PromptSample out;
  for (Location l : order) {
    if (static_cast<int>(out.prompts.size()) == n) break;
    std::vector<Pixel> pool = region_of(l).pixels();
    const std::size_t want =
        std::min(pool.size(), static_cast<std::size_t>(n) - out.prompts.size());
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.prompts.add({pool[i].x, pool[i].y, Polarity::Positive});
      out.sources.push_back(l);
    }
    if (l != location && want > 0) out.used_fallback = true;
  }
  return out;
}

}  // namespace promptrl
