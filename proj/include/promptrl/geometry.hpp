#pragma once

#include "promptrl/image.hpp"

namespace promptrl {

// Euclidean distance (pixels) from every foreground pixel to the nearest
// background pixel. Pixels outside the image count as background; background
// pixels map to 0.
ScalarMap distance_transform(const Mask& mask);

// Foreground pixels with at least one 4-neighbour in the background (the
// image border counts as background).
Mask boundary_mask(const Mask& mask);

// Rounded centre of mass when it lands on the lesion, otherwise the deepest
// interior pixel (first in row-major order on ties).
Pixel lesion_anchor(const Mask& mask);

struct SubRegionPartition {
  Mask center;
  Mask surface;
  Mask union_region;
  int delta = 5;
  Pixel anchor;
};

inline constexpr int kDefaultBandWidth = 5;

// Splits the lesion into edge band, centre disc and the remaining interior.
// Precedence is surface > center > union.
SubRegionPartition decompose_subregions(const Mask& mask, int delta = kDefaultBandWidth);

// 4-connected components; labels are 1-based, 0 is background.
Grid<int> label_components(const Mask& mask, int* component_count = nullptr);

}  // namespace promptrl
