#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "promptrl/image.hpp"

namespace promptrl {

// Parameters of the synthetic lesion generator. A lesion is the union of
// overlapping ellipses painted in order; each ellipse carries its own
// intensity plateau so that seeded growth from one prompt captures roughly
// one blob.
struct SyntheticSpec {
  int width = 64;
  int height = 64;
  Spacing spacing{1.0, 1.0};

  // Area-equivalent lesion diameter, millimetres.
  double diameter_min_mm = 20.0;
  double diameter_max_mm = 30.0;

  int blob_min = 2;
  int blob_max = 5;
  // Minor/major axis ratio lower bound for each blob.
  double min_axis_ratio = 0.6;
  // How far (fraction of the parent radii) a new blob centre may sit from
  // the blob it attaches to. Larger values give more irregular outlines.
  double attach_spread = 0.8;

  // Plateau levels are background_level + contrast, drawn from a ladder in
  // [contrast_min, contrast_max] with steps of at least plateau_separation.
  double contrast_min = 0.30;
  double contrast_max = 0.75;
  double plateau_separation = 0.15;

  double background_level = 0.15;
  // Peak amplitude of the smooth low-frequency background texture.
  double background_variation = 0.06;
  // Uniform additive noise half-width.
  double noise_amplitude = 0.02;

  // Multiplicative ultrasound-like speckle on top of the additive noise.
  bool speckle = false;
  double speckle_strength = 0.3;

  // Fraction of deep lesion pixels replaced by isolated bright impulses
  // (calcification-like). Impulses never touch each other 4-wise and stay
  // at least impulse_min_depth pixels from the lesion edge.
  double impulse_fraction = 0.0;
  int impulse_min_depth = 4;
  double impulse_offset = 0.25;

  // Bright non-lesion structures placed away from the lesion.
  int distractor_min = 0;
  int distractor_max = 0;
  double distractor_diameter_mm = 8.0;

  std::uint64_t seed = 1;
  std::string dataset_tag = "synthetic";

  // Throws InvalidSpec.
  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

// Named generator settings used by the studies:
//   large-multi, small-single, large-irregular, small-compact, agent.
SyntheticSpec synthetic_preset(std::string_view name);
std::vector<std::string> synthetic_preset_names();

LabeledCase generate_synthetic_case(const SyntheticSpec& spec);

// `count` cases; case i uses seed mix_seed(spec.seed, i).
std::vector<LabeledCase> generate_suite(const SyntheticSpec& spec, int count);

// Area-equivalent diameter in pixels: 2 * sqrt(area / pi).
double equivalent_diameter_px(const Mask& mask);

}  // namespace promptrl
