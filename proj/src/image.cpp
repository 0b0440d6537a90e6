#include "promptrl/image.hpp"

#include <algorithm>
#include <cmath>

namespace promptrl {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(
      std::count_if(values().begin(), values().end(), [](std::uint8_t v) { return v != 0; }));
}

std::vector<Pixel> Mask::pixels() const {
  std::vector<Pixel> out;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (test(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

Image2D::Image2D(int width, int height, std::vector<float> intensities, Spacing spacing)
    : pixels_(width, height, std::move(intensities)), spacing_(spacing) {
  if (width < kMinSide || height < kMinSide) {
    throw Error(ErrorCode::InvalidSpec, "image must be at least 8x8");
  }
  if (!(spacing.sx > 0.0) || !(spacing.sy > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "pixel spacing must be positive");
  }
  for (float v : pixels_.values()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw Error(ErrorCode::InvalidSpec, "intensities must be finite and within [0, 1]");
    }
  }
}

PromptSet::PromptSet(std::initializer_list<PromptPoint> points) {
  for (const auto& p : points) add(p);
}

bool PromptSet::contains(const PromptPoint& p) const {
  return std::find(points_.begin(), points_.end(), p) != points_.end();
}

void PromptSet::add(const PromptPoint& p) {
  if (contains(p)) {
    throw Error(ErrorCode::InvalidPrompt, "duplicate prompt (" + std::to_string(p.x) + ", " +
                                              std::to_string(p.y) + ")");
  }
  points_.push_back(p);
}

void LabeledCase::validate() const {
  if (!truth.same_shape(image.grid())) {
    throw Error(ErrorCode::CorruptCase, "mask and image dimensions differ for case " + id);
  }
  if (truth.empty()) {
    throw Error(ErrorCode::CorruptCase, "ground truth is empty for case " + id);
  }
}

}  // namespace promptrl
