#pragma once

#include <array>
#include <span>
#include <vector>

#include "promptrl/image.hpp"
#include "promptrl/segmenter.hpp"

namespace promptrl {

// Binary entropy in nats with 0 ln 0 = 0.
double binary_entropy(double q);

ScalarMap entropy_map(const ProbabilityMap& p);

struct Region {
  int index = 0;
  int x0 = 0, y0 = 0, w = 0, h = 0;
  int area() const noexcept { return w * h; }
  bool contains(int x, int y) const noexcept {
    return x >= x0 && y >= y0 && x < x0 + w && y < y0 + h;
  }
  bool operator==(const Region&) const = default;
};

struct RegionPool {
  std::vector<Region> regions;  // row-major tile order
  int gx = 0, gy = 0;
  int width = 0, height = 0;
  std::size_t size() const noexcept { return regions.size(); }
};

inline constexpr int kDefaultGrid = 8;

// Tiles of floor(W/gx) x floor(H/gy); the last column and row absorb the
// remainder. Throws InvalidGrid when the grid exceeds the image.
RegionPool build_region_pool(int width, int height, int gx = kDefaultGrid, int gy = kDefaultGrid);

struct GradientSummary {
  double mean = 0.0;
  double sum = 0.0;
  std::size_t count = 0;  // boundary pixels sampled
};

// Central-difference gradient magnitude of p (indices clamped at the
// border), sampled on boundary pixels of binarize(p) inside `region`, or the
// whole image when region is null.
GradientSummary boundary_gradient_feature(const ProbabilityMap& p, const Region* region = nullptr);

struct ClassDistribution {
  double fg = 0.0;
  double bg = 1.0;
};

// Throws EmptyRegion for a zero-area region.
ClassDistribution class_distribution(const ProbabilityMap& p, const Region& region);
ClassDistribution class_distribution(const Mask& m, const Region& region);

inline constexpr double kKlEpsilon = 1e-8;

// KL(p || q) in nats after adding kKlEpsilon to each component and
// renormalising.
double kl_divergence(ClassDistribution p, ClassDistribution q);

enum class KlMode { Max, Sum };
// Throws EmptyInput.
double summarize_kl(std::span<const double> scores, KlMode mode = KlMode::Max);

// H(mean q) - mean H(q) per pixel. One member gives zeros.
ScalarMap bald_map(std::span<const ProbabilityMap> ensemble);

// Positive prompt at the max-entropy pixel of the region, first in
// row-major order on ties.
PromptPoint region_to_prompt(const Region& region, const ProbabilityMap& p);

inline constexpr int kStateFeatures = 3;
inline constexpr int kActionFeatures = 5;

// Per region: mean entropy, mean boundary gradient, foreground fraction.
std::vector<double> build_state(const ProbabilityMap& p, const RegionPool& pool);

using ActionRepr = std::array<double, kActionFeatures>;

// Sum entropy, sum boundary gradient, foreground fraction, KL against the
// labeled regions (truth when given, else predictions; summarised with
// `mode`, 0 when none), KL against the pooled unlabeled distribution.
ActionRepr build_action(const Region& region, const ProbabilityMap& p,
                        std::span<const Region> labeled, std::span<const Region> unlabeled,
                        const Mask* truth, KlMode mode = KlMode::Max);

// All per-region quantities the state and action features need, computed
// in one pass over the map.
struct RegionSummary {
  double entropy_sum = 0.0;
  double entropy_mean = 0.0;
  double gradient_sum = 0.0;
  double gradient_mean = 0.0;
  double fg_fraction = 0.0;  // of binarize(p)
  double truth_fraction = 0.0;
  int area = 0;
};

class FeatureCache {
 public:
  FeatureCache(const ProbabilityMap& p, const RegionPool& pool, const Mask* truth = nullptr);

  const RegionSummary& operator[](std::size_t i) const { return summaries_[i]; }
  std::size_t size() const noexcept { return summaries_.size(); }

  std::vector<double> state() const;
  // `selected[i]` marks labeled regions; everything else is unlabeled.
  ActionRepr action(std::size_t region, const std::vector<bool>& selected, bool use_truth,
                    KlMode mode = KlMode::Max) const;

 private:
  std::vector<RegionSummary> summaries_;
  bool has_truth_ = false;
};

}  // namespace promptrl
