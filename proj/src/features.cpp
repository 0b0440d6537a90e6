#include "promptrl/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace promptrl {

double binary_entropy(double q) {
  double h = 0.0;
  if (q > 0.0) h -= q * std::log(q);
  if (q < 1.0) h -= (1.0 - q) * std::log(1.0 - q);
  return h;
}

ScalarMap entropy_map(const ProbabilityMap& p) {
  ScalarMap out(p.width(), p.height(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = binary_entropy(p[i]);
  return out;
}

RegionPool build_region_pool(int width, int height, int gx, int gy) {
  if (gx < 1 || gy < 1 || gx > width || gy > height) {
    throw Error(ErrorCode::InvalidGrid, "grid " + std::to_string(gx) + "x" + std::to_string(gy) +
                                            " does not fit a " + std::to_string(width) + "x" +
                                            std::to_string(height) + " image");
  }
  RegionPool pool;
  pool.gx = gx;
  pool.gy = gy;
  pool.width = width;
  pool.height = height;
  const int tw = width / gx, th = height / gy;
  for (int j = 0; j < gy; ++j) {
    for (int i = 0; i < gx; ++i) {
      Region r;
      r.index = j * gx + i;
      r.x0 = i * tw;
      r.y0 = j * th;
      r.w = i == gx - 1 ? width - r.x0 : tw;
      r.h = j == gy - 1 ? height - r.y0 : th;
      pool.regions.push_back(r);
    }
  }
  return pool;
}

namespace {

double gradient_at(const ProbabilityMap& p, int x, int y) {
  const int w = p.width(), h = p.height();
  const double gx = 0.5 * (double(p(std::min(x + 1, w - 1), y)) - double(p(std::max(x - 1, 0), y)));
  const double gy = 0.5 * (double(p(x, std::min(y + 1, h - 1))) - double(p(x, std::max(y - 1, 0))));
  return std::sqrt(gx * gx + gy * gy);
}

bool is_boundary(const Mask& m, int x, int y) {
  if (!m.test(x, y)) return false;
  if (x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1) return true;
  return !m.test(x - 1, y) || !m.test(x + 1, y) || !m.test(x, y - 1) || !m.test(x, y + 1);
}

Region whole_image(const ProbabilityMap& p) { return {0, 0, 0, p.width(), p.height()}; }

void check_region(const Region& r, int width, int height) {
  if (r.area() <= 0) throw Error(ErrorCode::EmptyRegion, "region has no pixels");
  if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > width || r.y0 + r.h > height) {
    throw Error(ErrorCode::ShapeMismatch, "region outside the map");
  }
}

ClassDistribution make_distribution(double fg) {
  fg = std::clamp(fg, 0.0, 1.0);
  return {fg, 1.0 - fg};
}

}  // namespace

GradientSummary boundary_gradient_feature(const ProbabilityMap& p, const Region* region) {
  const Region r = region ? *region : whole_image(p);
  check_region(r, p.width(), p.height());
  const Mask m = binarize(p);
  GradientSummary out;
  for (int y = r.y0; y < r.y0 + r.h; ++y) {
    for (int x = r.x0; x < r.x0 + r.w; ++x) {
      if (!is_boundary(m, x, y)) continue;
      out.sum += gradient_at(p, x, y);
      ++out.count;
    }
  }
  if (out.count > 0) out.mean = out.sum / static_cast<double>(out.count);
  return out;
}

ClassDistribution class_distribution(const ProbabilityMap& p, const Region& region) {
  check_region(region, p.width(), p.height());
  std::size_t fg = 0;
  for (int y = region.y0; y < region.y0 + region.h; ++y) {
    for (int x = region.x0; x < region.x0 + region.w; ++x) fg += p(x, y) >= 0.5f;
  }
  return make_distribution(static_cast<double>(fg) / region.area());
}

ClassDistribution class_distribution(const Mask& m, const Region& region) {
  check_region(region, m.width(), m.height());
  std::size_t fg = 0;
  for (int y = region.y0; y < region.y0 + region.h; ++y) {
    for (int x = region.x0; x < region.x0 + region.w; ++x) fg += m.test(x, y);
  }
  return make_distribution(static_cast<double>(fg) / region.area());
}

double kl_divergence(ClassDistribution p, ClassDistribution q) {
  const double ps = p.fg + p.bg + 2 * kKlEpsilon;
  const double qs = q.fg + q.bg + 2 * kKlEpsilon;
  const double p0 = (p.fg + kKlEpsilon) / ps, p1 = (p.bg + kKlEpsilon) / ps;
  const double q0 = (q.fg + kKlEpsilon) / qs, q1 = (q.bg + kKlEpsilon) / qs;
  const double kl = p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1);
  return std::max(0.0, kl);
}

double summarize_kl(std::span<const double> scores, KlMode mode) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no KL scores to summarise");
  if (mode == KlMode::Max) return *std::max_element(scores.begin(), scores.end());
  return std::accumulate(scores.begin(), scores.end(), 0.0);
}

ScalarMap bald_map(std::span<const ProbabilityMap> ensemble) {
  if (ensemble.empty()) throw Error(ErrorCode::EmptyInput, "empty ensemble");
  const ProbabilityMap& first = ensemble.front();
  for (const ProbabilityMap& m : ensemble) {
    if (!m.same_shape(first)) throw Error(ErrorCode::ShapeMismatch, "ensemble member sizes differ");
  }
  ScalarMap out(first.width(), first.height(), 0.0);
  if (ensemble.size() == 1) return out;
  const double k = static_cast<double>(ensemble.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double mean = 0.0, mean_h = 0.0;
    bool constant = true;
    for (const ProbabilityMap& m : ensemble) {
      mean += m[i];
      mean_h += binary_entropy(m[i]);
      constant = constant && m[i] == first[i];
    }
    // Exact zero for agreeing members; avoids rounding noise below zero.
    if (constant) continue;
    out[i] = std::max(0.0, binary_entropy(mean / k) - mean_h / k);
  }
  return out;
}

PromptPoint region_to_prompt(const Region& region, const ProbabilityMap& p) {
  check_region(region, p.width(), p.height());
  PromptPoint best{region.x0, region.y0, Polarity::Positive};
  double best_h = -1.0;
  for (int y = region.y0; y < region.y0 + region.h; ++y) {
    for (int x = region.x0; x < region.x0 + region.w; ++x) {
      const double h = binary_entropy(p(x, y));
      if (h > best_h) {
        best_h = h;
        best = {x, y, Polarity::Positive};
      }
    }
  }
  return best;
}

std::vector<double> build_state(const ProbabilityMap& p, const RegionPool& pool) {
  if (p.width() != pool.width || p.height() != pool.height) {
    throw Error(ErrorCode::ShapeMismatch, "pool built for a different image size");
  }
  return FeatureCache(p, pool).state();
}

ActionRepr build_action(const Region& region, const ProbabilityMap& p,
                        std::span<const Region> labeled, std::span<const Region> unlabeled,
                        const Mask* truth, KlMode mode) {
  check_region(region, p.width(), p.height());
  if (truth && !truth->same_shape(p)) throw Error(ErrorCode::ShapeMismatch, "truth size differs");
  const double h_sum = [&] {
    double s = 0.0;
    for (int y = region.y0; y < region.y0 + region.h; ++y) {
      for (int x = region.x0; x < region.x0 + region.w; ++x) s += binary_entropy(p(x, y));
    }
    return s;
  }();
  const ClassDistribution own = class_distribution(p, region);

  double kl_labeled = 0.0;
  if (!labeled.empty()) {
    std::vector<double> scores;
    for (const Region& r : labeled) {
      const ClassDistribution ref = truth ? class_distribution(*truth, r) : class_distribution(p, r);
      scores.push_back(kl_divergence(own, ref));
    }
    kl_labeled = summarize_kl(scores, mode);
  }

  double kl_unlabeled = 0.0;
  if (!unlabeled.empty()) {
    double fg = 0.0, area = 0.0;
    for (const Region& r : unlabeled) {
      fg += class_distribution(p, r).fg * r.area();
      area += r.area();
    }
    kl_unlabeled = kl_divergence(own, make_distribution(fg / area));
  }
  return {h_sum, boundary_gradient_feature(p, &region).sum, own.fg, kl_labeled, kl_unlabeled};
}

FeatureCache::FeatureCache(const ProbabilityMap& p, const RegionPool& pool, const Mask* truth)
    : summaries_(pool.size()), has_truth_(truth != nullptr) {
  if (p.width() != pool.width || p.height() != pool.height) {
    throw Error(ErrorCode::ShapeMismatch, "pool built for a different image size");
  }
  if (truth && !truth->same_shape(p)) throw Error(ErrorCode::ShapeMismatch, "truth size differs");
  const Mask m = binarize(p);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const Region& r = pool.regions[k];
    RegionSummary& s = summaries_[k];
    s.area = r.area();
    std::size_t fg = 0, tfg = 0, boundary = 0;
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
      for (int x = r.x0; x < r.x0 + r.w; ++x) {
        s.entropy_sum += binary_entropy(p(x, y));
        fg += m.test(x, y);
        if (truth) tfg += truth->test(x, y);
        if (is_boundary(m, x, y)) {
          s.gradient_sum += gradient_at(p, x, y);
          ++boundary;
        }
      }
    }
    s.entropy_mean = s.entropy_sum / s.area;
    s.gradient_mean = boundary ? s.gradient_sum / static_cast<double>(boundary) : 0.0;
    s.fg_fraction = static_cast<double>(fg) / s.area;
    s.truth_fraction = static_cast<double>(tfg) / s.area;
  }
}

std::vector<double> FeatureCache::state() const {
  std::vector<double> out;
  out.reserve(summaries_.size() * kStateFeatures);
  for (const RegionSummary& s : summaries_) {
    out.push_back(s.entropy_mean);
    out.push_back(s.gradient_mean);
    out.push_back(s.fg_fraction);
  }
  return out;
}

ActionRepr FeatureCache::action(std::size_t region, const std::vector<bool>& selected,
                                bool use_truth, KlMode mode) const {
  const RegionSummary& own = summaries_.at(region);
  const ClassDistribution mine = make_distribution(own.fg_fraction);
  const bool truth = use_truth && has_truth_;

  std::vector<double> scores;
  double fg = 0.0, area = 0.0;
  for (std::size_t k = 0; k < summaries_.size(); ++k) {
    const RegionSummary& s = summaries_[k];
    if (selected[k]) {
      scores.push_back(kl_divergence(mine, make_distribution(truth ? s.truth_fraction : s.fg_fraction)));
    } else {
      fg += s.fg_fraction * s.area;
      area += s.area;
    }
  }
  const double kl_labeled = scores.empty() ? 0.0 : summarize_kl(scores, mode);
  const double kl_unlabeled = area > 0.0 ? kl_divergence(mine, make_distribution(fg / area)) : 0.0;
  return {own.entropy_sum, own.gradient_sum, own.fg_fraction, kl_labeled, kl_unlabeled};
}

}  // namespace promptrl
