#include "promptrl/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "promptrl/rng.hpp"

namespace promptrl {

void SegmenterConfig::validate() const {
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "tolerance must be positive");
  if (!(smoothing_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be >= 0");
  if (!(prior_strength >= 0.0 && prior_strength <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "prior_strength must be in [0, 1]");
  }
  if (!(prior_contrast > 0.0)) throw Error(ErrorCode::InvalidConfig, "prior_contrast must be > 0");
  if (backend == Backend::Bridge && bridge_endpoint.empty()) {
    throw Error(ErrorCode::InvalidConfig, "bridge backend needs an endpoint command");
  }
}

void check_prompts(const Image2D& image, const PromptSet& prompts) {
  for (const PromptPoint& p : prompts) {
    if (!image.grid().contains(p.x, p.y)) {
      throw Error(ErrorCode::InvalidPrompt, "prompt (" + std::to_string(p.x) + ", " +
                                                std::to_string(p.y) + ") is outside the image");
    }
  }
}

namespace {

void grow_one(const Grid<float>& img, Pixel seed, double tolerance, Mask& out,
              std::vector<std::uint8_t>& visited, std::vector<Pixel>& stack) {
  std::fill(visited.begin(), visited.end(), 0);
  const float ref = img(seed.x, seed.y);
  stack.clear();
  stack.push_back(seed);
  visited[img.index(seed.x, seed.y)] = 1;
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    out.set(p.x, p.y);
    const Pixel nbrs[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
    for (const Pixel& q : nbrs) {
      if (!img.contains(q.x, q.y)) continue;
      const std::size_t i = img.index(q.x, q.y);
      if (visited[i]) continue;
      if (std::abs(double(img[i]) - double(ref)) > tolerance) continue;
      visited[i] = 1;
      stack.push_back(q);
    }
  }
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / sum);
  return out;
}

Grid<float> intensity_prior(const Image2D& image, const SegmenterConfig& cfg) {
  std::vector<float> sorted(image.values().begin(), image.values().end());
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  Grid<float> smooth = gaussian_blur(image.grid(), 1.0);
  for (float& v : smooth.values()) {
    const double o = std::clamp((double(v) - median) / cfg.prior_contrast, 0.0, 1.0);
    v = static_cast<float>(cfg.prior_strength * o);
  }
  return smooth;
}

ProbabilityMap finish(const Image2D& image, const Mask& raw, const SegmenterConfig& cfg) {
  Grid<float> g(raw.width(), raw.height(), 0.0f);
  for (std::size_t i = 0; i < raw.size(); ++i) g[i] = raw[i] ? 1.0f : 0.0f;
  g = gaussian_blur(g, cfg.smoothing_sigma);
  if (cfg.prior_strength > 0.0) {
    const Grid<float> prior = intensity_prior(image, cfg);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::max(g[i], prior[i]);
  }
  for (float& v : g.values()) v = std::clamp(v, 0.0f, 1.0f);
  return ProbabilityMap(std::move(g));
}

}  // namespace

Mask grow_regions(const Image2D& image, std::span<const PromptPoint> prompts, double tolerance) {
  const Grid<float>& img = image.grid();
  Mask pos(img.width(), img.height(), 0);
  Mask neg(img.width(), img.height(), 0);
  std::vector<std::uint8_t> visited(img.size());
  std::vector<Pixel> stack;
  bool any_negative = false;
  for (const PromptPoint& p : prompts) {
    if (!img.contains(p.x, p.y)) throw Error(ErrorCode::InvalidPrompt, "prompt outside image");
    if (p.polarity == Polarity::Positive) {
      grow_one(img, {p.x, p.y}, tolerance, pos, visited, stack);
    } else {
      grow_one(img, {p.x, p.y}, tolerance, neg, visited, stack);
      any_negative = true;
    }
  }
  if (any_negative) {
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = pos[i] && !neg[i];
  }
  return pos;
}

Grid<float> gaussian_blur(const Grid<float>& g, double sigma) {
  if (sigma <= 0.0) return g;
  const std::vector<float> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = g.width(), h = g.height();
  Grid<float> tmp(w, h, 0.0f), out(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * g(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

ProbabilityMap predict_builtin(const Image2D& image, const PromptSet& prompts,
                               const SegmenterConfig& cfg) {
  check_prompts(image, prompts);
  if (prompts.empty() && cfg.prior_strength <= 0.0) {
    return ProbabilityMap(image.width(), image.height(), 0.0f);
  }
  return finish(image, grow_regions(image, prompts.points(), cfg.tolerance), cfg);
}

Mask binarize(const ProbabilityMap& p, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidThreshold, "threshold must be in [0, 1]");
  }
  Mask m(p.width(), p.height(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = p[i] >= threshold ? 1 : 0;
  return m;
}

BuiltinSegmenter::BuiltinSegmenter(SegmenterConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

ProbabilityMap BuiltinSegmenter::predict(const Image2D& image, const PromptSet& prompts) {
  return predict_builtin(image, prompts, cfg_);
}

std::vector<ProbabilityMap> BuiltinSegmenter::predict_ensemble(const Image2D& image,
                                                               const PromptSet& prompts,
                                                               const EnsembleConfig& ens) {
  if (ens.members < 1) throw Error(ErrorCode::InvalidConfig, "ensemble needs >= 1 member");
  check_prompts(image, prompts);
  std::vector<ProbabilityMap> out;
  out.reserve(static_cast<std::size_t>(ens.members));
  std::vector<PromptPoint> jittered;
  for (int k = 0; k < ens.members; ++k) {
    Rng rng(mix_seed(ens.jitter_seed, static_cast<std::uint64_t>(k)));
    SegmenterConfig member = cfg_;
    member.tolerance = cfg_.tolerance * std::exp(ens.tolerance_jitter * rng.normal());
    jittered.clear();
    for (const PromptPoint& p : prompts) {
      PromptPoint q = p;
      if (ens.seed_jitter > 0) {
        q.x = std::clamp(p.x + rng.uniform_int(-ens.seed_jitter, ens.seed_jitter), 0,
                         image.width() - 1);
        q.y = std::clamp(p.y + rng.uniform_int(-ens.seed_jitter, ens.seed_jitter), 0,
                         image.height() - 1);
      }
      jittered.push_back(q);
    }
    if (prompts.empty() && member.prior_strength <= 0.0) {
      out.emplace_back(image.width(), image.height(), 0.0f);
    } else {
      out.push_back(finish(image, grow_regions(image, jittered, member.tolerance), member));
    }
  }
  return out;
}

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& cfg) {
  cfg.validate();
  if (cfg.backend == Backend::Bridge) return std::make_unique<BridgeSegmenter>(cfg.bridge_endpoint);
  return std::make_unique<BuiltinSegmenter>(cfg);
}

ProbabilityMap predict(const Image2D& image, const PromptSet& prompts, const SegmenterConfig& cfg) {
  return make_segmenter(cfg)->predict(image, prompts);
}

std::vector<ProbabilityMap> ensemble_predict(const Image2D& image, const PromptSet& prompts,
                                             const SegmenterConfig& cfg,
                                             const EnsembleConfig& ens) {
  return make_segmenter(cfg)->predict_ensemble(image, prompts, ens);
}

}  // namespace promptrl
