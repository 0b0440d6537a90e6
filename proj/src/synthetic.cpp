#include "promptrl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "promptrl/case_io.hpp"
#include "promptrl/geometry.hpp"
#include "promptrl/rng.hpp"

namespace promptrl {
namespace {

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // offset from the lesion origin, unit scale
  double a = 1.0, b = 1.0;    // semi-axes, unit scale
  double theta = 0.0;
  int level = 0;  // index into the plateau ladder
};

bool inside(const Ellipse& e, double scale, double px, double py) {
  const double dx = px - e.cx * scale;
  const double dy = py - e.cy * scale;
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double u = (c * dx + s * dy) / (e.a * scale);
  const double v = (-s * dx + c * dy) / (e.b * scale);
  return u * u + v * v <= 1.0;
}

// Paints blobs in order; returns 1-based blob index per pixel (0 outside).
Grid<int> rasterize(const std::vector<Ellipse>& blobs, double scale, double ox, double oy,
                    const SyntheticSpec& spec) {
  Grid<int> label(spec.width, spec.height, 0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double px = x * spec.spacing.sx - ox;
      const double py = y * spec.spacing.sy - oy;
      for (std::size_t j = 0; j < blobs.size(); ++j) {
        if (inside(blobs[j], scale, px, py)) label(x, y) = static_cast<int>(j) + 1;
      }
    }
  }
  return label;
}

std::vector<double> plateau_ladder(const SyntheticSpec& spec) {
  const double span = spec.contrast_max - spec.contrast_min;
  const int steps = spec.plateau_separation > 0.0
                        ? static_cast<int>(std::floor(span / spec.plateau_separation + 1e-9))
                        : 0;
  std::vector<double> ladder;
  for (int i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : double(i) / steps;
    ladder.push_back(spec.background_level + spec.contrast_min + t * span);
  }
  return ladder;
}

std::vector<Ellipse> draw_blobs(Rng& rng, const SyntheticSpec& spec, std::size_t ladder_size) {
  const int k = rng.uniform_int(spec.blob_min, spec.blob_max);
  std::vector<Ellipse> blobs;
  std::vector<int> used;
  for (int i = 0; i < k; ++i) {
    Ellipse e;
    const double ratio = rng.uniform(spec.min_axis_ratio, 1.0);
    e.theta = rng.uniform(0.0, M_PI);
    if (i == 0) {
      e.a = 1.0;
    } else {
      const Ellipse& parent = blobs[rng.uniform_index(blobs.size())];
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double r = rng.uniform(0.3, 1.0) * spec.attach_spread;
      const double lx = r * parent.a * std::cos(phi);
      const double ly = r * parent.b * std::sin(phi);
      const double c = std::cos(parent.theta), s = std::sin(parent.theta);
      e.cx = parent.cx + c * lx - s * ly;
      e.cy = parent.cy + s * lx + c * ly;
      e.a = rng.uniform(0.5, 0.9);
    }
    e.b = e.a * ratio;

    // Prefer unused plateau levels; never repeat the level of any blob this
    // one overlaps at unit scale (approximated by the parent chain above).
    std::vector<int> options;
    for (int l = 0; l < static_cast<int>(ladder_size); ++l) {
      if (std::find(used.begin(), used.end(), l) == used.end()) options.push_back(l);
    }
    if (options.empty()) {
      const int last = blobs.empty() ? -1 : blobs.back().level;
      for (int l = 0; l < static_cast<int>(ladder_size); ++l) {
        if (l != last || ladder_size == 1) options.push_back(l);
      }
    }
    e.level = options[rng.uniform_index(options.size())];
    used.push_back(e.level);
    blobs.push_back(e);
  }
  return blobs;
}

Mask to_mask(const Grid<int>& label) {
  Mask m(label.width(), label.height(), 0);
  for (std::size_t i = 0; i < label.size(); ++i) m[i] = label[i] != 0 ? 1 : 0;
  return m;
}

struct Placement {
  Grid<int> label;
  double scale = 0.0;
};

// Scales the blob configuration to the target area and centres it with a
// random offset. Returns false when the lesion cannot fit or is split.
bool place_lesion(Rng& rng, const std::vector<Ellipse>& blobs, const SyntheticSpec& spec,
                  double diameter_mm, Placement& out) {
  const double target_area_mm2 = M_PI * 0.25 * diameter_mm * diameter_mm;
  const double pixel_area = spec.spacing.sx * spec.spacing.sy;
  const double cx = 0.5 * (spec.width - 1) * spec.spacing.sx;
  const double cy = 0.5 * (spec.height - 1) * spec.spacing.sy;

  double scale = 0.5 * diameter_mm;
  Grid<int> label;
  for (int iter = 0; iter < 6; ++iter) {
    label = rasterize(blobs, scale, cx, cy, spec);
    const double area = to_mask(label).count() * pixel_area;
    if (area <= 0.0) {
      scale *= 2.0;
      continue;
    }
    scale *= std::sqrt(target_area_mm2 / area);
  }
  label = rasterize(blobs, scale, cx, cy, spec);

  // Bounding box relative to the current placement.
  int x0 = spec.width, y0 = spec.height, x1 = -1, y1 = -1;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (label(x, y) != 0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return false;
  constexpr int kMargin = 2;
  const int min_dx = kMargin - x0, max_dx = spec.width - 1 - kMargin - x1;
  const int min_dy = kMargin - y0, max_dy = spec.height - 1 - kMargin - y1;
  if (min_dx > max_dx || min_dy > max_dy) return false;
  // Keep the lesion near the middle: use at most a quarter of the slack.
  auto shift = [&](int lo, int hi) {
    const int mid = (lo + hi) / 2;
    const int reach = (hi - lo) / 4;
    return rng.uniform_int(std::max(lo, mid - reach), std::min(hi, mid + reach));
  };
  const int dx = shift(min_dx, max_dx);
  const int dy = shift(min_dy, max_dy);

  label = rasterize(blobs, scale, cx + dx * spec.spacing.sx, cy + dy * spec.spacing.sy, spec);
  int components = 0;
  label_components(to_mask(label), &components);
  if (components != 1) return false;
  out.label = std::move(label);
  out.scale = scale;
  return true;
}

Grid<double> background_texture(Rng& rng, const SyntheticSpec& spec) {
  Grid<double> tex(spec.width, spec.height, 0.0);
  if (spec.background_variation <= 0.0) return tex;
  constexpr int kBumps = 6;
  const double side = std::min(spec.width, spec.height);
  for (int i = 0; i < kBumps; ++i) {
    const double bx = rng.uniform(0.0, spec.width);
    const double by = rng.uniform(0.0, spec.height);
    const double sigma = rng.uniform(0.15, 0.35) * side;
    const double amp = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        tex(x, y) += amp * std::exp(-0.5 * r2 / (sigma * sigma));
      }
    }
  }
  double peak = 0.0;
  for (double v : tex.values()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : tex.values()) v *= spec.background_variation / peak;
  }
  return tex;
}

// Paints small bright ellipses at least 3 px away from the lesion and from
// each other. Returns a mask of painted distractor pixels with their level.
Grid<double> place_distractors(Rng& rng, const SyntheticSpec& spec, const Mask& lesion,
                               const std::vector<double>& ladder) {
  Grid<double> level(spec.width, spec.height, -1.0);
  if (spec.distractor_max <= 0) return level;
  const int count = rng.uniform_int(spec.distractor_min, spec.distractor_max);

  Mask occupied = lesion;
  for (int i = 0; i < count; ++i) {
    // Distance from every pixel to the nearest occupied pixel.
    Mask free_space(spec.width, spec.height, 0);
    for (std::size_t j = 0; j < occupied.size(); ++j) free_space[j] = occupied[j] ? 0 : 1;
    const ScalarMap clearance = distance_transform(free_space);

    const double d_mm = spec.distractor_diameter_mm * rng.uniform(0.7, 1.3);
    const double ra = 0.5 * d_mm / spec.spacing.sx;
    const double rb = ra * rng.uniform(0.6, 1.0) * spec.spacing.sx / spec.spacing.sy;
    const double theta = rng.uniform(0.0, M_PI);
    const double value = ladder[rng.uniform_index(ladder.size())];
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double cx = rng.uniform(ra + 1, spec.width - ra - 2);
      const double cy = rng.uniform(ra + 1, spec.height - ra - 2);
      std::vector<Pixel> footprint;
      bool ok = true;
      const double c = std::cos(theta), s = std::sin(theta);
      for (int y = 0; y < spec.height && ok; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double u = (c * (x - cx) + s * (y - cy)) / ra;
          const double v = (-s * (x - cx) + c * (y - cy)) / rb;
          if (u * u + v * v > 1.0) continue;
          if (clearance(x, y) <= 3.0) {
            ok = false;
            break;
          }
          footprint.push_back({x, y});
        }
      }
      if (!ok || footprint.empty()) continue;
      for (const Pixel& p : footprint) {
        level(p.x, p.y) = value;
        occupied.set(p.x, p.y);
      }
      break;
    }
  }
  return level;
}

// Isolated impulse pixels deep inside the lesion. No two impulses are
// 4-adjacent and the remaining lesion pixels stay 4-connected.
Mask place_impulses(Rng& rng, const SyntheticSpec& spec, const Mask& lesion) {
  Mask impulses(spec.width, spec.height, 0);
  if (spec.impulse_fraction <= 0.0) return impulses;
  const ScalarMap dt = distance_transform(lesion);
  std::vector<Pixel> deep;
  for (const Pixel& p : lesion.pixels()) {
    if (dt(p.x, p.y) >= spec.impulse_min_depth) deep.push_back(p);
  }
  const auto target = static_cast<std::size_t>(std::lround(spec.impulse_fraction * deep.size()));
  for (std::size_t i = 0; i + 1 < deep.size(); ++i) {
    std::swap(deep[i], deep[i + rng.uniform_index(deep.size() - i)]);
  }

  auto is_impulse = [&](int x, int y) { return impulses.contains(x, y) && impulses.test(x, y); };
  auto impulse_neighbours = [&](int x, int y) {
    return int(is_impulse(x - 1, y)) + int(is_impulse(x + 1, y)) + int(is_impulse(x, y - 1)) +
           int(is_impulse(x, y + 1));
  };
  std::size_t placed = 0;
  for (const Pixel& p : deep) {
    if (placed >= target) break;
    if (impulse_neighbours(p.x, p.y) > 0) continue;
    // Keep every lesion neighbour with at least two non-impulse neighbours.
    bool ok = true;
    const Pixel nbrs[4] = {{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}};
    for (const Pixel& q : nbrs) {
      if (impulse_neighbours(q.x, q.y) + 1 > 2) ok = false;
    }
    if (!ok) continue;
    impulses.set(p.x, p.y);
    ++placed;
  }

  // Reconnect any lesion pixels cut off by impulses.
  for (int pass = 0; pass < 8; ++pass) {
    Mask rest(spec.width, spec.height, 0);
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = lesion[i] && !impulses[i];
    int components = 0;
    const Grid<int> labels = label_components(rest, &components);
    if (components <= 1) break;
    std::vector<std::size_t> sizes(components + 1, 0);
    for (int v : labels.values()) ++sizes[v];
    const auto biggest = static_cast<int>(
        std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int l = labels(x, y);
        if (l == 0 || l == biggest) continue;
        const Pixel nbrs[4] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const Pixel& q : nbrs) {
          if (impulses.contains(q.x, q.y)) impulses.set(q.x, q.y, false);
        }
      }
    }
  }
  return impulses;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (width < Image2D::kMinSide || height < Image2D::kMinSide) fail("image must be at least 8x8");
  if (!(spacing.sx > 0.0) || !(spacing.sy > 0.0)) fail("spacing must be positive");
  if (!(diameter_min_mm > 0.0) || diameter_max_mm < diameter_min_mm) {
    fail("diameter range must be positive and ordered");
  }
  const double extent_mm = std::min((width - 4) * spacing.sx, (height - 4) * spacing.sy);
  if (diameter_max_mm > extent_mm) fail("lesion diameter exceeds the image extent");
  if (blob_min < 1 || blob_max < blob_min) fail("blob count range must satisfy 1 <= min <= max");
  if (!(min_axis_ratio > 0.0 && min_axis_ratio <= 1.0)) fail("axis ratio must be in (0, 1]");
  if (contrast_max < contrast_min) fail("contrast range must be ordered");
  if (background_level < 0.0 || background_level + contrast_max > 1.0) {
    fail("plateau levels must stay within [0, 1]");
  }
  if (noise_amplitude < 0.0 || background_variation < 0.0) fail("noise must be non-negative");
  if (impulse_fraction < 0.0 || impulse_fraction > 1.0) fail("impulse fraction must be in [0, 1]");
  if (distractor_min < 0 || distractor_max < distractor_min) fail("distractor range invalid");
}

double equivalent_diameter_px(const Mask& mask) {
  return 2.0 * std::sqrt(static_cast<double>(mask.count()) / M_PI);
}

LabeledCase generate_synthetic_case(const SyntheticSpec& spec) {
  spec.validate();
  const std::vector<double> ladder = plateau_ladder(spec);

  Rng geometry(mix_seed(spec.seed, 0));
  Placement placement;
  std::vector<Ellipse> blobs;
  bool placed = false;
  for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
    const double diameter = geometry.uniform(spec.diameter_min_mm, spec.diameter_max_mm);
    blobs = draw_blobs(geometry, spec, ladder.size());
    placed = place_lesion(geometry, blobs, spec, diameter, placement);
  }
  if (!placed) throw Error(ErrorCode::InvalidSpec, "could not place a connected lesion");
  const Mask truth = to_mask(placement.label);

  Rng texture_rng(mix_seed(spec.seed, 1));
  const Grid<double> texture = background_texture(texture_rng, spec);
  Rng distractor_rng(mix_seed(spec.seed, 2));
  const Grid<double> distractors = place_distractors(distractor_rng, spec, truth, ladder);
  Rng impulse_rng(mix_seed(spec.seed, 3));
  const Mask impulses = place_impulses(impulse_rng, spec, truth);

  Rng noise_rng(mix_seed(spec.seed, 4));
  Rng speckle_rng(mix_seed(spec.seed, 5));
  std::vector<float> pixels(static_cast<std::size_t>(spec.width) * spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v = spec.background_level + texture(x, y);
      if (distractors(x, y) >= 0.0) v = distractors(x, y);
      if (const int blob = placement.label(x, y); blob != 0) {
        const double plateau = ladder[blobs[blob - 1].level];
        v = plateau;
        if (impulses.test(x, y)) {
          v = plateau + spec.impulse_offset <= 1.0 - spec.noise_amplitude
                  ? plateau + spec.impulse_offset
                  : plateau - spec.impulse_offset;
        }
      }
      v += noise_rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
      if (spec.speckle) v *= 1.0 + spec.speckle_strength * speckle_rng.normal();
      pixels[static_cast<std::size_t>(y) * spec.width + x] = quantize16(std::clamp(v, 0.0, 1.0));
    }
  }

  char id[32];
  std::snprintf(id, sizeof id, "synth-%016llx", static_cast<unsigned long long>(spec.seed));
  return LabeledCase{id, Image2D(spec.width, spec.height, std::move(pixels), spec.spacing), truth,
                     spec.dataset_tag};
}

std::vector<LabeledCase> generate_suite(const SyntheticSpec& spec, int count) {
  std::vector<LabeledCase> cases;
  cases.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    SyntheticSpec s = spec;
    s.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(i));
    cases.push_back(generate_synthetic_case(s));
  }
  return cases;
}

std::vector<std::string> synthetic_preset_names() {
  return {"large-multi", "small-single", "large-irregular", "small-compact", "agent"};
}

SyntheticSpec synthetic_preset(std::string_view name) {
  SyntheticSpec s;
  s.spacing = {0.75, 0.75};
  if (name == "large-multi") {
    s.width = s.height = 128;
    s.diameter_min_mm = 42.0;  // 56-76 px
    s.diameter_max_mm = 57.0;
    s.blob_min = 3;
    s.blob_max = 5;
  } else if (name == "small-single") {
    s.width = s.height = 128;
    s.diameter_min_mm = 19.5;  // 26-32 px
    s.diameter_max_mm = 24.0;
    s.blob_min = s.blob_max = 1;
    s.min_axis_ratio = 0.75;
    s.impulse_fraction = 0.18;
  } else if (name == "large-irregular") {
    s.width = s.height = 128;
    s.diameter_min_mm = 42.0;
    s.diameter_max_mm = 57.0;
    s.blob_min = 4;
    s.blob_max = 5;
    s.min_axis_ratio = 0.45;
    s.attach_spread = 0.95;
  } else if (name == "small-compact") {
    s.width = s.height = 128;
    s.diameter_min_mm = 13.5;  // 18-26 px
    s.diameter_max_mm = 19.5;
    s.blob_min = s.blob_max = 1;
    s.min_axis_ratio = 0.8;
  } else if (name == "agent") {
    s.width = s.height = 64;
    s.diameter_min_mm = 24.0;  // 32-44 px
    s.diameter_max_mm = 33.0;
    s.blob_min = 2;
    s.blob_max = 4;
    s.distractor_min = 1;
    s.distractor_max = 2;
    s.distractor_diameter_mm = 6.0;
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown synthetic preset '" + std::string(name) + "'");
  }
  s.dataset_tag = "synthetic-" + std::string(name);
  return s;
}

}  // namespace promptrl
