#include "promptrl/geometry.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace promptrl {
namespace {

// Stand-in for "infinitely far"; large enough to dominate any squared pixel
// distance while keeping f + q^2 exact in double precision.
constexpr double kFar = 1e12;

// One-dimensional squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

ScalarMap distance_transform(const Mask& mask) {
  // Pad by one background pixel on every side so the border acts as background.
  const int w = mask.width() + 2;
  const int h = mask.height() + 2;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = kFar;
    }
  }

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[x];
  }

  ScalarMap out(mask.width(), mask.height(), 0.0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) out(x, y) = std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
    }
  }
  return out;
}

Mask boundary_mask(const Mask& mask) {
  Mask out(mask.width(), mask.height(), 0);
  auto background = [&](int x, int y) { return !mask.contains(x, y) || !mask.test(x, y); };
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.test(x, y)) continue;
      if (background(x - 1, y) || background(x + 1, y) || background(x, y - 1) ||
          background(x, y + 1)) {
        out.set(x, y);
      }
    }
  }
  return out;
}

Pixel lesion_anchor(const Mask& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "lesion anchor of an empty mask");

  const Pixel centroid{static_cast<int>(std::lround(sx / n)), static_cast<int>(std::lround(sy / n))};
  if (mask.contains(centroid.x, centroid.y) && mask.test(centroid.x, centroid.y)) return centroid;

  const ScalarMap dt = distance_transform(mask);
  Pixel best{-1, -1};
  double best_depth = -1.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y) && dt(x, y) > best_depth) {
        best_depth = dt(x, y);
        best = {x, y};
      }
    }
  }
  return best;
}

SubRegionPartition decompose_subregions(const Mask& mask, int delta) {
  if (delta < 0) throw Error(ErrorCode::InvalidSpec, "band width must be non-negative");
  const Pixel anchor = lesion_anchor(mask);  // throws on empty masks
  const ScalarMap dt = distance_transform(mask);
  const double d = static_cast<double>(delta);

  SubRegionPartition part{Mask(mask.width(), mask.height(), 0), Mask(mask.width(), mask.height(), 0),
                          Mask(mask.width(), mask.height(), 0), delta, anchor};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.test(x, y)) continue;
      const double dx = x - anchor.x;
      const double dy = y - anchor.y;
      if (dt(x, y) <= d) {
        part.surface.set(x, y);
      } else if (dx * dx + dy * dy <= d * d) {
        part.center.set(x, y);
      } else {
        part.union_region.set(x, y);
      }
    }
  }
  return part;
}

Grid<int> label_components(const Mask& mask, int* component_count) {
  Grid<int> labels(mask.width(), mask.height(), 0);
  int next = 0;
  std::vector<Pixel> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.test(x, y) || labels(x, y) != 0) continue;
      ++next;
      labels(x, y) = next;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        const Pixel nbrs[4] = {{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}};
        for (const Pixel& q : nbrs) {
          if (mask.contains(q.x, q.y) && mask.test(q.x, q.y) && labels(q.x, q.y) == 0) {
            labels(q.x, q.y) = next;
            stack.push_back(q);
          }
        }
      }
    }
  }
  if (component_count) *component_count = next;
  return labels;
}

}  // namespace promptrl
