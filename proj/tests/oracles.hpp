#pragma once
// Slow, obviously-correct reference computations. Tests compare the library
// against these; nothing here is shared with the implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "promptrl/image.hpp"
#include "promptrl/rng.hpp"

namespace oracle {

using promptrl::Mask;

inline bool fg(const Mask& m, int x, int y) { return m.contains(x, y) && m(x, y) != 0; }

// Distance to the nearest background pixel, scanning every pixel plus the
// ring just outside the image.
inline double distance(const Mask& m, int x, int y) {
  if (!fg(m, x, y)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int v = -1; v <= m.height(); ++v) {
    for (int u = -1; u <= m.width(); ++u) {
      if (fg(m, u, v)) continue;
      best = std::min(best, std::hypot(double(u - x), double(v - y)));
    }
  }
  return best;
}

inline bool on_boundary(const Mask& m, int x, int y) {
  return fg(m, x, y) && (!fg(m, x - 1, y) || !fg(m, x + 1, y) || !fg(m, x, y - 1) || !fg(m, x, y + 1));
}

inline double dice(const Mask& a, const Mask& b) {
  long na = 0, nb = 0, both = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      na += fg(a, x, y);
      nb += fg(b, x, y);
      both += fg(a, x, y) && fg(b, x, y);
    }
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

inline double hd95(const Mask& a, const Mask& b, double sx, double sy) {
  std::vector<std::pair<int, int>> ba, bb;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (on_boundary(a, x, y)) ba.emplace_back(x, y);
      if (on_boundary(b, x, y)) bb.emplace_back(x, y);
    }
  }
  std::vector<double> pooled;
  auto one_way = [&](const auto& from, const auto& to) {
    for (auto [x, y] : from) {
      double best = std::numeric_limits<double>::infinity();
      for (auto [u, v] : to) best = std::min(best, std::hypot((u - x) * sx, (v - y) * sy));
      pooled.push_back(best);
    }
  };
  one_way(ba, bb);
  one_way(bb, ba);
  return percentile(pooled, 95.0);
}

// Two-sided Student-t p value by Simpson integration of the density.
inline double t_two_sided_p(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double b = std::abs(t), h = b / n;
  double s = f(0) + f(b);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return std::clamp(1.0 - 2.0 * s * h / 3.0, 0.0, 1.0);
}

// Exact two-sided Mann-Whitney p by enumerating every split of the pooled
// ranks (no ties assumed).
inline double mann_whitney_exact(const std::vector<double>& xs, const std::vector<double>& ys,
                                 double* u_out = nullptr) {
  const int n = int(xs.size()), m = int(ys.size());
  auto u_of = [](const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
      for (double y : b) u += x > y ? 1 : (x == y ? 0.5 : 0);
    return u;
  };
  const double u = u_of(xs, ys);
  if (u_out) *u_out = u;
  std::vector<double> pool(xs);
  pool.insert(pool.end(), ys.begin(), ys.end());
  long lower = 0, upper = 0, total = 0;
  for (std::uint32_t bits = 0; bits < (1u << (n + m)); ++bits) {
    if (__builtin_popcount(bits) != n) continue;
    std::vector<double> a, b;
    for (int i = 0; i < n + m; ++i) ((bits >> i) & 1 ? a : b).push_back(pool[i]);
    const double v = u_of(a, b);
    ++total;
    lower += v <= u;
    upper += v >= u;
  }
  return std::min(1.0, 2.0 * double(std::min(lower, upper)) / double(total));
}

inline Mask random_mask(promptrl::Rng& rng, int w, int h, double density) {
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, rng.uniform01() < density);
  return m;
}

// Random blobby mask: union of a few discs, never empty.
inline Mask random_blobs(promptrl::Rng& rng, int w, int h) {
  Mask m(w, h, 0);
  const int k = rng.uniform_int(1, 4);
  for (int i = 0; i < k; ++i) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h), r = rng.uniform(1, std::min(w, h) / 3.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (std::hypot(x - cx, y - cy) <= r) m.set(x, y);
  }
  if (m.empty()) m.set(w / 2, h / 2);
  return m;
}

inline Mask disk(int w, int h, double cx, double cy, double r) {
  Mask m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::hypot(x - cx, y - cy) <= r) m.set(x, y);
  return m;
}

inline Mask rect(int w, int h, int x0, int y0, int rw, int rh) {
  Mask m(w, h, 0);
  for (int y = y0; y < y0 + rh; ++y)
    for (int x = x0; x < x0 + rw; ++x) m.set(x, y);
  return m;
}

inline double binary_entropy(double q) {
  double h = 0;
  if (q > 0) h -= q * std::log(q);
  if (q < 1) h -= (1 - q) * std::log(1 - q);
  return h;
}

}  // namespace oracle
