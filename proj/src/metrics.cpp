#include "promptrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "promptrl/geometry.hpp"

namespace promptrl {

std::string_view to_string(TestMethod m) {
  return m == TestMethod::PairedT ? "paired_t" : "mann_whitney_u";
}

double dice(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "dice: mask sizes differ");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += a[i] != 0 && b[i] != 0;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

namespace {

void directed(const std::vector<Pixel>& from, const std::vector<Pixel>& to, Spacing s,
              std::vector<double>& out) {
  for (const Pixel& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Pixel& q : to) {
      const double dx = (p.x - q.x) * s.sx, dy = (p.y - q.y) * s.sy;
      best = std::min(best, dx * dx + dy * dy);
    }
    out.push_back(std::sqrt(best));
  }
}

double percentile_linear(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double hd95(const Mask& a, const Mask& b, Spacing spacing) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "hd95: mask sizes differ");
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyMask, "hd95 needs two nonempty masks");
  const std::vector<Pixel> ba = boundary_mask(a).pixels();
  const std::vector<Pixel> bb = boundary_mask(b).pixels();
  std::vector<double> d;
  d.reserve(ba.size() + bb.size());
  directed(ba, bb, spacing, d);
  directed(bb, ba, spacing, d);
  return percentile_linear(std::move(d), 95.0);
}

TestResult paired_t_test(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::ShapeMismatch, "paired samples differ in length");
  if (xs.size() < 2) throw Error(ErrorCode::DegenerateSample, "paired t-test needs n >= 2");
  std::vector<double> d(xs.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = xs[i] - ys[i];
  const Summary s = summarize(d);
  if (!(s.sd > 1e-12 * std::max(1.0, std::abs(s.mean)))) {
    throw Error(ErrorCode::DegenerateSample, "paired differences have zero variance");
  }
  const double n = static_cast<double>(d.size());
  const double t = s.mean / (s.sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  const double p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                              0.0, 1.0);
  return {t, p, TestMethod::PairedT};
}

namespace {

// Number of arrangements giving each U value for sample sizes (n, m); the
// classic recurrence f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u).
std::vector<double> exact_u_counts(int n, int m) {
  // table[i][j] is the count vector for sizes (i, j).
  std::vector<std::vector<std::vector<double>>> table(
      n + 1, std::vector<std::vector<double>>(m + 1));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= m; ++j) {
      std::vector<double> f(static_cast<std::size_t>(i * j + 1), 0.0);
      if (i == 0 || j == 0) {
        f[0] = 1.0;
      } else {
        const auto& a = table[i - 1][j];
        const auto& b = table[i][j - 1];
        for (std::size_t u = 0; u < f.size(); ++u) {
          if (u >= static_cast<std::size_t>(j) && u - j < a.size()) f[u] += a[u - j];
          if (u < b.size()) f[u] += b[u];
        }
      }
      table[i][j] = std::move(f);
    }
  }
  return table[n][m];
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) throw Error(ErrorCode::DegenerateSample, "empty sample");
  const std::size_t n = xs.size(), m = ys.size();
  double u = 0.0;
  for (double x : xs) {
    for (double y : ys) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }

  std::vector<double> pooled(xs.begin(), xs.end());
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  const double nm = static_cast<double>(n * m);
  if (std::max(n, m) <= 8 && !ties) {
    const std::vector<double> counts = exact_u_counts(static_cast<int>(n), static_cast<int>(m));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto k = static_cast<std::size_t>(std::lround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i <= k) lower += counts[i];
      if (i >= k) upper += counts[i];
    }
    const double p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return {u, p, TestMethod::MannWhitneyU};
  }

  const double big_n = static_cast<double>(n + m);
  const double var = nm / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
  if (!(var > 0.0)) return {u, 1.0, TestMethod::MannWhitneyU};
  const double z = std::max(0.0, std::abs(u - nm / 2.0) - 0.5) / std::sqrt(var);
  return {u, std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0), TestMethod::MannWhitneyU};
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace promptrl
