#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "promptrl/image.hpp"

namespace promptrl {

struct MetricReport {
  double dice = 0.0;
  // Empty when either mask is empty; reports carry these as sentinel rows.
  std::optional<double> hd95;
  double wall_time = 0.0;  // seconds
};

enum class TestMethod { PairedT, MannWhitneyU };
std::string_view to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::PairedT;
};

// 2|A∩B| / (|A|+|B|). Both empty gives 1, exactly one empty gives 0.
double dice(const Mask& a, const Mask& b);

// Pooled 95th percentile (linear interpolation) of the directed nearest
// boundary distances in both directions, in millimetres. Throws EmptyMask.
double hd95(const Mask& a, const Mask& b, Spacing spacing);

// Two-sided paired t-test on xs - ys. statistic is t with df = n - 1.
TestResult paired_t_test(std::span<const double> xs, std::span<const double> ys);

// Two-sided Mann-Whitney U; statistic is U for xs. Exact null distribution
// when max(n, m) <= 8 and there are no ties, normal approximation with tie
// and continuity corrections otherwise.
TestResult mann_whitney_u(std::span<const double> xs, std::span<const double> ys);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample sd, 0 when n < 2
  std::size_t n = 0;
};
Summary summarize(std::span<const double> values);

}  // namespace promptrl
