#include <doctest.h>

#include "oracles.hpp"
#include "promptrl/metrics.hpp"

using namespace promptrl;

namespace {

template <class Fn>
ErrorCode code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

Mask single(int w, int h, int x, int y) {
  Mask m(w, h, 0);
  m.set(x, y);
  return m;
}

}  // namespace

TEST_CASE("dice conventions") {
  const Mask a = oracle::rect(3, 3, 0, 0, 2, 2), b = oracle::rect(3, 3, 1, 0, 2, 2);
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, b) == doctest::Approx(0.5));
  CHECK(dice(single(4, 4, 0, 0), single(4, 4, 3, 3)) == 0.0);
  CHECK(dice(Mask(4, 4, 0), Mask(4, 4, 0)) == 1.0);
  CHECK(dice(Mask(4, 4, 0), single(4, 4, 1, 1)) == 0.0);
  CHECK(code_of([] { dice(Mask(4, 4, 0), Mask(5, 4, 0)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("hd95 examples") {
  const Mask a = single(10, 10, 2, 5), b = single(10, 10, 5, 5);
  CHECK(hd95(a, a, {1, 1}) == 0.0);
  CHECK(hd95(a, b, {1, 1}) == doctest::Approx(3.0));
  CHECK(hd95(a, b, {0.75, 0.75}) == doctest::Approx(2.25));
  CHECK(code_of([&] { hd95(a, Mask(10, 10, 0), {1, 1}); }) == ErrorCode::EmptyMask);
}

TEST_CASE("dice and hd95 agree with brute force on random masks") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = rng.uniform_int(1, 16), h = rng.uniform_int(1, 16);
    Mask a = oracle::random_mask(rng, w, h, rng.uniform01());
    Mask b = oracle::random_mask(rng, w, h, rng.uniform01());
    REQUIRE(dice(a, b) == doctest::Approx(oracle::dice(a, b)).epsilon(1e-12));
    CHECK(dice(a, b) == dice(b, a));
    if (a.empty()) a.set(0, 0);
    if (b.empty()) b.set(w - 1, h - 1);
    const double sx = rng.uniform(0.3, 2.0), sy = rng.uniform(0.3, 2.0);
    const double got = hd95(a, b, {sx, sy});
    REQUIRE(std::abs(got - oracle::hd95(a, b, sx, sy)) <= 1e-9);
    CHECK(std::abs(got - hd95(b, a, {sx, sy})) <= 1e-12);
    CHECK(hd95(a, b, {2 * sx, 2 * sy}) == doctest::Approx(2 * got).epsilon(1e-12));
  }
}

TEST_CASE("paired t-test") {
  const std::vector<double> x{1, 2, 3}, zero{0, 0, 0};
  const TestResult r = paired_t_test(x, zero);
  CHECK(r.method == TestMethod::PairedT);
  CHECK(r.statistic == doctest::Approx(3.4641016).epsilon(1e-7));
  CHECK(r.p_value == doctest::Approx(0.0741799).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(oracle::t_two_sided_p(r.statistic, 2)).epsilon(1e-8));

  const TestResult flipped = paired_t_test(zero, x);
  CHECK(flipped.statistic == doctest::Approx(-r.statistic));
  CHECK(flipped.p_value == doctest::Approx(r.p_value));

  CHECK(code_of([&] { paired_t_test(x, x); }) == ErrorCode::DegenerateSample);
  CHECK(code_of([&] { paired_t_test(x, std::vector<double>{1, 2}); }) == ErrorCode::ShapeMismatch);

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 30);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) a[i] = rng.normal(), b[i] = rng.normal() + 0.3;
    const TestResult t = paired_t_test(a, b);
    CHECK(t.p_value == doctest::Approx(oracle::t_two_sided_p(t.statistic, n - 1)).epsilon(1e-6));
  }
}

TEST_CASE("mann-whitney") {
  SUBCASE("exact path") {
    const TestResult r = mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == doctest::Approx(1.0 / 3.0));
    CHECK(r.method == TestMethod::MannWhitneyU);

    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<double> xs(rng.uniform_int(1, 6)), ys(rng.uniform_int(1, 6));
      for (double& v : xs) v = rng.normal();
      for (double& v : ys) v = rng.normal() + 0.5;
      double u = 0;
      const double p = oracle::mann_whitney_exact(xs, ys, &u);
      const TestResult got = mann_whitney_u(xs, ys);
      CHECK(got.statistic == u);
      CHECK(got.p_value == doctest::Approx(p).epsilon(1e-12));
      const TestResult swapped = mann_whitney_u(ys, xs);
      CHECK(swapped.statistic == double(xs.size() * ys.size()) - u);
      CHECK(swapped.p_value == doctest::Approx(got.p_value));
    }
  }
  SUBCASE("approximation path") {
    std::vector<double> xs;
    for (int i = 0; i < 12; ++i) xs.push_back(i % 4);
    CHECK(mann_whitney_u(xs, xs).p_value >= 0.99);
    std::vector<double> lo(20), hi(20);
    for (int i = 0; i < 20; ++i) lo[i] = i, hi[i] = i + 100;
    CHECK(mann_whitney_u(lo, hi).p_value < 1e-6);
  }
  CHECK(code_of([] { mann_whitney_u(std::vector<double>{}, std::vector<double>{1}); }) ==
        ErrorCode::DegenerateSample);
}

TEST_CASE("null rejection rates stay near alpha") {
  Rng rng(77);
  int t_rejects = 0, u_rejects = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> a(20), b(20);
    for (int i = 0; i < 20; ++i) a[i] = rng.normal(), b[i] = rng.normal();
    const TestResult t = paired_t_test(a, b);
    const TestResult u = mann_whitney_u(a, b);
    CHECK(t.p_value >= 0.0);
    CHECK(t.p_value <= 1.0);
    CHECK(u.p_value >= 0.0);
    CHECK(u.p_value <= 1.0);
    t_rejects += t.p_value < 0.05;
    u_rejects += u.p_value < 0.05;
  }
  CHECK(std::abs(t_rejects / double(trials) - 0.05) <= 0.03);
  CHECK(std::abs(u_rejects / double(trials) - 0.05) <= 0.03);
}

TEST_CASE("summaries") {
  const Summary s = summarize(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.n == 8);
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(summarize(std::vector<double>{3}).sd == 0.0);
}
