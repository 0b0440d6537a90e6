#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "promptrl/case_io.hpp"
#include "promptrl/geometry.hpp"
#include "promptrl/prompts.hpp"
#include "promptrl/synthetic.hpp"

using namespace promptrl;
namespace fs = std::filesystem;

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

LabeledCase case_from_mask(const Mask& m) {
  std::vector<float> v(m.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m[i] ? 0.8f : 0.2f;
  return {"t", Image2D(m.width(), m.height(), v), m, "test"};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("promptrl-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("image invariants") {
  CHECK(code_of([] { Image2D(7, 8, std::vector<float>(56, 0.f)); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { Image2D(8, 8, std::vector<float>(64, 1.5f)); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { Image2D(8, 8, std::vector<float>(64, 0.f), {0.0, 1.0}); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { Image2D(8, 8, std::vector<float>(63, 0.f)); }) == ErrorCode::ShapeMismatch);
  CHECK_NOTHROW(Image2D(8, 9, std::vector<float>(72, 0.5f), {0.75, 0.75}));
}

TEST_CASE("prompt set rejects duplicates and keeps order") {
  PromptSet s;
  s.add({3, 4, Polarity::Positive});
  s.add({3, 4, Polarity::Negative});
  s.add({1, 1, Polarity::Positive});
  CHECK(s.size() == 3);
  CHECK(s[2] == PromptPoint{1, 1, Polarity::Positive});
  CHECK(code_of([&] { s.add({3, 4, Polarity::Positive}); }) == ErrorCode::InvalidPrompt);
}

TEST_CASE("distance transform") {
  SUBCASE("all background") {
    const ScalarMap d = distance_transform(Mask(6, 5, 0));
    for (double v : d.values()) CHECK(v == 0.0);
  }
  SUBCASE("single pixel") {
    Mask m(6, 6, 0);
    m.set(2, 3);
    CHECK(distance_transform(m)(2, 3) == doctest::Approx(1.0));
  }
  SUBCASE("5x5 square with the border as background") {
    const Mask m = oracle::rect(5, 5, 0, 0, 5, 5);
    CHECK(distance_transform(m)(2, 2) == doctest::Approx(3.0));
  }
  SUBCASE("matches exhaustive search on random masks") {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
      const Mask m = oracle::random_mask(rng, rng.uniform_int(1, 14), rng.uniform_int(1, 14), rng.uniform(0.3, 0.95));
      const ScalarMap d = distance_transform(m);
      for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) REQUIRE(d(x, y) == doctest::Approx(oracle::distance(m, x, y)).epsilon(1e-12));
    }
  }
}

TEST_CASE("boundary mask uses 4-neighbours and the border") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Mask m = oracle::random_mask(rng, 9, 7, 0.6);
    const Mask b = boundary_mask(m);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) CHECK(b.test(x, y) == oracle::on_boundary(m, x, y));
  }
}

TEST_CASE("lesion anchor") {
  CHECK(lesion_anchor(oracle::rect(3, 3, 0, 0, 3, 3)) == Pixel{1, 1});
  Mask single(10, 10, 0);
  single.set(4, 7);
  CHECK(lesion_anchor(single) == Pixel{4, 7});
  CHECK(code_of([] { lesion_anchor(Mask(5, 5, 0)); }) == ErrorCode::EmptyMask);

  SUBCASE("C shape falls back to the deepest interior pixel") {
    Mask c = oracle::rect(21, 21, 2, 2, 17, 17);
    for (int y = 6; y < 15; ++y)
      for (int x = 6; x < 19; ++x) c.set(x, y, false);
    REQUIRE_FALSE(c.test(10, 10));
    double best = -1;
    Pixel want;
    for (int y = 0; y < 21; ++y)
      for (int x = 0; x < 21; ++x) {
        const double d = oracle::distance(c, x, y);
        if (d > best) best = d, want = {x, y};
      }
    CHECK(lesion_anchor(c) == want);
  }
  SUBCASE("always foreground") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const Mask m = oracle::random_blobs(rng, 20, 17);
      const Pixel p = lesion_anchor(m);
      CHECK(m.test(p.x, p.y));
    }
  }
}

TEST_CASE("sub-region partition") {
  SUBCASE("small disk is all surface") {
    const Mask m = oracle::disk(15, 15, 7, 7, 3);
    const SubRegionPartition p = decompose_subregions(m);
    CHECK(p.delta == 5);
    CHECK(p.surface == m);
    CHECK(p.center.empty());
    CHECK(p.union_region.empty());
  }
  SUBCASE("30x30 square") {
    const Mask m = oracle::rect(40, 40, 5, 5, 30, 30);
    const SubRegionPartition p = decompose_subregions(m, 5);
    const Pixel a = lesion_anchor(m);
    CHECK(p.center.test(a.x, a.y));
    CHECK(p.surface.test(5, 5));
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) {
        if (!m.test(x, y)) continue;
        const double edge = oracle::distance(m, x, y);
        const double anchor = std::hypot(x - a.x, y - a.y);
        if (edge > 5 && anchor > 5) CHECK(p.union_region.test(x, y));
      }
  }
  SUBCASE("random masks are partitioned exactly") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      const Mask m = oracle::random_blobs(rng, 32, 28);
      const int delta = rng.uniform_int(1, 6);
      const SubRegionPartition p = decompose_subregions(m, delta);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const int k = p.center[i] + p.surface[i] + p.union_region[i];
        REQUIRE(k == (m[i] ? 1 : 0));
      }
    }
  }
  CHECK(code_of([] { decompose_subregions(Mask(8, 8, 0)); }) == ErrorCode::EmptyMask);
}

TEST_CASE("point-count bins") {
  CHECK(bin_point_count(1) == PointCountGroup::One);
  CHECK(bin_point_count(3) == PointCountGroup::TwoToFour);
  CHECK(bin_point_count(4) == PointCountGroup::TwoToFour);
  CHECK(bin_point_count(5) == PointCountGroup::FiveOrMore);
  CHECK(bin_point_count(7) == PointCountGroup::FiveOrMore);
  CHECK(code_of([] { bin_point_count(0); }) == ErrorCode::InvalidCount);
  for (int n = 1; n < 200; ++n) {
    const auto g = bin_point_count(n);
    CHECK((g == PointCountGroup::One) == (n == 1));
    CHECK((g == PointCountGroup::FiveOrMore) == (n >= 5));
  }
}

TEST_CASE("prompt sampling") {
  const LabeledCase sq = case_from_mask(oracle::rect(40, 40, 5, 5, 30, 30));
  SUBCASE("center points stay near the anchor") {
    const Pixel a = lesion_anchor(sq.truth);
    const PromptSample s = sample_prompts(sq, Location::Center, 6, 9);
    CHECK_FALSE(s.used_fallback);
    for (const auto& p : s.prompts) {
      CHECK(sq.truth.test(p.x, p.y));
      CHECK(std::hypot(p.x - a.x, p.y - a.y) <= 5.0);
      CHECK(p.polarity == Polarity::Positive);
    }
  }
  SUBCASE("empty union falls back to surface") {
    const LabeledCase d = case_from_mask(oracle::disk(15, 15, 7, 7, 3));
    const PromptSample s = sample_prompts(d, Location::Union, 3, 4);
    CHECK(s.used_fallback);
    for (std::size_t i = 0; i < s.prompts.size(); ++i) CHECK(s.sources[i] == Location::Surface);
  }
  SUBCASE("deterministic and prefix-stable") {
    const PromptSample a = sample_prompts(sq, Location::Union, 8, 77);
    const PromptSample b = sample_prompts(sq, Location::Union, 8, 77);
    const PromptSample c = sample_prompts(sq, Location::Union, 3, 77);
    CHECK(a.prompts == b.prompts);
    for (std::size_t i = 0; i < 3; ++i) CHECK(c.prompts[i] == a.prompts[i]);
  }
  SUBCASE("too many points") {
    const LabeledCase d = case_from_mask(oracle::disk(15, 15, 7, 7, 1));
    CHECK(code_of([&] { sample_prompts(d, Location::Union, 6, 1); }) == ErrorCode::InsufficientRegion);
    const PromptSample all = sample_prompts(d, Location::Union, 5, 1);
    CHECK(all.prompts.size() == 5);
  }
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec = synthetic_preset("large-multi");
  spec.seed = 42;
  SUBCASE("pure function of the spec") {
    CHECK(generate_synthetic_case(spec) == generate_synthetic_case(spec));
    SyntheticSpec other = spec;
    other.seed = 43;
    CHECK_FALSE(generate_synthetic_case(spec).image == generate_synthetic_case(other).image);
  }
  SUBCASE("valid, connected, nonempty") {
    for (const auto& name : synthetic_preset_names()) {
      SyntheticSpec s = synthetic_preset(name);
      for (const LabeledCase& c : generate_suite(s, 5)) {
        CHECK_NOTHROW(c.validate());
        int components = 0;
        label_components(c.truth, &components);
        CHECK(components == 1);
        CHECK(c.dataset_tag == "synthetic-" + name);
      }
    }
  }
  SUBCASE("equivalent diameter tracks the spec") {
    SyntheticSpec s;
    s.width = s.height = 64;
    s.diameter_min_mm = s.diameter_max_mm = 20.0;
    double total = 0;
    for (const LabeledCase& c : generate_suite(s, 100)) total += equivalent_diameter_px(c.truth);
    CHECK(total / 100 == doctest::Approx(20.0).epsilon(0.1));
  }
  SUBCASE("speckle raises the noise variance") {
    SyntheticSpec s;
    s.width = s.height = 64;
    s.seed = 8;
    auto variance = [](const LabeledCase& c) {
      // Residual around the 3x3 local mean, background pixels only.
      double ss = 0;
      long n = 0;
      for (int y = 1; y < 63; ++y)
        for (int x = 1; x < 63; ++x) {
          if (c.truth.test(x, y)) continue;
          double m = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) m += c.image(x + dx, y + dy);
          const double r = c.image(x, y) - m / 9;
          ss += r * r;
          ++n;
        }
      return ss / double(n);
    };
    const double plain = variance(generate_synthetic_case(s));
    s.speckle = true;
    CHECK(variance(generate_synthetic_case(s)) > plain);
  }
  SUBCASE("infeasible specs") {
    SyntheticSpec s;
    s.diameter_min_mm = s.diameter_max_mm = 500;
    CHECK(code_of([&] { generate_synthetic_case(s); }) == ErrorCode::InvalidSpec);
    s = SyntheticSpec{};
    s.blob_min = 0;
    CHECK(code_of([&] { generate_synthetic_case(s); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { synthetic_preset("nope"); }) == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("case directories") {
  SyntheticSpec s = synthetic_preset("small-compact");
  s.seed = 4;
  const LabeledCase c = generate_synthetic_case(s);
  const fs::path dir = scratch_dir("io");

  SUBCASE("round trip") {
    save_case(dir / "a", c);
    const LabeledCase back = load_case(dir / "a");
    CHECK(back.id == c.id);
    CHECK(back.dataset_tag == c.dataset_tag);
    CHECK(back.image.spacing() == Spacing{0.75, 0.75});
    CHECK(back.truth == c.truth);
    for (std::size_t i = 0; i < c.image.values().size(); ++i)
      REQUIRE(std::abs(back.image.values()[i] - c.image.values()[i]) <= 1.0 / 65535);
    const auto all = load_case_directory(dir);
    CHECK(all.size() == 1);
  }
  SUBCASE("missing files") {
    CHECK(code_of([&] { load_case(dir / "nothing"); }) == ErrorCode::MissingFile);
  }
  SUBCASE("size mismatch") {
    save_case(dir / "b", c);
    LabeledCase small{"m", Image2D(10, 10, std::vector<float>(100, 0.5f)), oracle::rect(10, 10, 2, 2, 3, 3), "x"};
    save_case(dir / "small", small);
    fs::copy_file(dir / "small" / "mask.pgm", dir / "b" / "mask.pgm", fs::copy_options::overwrite_existing);
    CHECK(code_of([&] { load_case(dir / "b"); }) == ErrorCode::CorruptCase);
  }
  SUBCASE("malformed meta") {
    save_case(dir / "c", c);
    std::ofstream(dir / "c" / "meta.json") << "{\"id\": 3";
    CHECK(code_of([&] { load_case(dir / "c"); }) == ErrorCode::CorruptCase);
  }
  fs::remove_all(dir);
}
