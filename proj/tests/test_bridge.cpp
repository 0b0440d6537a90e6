#include <doctest.h>

#include <json.hpp>

#include "promptrl/bench.hpp"
#include "promptrl/metrics.hpp"

using namespace promptrl;

namespace {

const std::string kEcho = ECHO_BRIDGE_PATH;

Image2D ramp(int w, int h) {
  std::vector<float> v(std::size_t(w) * h);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i % 17) / 16.0f;
  return Image2D(w, h, v);
}

bool all_passed(const std::vector<ConformanceCheck>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    if (!c.passed) MESSAGE(c.name << ": " << c.detail);
    ok &= c.passed;
  }
  return ok;
}

const ConformanceCheck* find(const std::vector<ConformanceCheck>& checks, const std::string& name) {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("bridge client talks to the echo server") {
  BridgeClient c(kEcho);
  CHECK(c.hello() == "echo");
  const Image2D img = ramp(11, 9);
  c.set_image("a", img);
  const ProbabilityMap p = c.predict("a", 11, 9, PromptSet{{1, 1, Polarity::Positive}}, false, 0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == img.values()[i]);
  CHECK(c.close() == 0);
}

TEST_CASE("bridge segmenter") {
  SegmenterConfig cfg;
  cfg.backend = Backend::Bridge;
  cfg.bridge_endpoint = kEcho;
  auto seg = make_segmenter(cfg);
  CHECK(seg->name() == "echo");
  const Image2D img = ramp(12, 12);
  const PromptSet ps{{2, 2, Polarity::Positive}};
  CHECK(seg->predict(img, ps) == seg->predict(img, ps));
  CHECK_THROWS_AS(seg->predict(img, PromptSet{{12, 0, Polarity::Positive}}), Error);
  EnsembleConfig ens;
  ens.members = 4;
  CHECK(seg->predict_ensemble(img, ps, ens).size() == 4);

  // Switching images re-registers without confusing the server.
  const Image2D other = ramp(9, 10);
  CHECK(seg->predict(other, ps).width() == 9);
  CHECK(seg->predict(img, ps).width() == 12);
}

TEST_CASE("server failures surface as BridgeError") {
  try {
    BridgeSegmenter s("exec /nonexistent/bridge-binary 2>/dev/null");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BridgeError);
  }
  try {
    BridgeSegmenter s(kEcho + " --leaky");
    s.predict(ramp(8, 8), PromptSet{{0, 0, Polarity::Positive}});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BridgeError);
  }
}

TEST_CASE("conformance suites pass for a well-behaved server") {
  const auto wire = protocol_suite(kEcho);
  CHECK(all_passed(wire));
  CHECK(find(wire, "protocol.echo_round_trip") != nullptr);
  CHECK(find(wire, "protocol.echo_dice_parity") != nullptr);
  CHECK(find(wire, "protocol.version_mismatch") != nullptr);

  BridgeSegmenter remote(kEcho);
  CHECK(all_passed(contract_suite(remote)));
  BuiltinSegmenter local{SegmenterConfig{}};
  CHECK(all_passed(contract_suite(local)));
}

TEST_CASE("conformance suites catch misbehaving servers") {
  const auto fragile = protocol_suite(kEcho + " --fragile");
  CHECK_FALSE(find(fragile, "protocol.malformed.not_json")->passed);

  const auto leaky = protocol_suite(kEcho + " --leaky");
  CHECK_FALSE(find(leaky, "protocol.predict")->passed);

  const auto noisy = protocol_suite(kEcho + " --noisy");
  CHECK(find(noisy, "protocol.echo_round_trip") == nullptr);
  CHECK(find(noisy, "protocol.stochastic_determinism")->passed);

  const auto missing = protocol_suite("exit 0");
  CHECK(std::none_of(missing.begin(), missing.end(), [](const ConformanceCheck& c) { return c.passed; }));
}

TEST_CASE("bridge path Dice equals the in-process echo computation") {
  std::vector<float> v(32 * 32);
  Mask truth(32, 32, 0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool in = std::hypot(x - 15.5, y - 15.5) < 9;
      v[y * 32 + x] = in ? 0.7f : 0.2f + 0.01f * float((x + y) % 7);
      truth.set(x, y, std::hypot(x - 14.0, y - 16.0) < 9);
    }
  const Image2D img(32, 32, v);
  BridgeSegmenter remote(kEcho);
  const Mask via = binarize(remote.predict(img, PromptSet{{16, 16, Polarity::Positive}}));
  ProbabilityMap local(32, 32, 0.f);
  for (std::size_t i = 0; i < v.size(); ++i) local[i] = v[i];
  CHECK(std::abs(dice(via, truth) - dice(binarize(local), truth)) <= 1e-6);
}
