#include <algorithm>
#include <cmath>
#include <cstring>

#include "promptrl/bench.hpp"
#include "promptrl/metrics.hpp"

namespace promptrl {
using nlohmann::json;

namespace {

Image2D probe_image(int w, int h) {
  std::vector<float> v(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - w / 2.0, dy = y - h / 2.0;
      const bool inside = dx * dx + dy * dy < (h / 3.0) * (h / 3.0);
      v[static_cast<std::size_t>(y) * w + x] = inside ? 0.8f : static_cast<float>(0.05 + 0.01 * ((x * 7 + y * 3) % 5));
    }
  }
  return Image2D(w, h, std::move(v), {0.75, 0.75});
}

Mask probe_truth(const Image2D& img) {
  Mask m(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) m.set(x, y, img(x, y) > 0.5f);
  }
  return m;
}

bool in_unit_range(const ProbabilityMap& p) {
  return std::all_of(p.values().begin(), p.values().end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

template <class Fn>
ConformanceCheck check(const std::string& name, Fn fn) {
  try {
    std::string detail;
    const bool ok = fn(detail);
    return {name, ok, detail};
  } catch (const std::exception& e) {
    return {name, false, e.what()};
  }
}

json reply_of(BridgeClient& c) { return json::parse(c.read_line()); }

}  // namespace

std::vector<ConformanceCheck> contract_suite(Segmenter& seg) {
  const Image2D img = probe_image(24, 20);
  const PromptSet prompts{{12, 10, Polarity::Positive}, {3, 3, Polarity::Positive}};
  std::vector<ConformanceCheck> out;
  out.push_back(check("contract.shape", [&](std::string& d) {
    const ProbabilityMap p = seg.predict(img, prompts);
    d = std::to_string(p.width()) + "x" + std::to_string(p.height());
    return p.width() == img.width() && p.height() == img.height();
  }));
  out.push_back(check("contract.bounds", [&](std::string&) { return in_unit_range(seg.predict(img, prompts)); }));
  out.push_back(check("contract.determinism", [&](std::string&) {
    return seg.predict(img, prompts) == seg.predict(img, prompts);
  }));
  out.push_back(check("contract.empty_prompts", [&](std::string&) {
    const ProbabilityMap p = seg.predict(img, PromptSet{});
    return p.same_shape(img.grid()) && in_unit_range(p);
  }));
  out.push_back(check("contract.invalid_prompt", [&](std::string& d) {
    try {
      seg.predict(img, PromptSet{{img.width(), 0, Polarity::Positive}});
    } catch (const Error& e) {
      d = e.what();
      return e.code() == ErrorCode::InvalidPrompt;
    }
    d = "out-of-bounds prompt accepted";
    return false;
  }));
  out.push_back(check("contract.ensemble", [&](std::string& d) {
    EnsembleConfig ens;
    ens.members = 3;
    ens.jitter_seed = 5;
    const auto a = seg.predict_ensemble(img, prompts, ens);
    const auto b = seg.predict_ensemble(img, prompts, ens);
    d = std::to_string(a.size()) + " members";
    return a.size() == 3 && a == b &&
           std::all_of(a.begin(), a.end(), [&](const ProbabilityMap& m) {
             return m.same_shape(img.grid()) && in_unit_range(m);
           });
  }));
  return out;
}

std::vector<ConformanceCheck> protocol_suite(const std::string& command) {
  std::vector<ConformanceCheck> out;
  // Odd sizes exercise base64 padding.
  const Image2D img = probe_image(11, 8);
  std::string name;
  try {
    BridgeClient client(command);
    out.push_back(check("protocol.handshake", [&](std::string& d) {
      client.send_line(json{{"op", "hello"}, {"version", 1}}.dump());
      const json r = reply_of(client);
      d = r.dump();
      name = r.value("name", std::string{});
      return r.value("op", "") == "hello_ack" && r.value("version", 0) == 1 && r.contains("name") &&
             r["name"].is_string();
    }));
    out.push_back(check("protocol.set_image", [&](std::string& d) {
      client.send_line(json{{"op", "set_image"}, {"id", "probe"}, {"width", img.width()},
                            {"height", img.height()}, {"encoding", "f32le"},
                            {"data", encode_f32le(img.values())}}
                           .dump());
      const json r = reply_of(client);
      d = r.dump();
      return r.value("op", "") == "image_ack" && r.value("id", "") == "probe";
    }));
    auto request = [&](bool stochastic, std::int64_t seed) {
      client.send_line(json{{"op", "predict"}, {"image_id", "probe"},
                            {"prompts", json::array({{{"x", 6}, {"y", 3}, {"polarity", "pos"}},
                                                     {{"x", 1}, {"y", 1}, {"polarity", "neg"}}})},
                            {"stochastic", stochastic}, {"member_seed", seed}}
                           .dump());
      return reply_of(client);
    };
    out.push_back(check("protocol.predict", [&](std::string& d) {
      const json r = request(false, 0);
      if (r.value("op", "") != "probs" || r.value("image_id", "") != "probe" || r.value("encoding", "") != "f32le") {
        d = r.dump().substr(0, 200);
        return false;
      }
      const std::vector<float> v = decode_f32le(r.at("data").get<std::string>());
      d = std::to_string(v.size()) + " floats";
      return v.size() == img.values().size() &&
             std::all_of(v.begin(), v.end(), [](float x) { return x >= 0.0f && x <= 1.0f; });
    }));
    if (name == "echo") {
      out.push_back(check("protocol.echo_round_trip", [&](std::string& d) {
        const json r = request(false, 0);
        const std::vector<float> v = decode_f32le(r.at("data").get<std::string>());
        if (v.size() != img.values().size()) return false;
        const bool same = std::memcmp(v.data(), img.values().data(), v.size() * sizeof(float)) == 0;
        d = same ? "bit-identical" : "payload differs from the image";
        return same;
      }));
    }
    out.push_back(check("protocol.stochastic_determinism", [&](std::string&) {
      const json a = request(true, 1234);
      const json b = request(true, 1234);
      return a.value("op", "") == "probs" && a == b;
    }));
    out.push_back(check("protocol.unknown_image", [&](std::string& d) {
      client.send_line(json{{"op", "predict"}, {"image_id", "missing-7f3a"}, {"prompts", json::array()},
                            {"stochastic", false}, {"member_seed", 0}}
                           .dump());
      const json r = reply_of(client);
      d = r.dump();
      return r.value("op", "") == "error" && r.value("message", "").find("missing-7f3a") != std::string::npos;
    }));
    const std::vector<std::pair<std::string, std::string>> malformed = {
        {"not_json", "{not json"},
        {"not_object", "[1,2,3]"},
        {"unknown_op", R"({"op":"bogus"})"},
        {"missing_fields", R"({"op":"set_image","id":"x"})"},
        {"bad_base64", R"({"op":"set_image","id":"x","width":2,"height":1,"encoding":"f32le","data":"@@@@"})"},
        {"short_payload", json{{"op", "set_image"}, {"id", "x"}, {"width", 3}, {"height", 3},
                                {"encoding", "f32le"}, {"data", encode_f32le(std::vector<float>{0.5f})}}
                              .dump()},
        {"bad_encoding", R"({"op":"set_image","id":"x","width":1,"height":1,"encoding":"png","data":"AAAAAA=="})"},
        {"prompt_out_of_bounds",
         R"({"op":"predict","image_id":"probe","prompts":[{"x":99,"y":0,"polarity":"pos"}],"stochastic":false,"member_seed":0})"},
        {"bad_polarity",
         R"({"op":"predict","image_id":"probe","prompts":[{"x":1,"y":0,"polarity":"up"}],"stochastic":false,"member_seed":0})"},
        {"empty_line", ""},
        {"binary_noise", std::string("\x01\x02\x7f{", 4)},
    };
    for (const auto& [label, line] : malformed) {
      out.push_back(check("protocol.malformed." + label, [&](std::string& d) {
        client.send_line(line);
        const json r = reply_of(client);
        d = r.dump().substr(0, 200);
        return r.value("op", "") == "error" && r.contains("message");
      }));
    }
    out.push_back(check("protocol.session_survives", [&](std::string&) {
      client.send_line(json{{"op", "hello"}, {"version", 1}}.dump());
      return reply_of(client).value("op", "") == "hello_ack";
    }));
    client.close();
  } catch (const std::exception& e) {
    out.push_back({"protocol.connect", false, e.what()});
    return out;
  }

  if (name == "echo") {
    out.push_back(check("protocol.echo_dice_parity", [&](std::string& d) {
      const Image2D big = probe_image(40, 32);
      const Mask truth = probe_truth(big);
      ProbabilityMap local(big.width(), big.height(), 0.0f);
      for (std::size_t i = 0; i < local.size(); ++i) local[i] = std::clamp(big.values()[i], 0.0f, 1.0f);
      BridgeSegmenter remote(command);
      const ProbabilityMap via_bridge = remote.predict(big, PromptSet{{20, 16, Polarity::Positive}});
      const double a = dice(binarize(local), truth), b = dice(binarize(via_bridge), truth);
      d = "in-process " + std::to_string(a) + ", bridge " + std::to_string(b);
      return std::abs(a - b) <= 1e-6;
    }));
  }

  out.push_back(check("protocol.version_mismatch", [&](std::string& d) {
    BridgeClient c(command);
    c.send_line(json{{"op", "hello"}, {"version", 999}}.dump());
    const json r = reply_of(c);
    const int status = c.close();
    d = r.dump() + ", exit " + std::to_string(status);
    return r.value("op", "") == "error" && status == 2;
  }));
  return out;
}

}  // namespace promptrl
