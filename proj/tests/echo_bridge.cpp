// Minimal bridge server for the tests: the "echo" model returns the image
// intensities clamped to [0,1] and ignores prompts.
//
//   echo_bridge            well-behaved echo server
//   echo_bridge --noisy    announces "noisy"; stochastic requests add seeded noise
//   echo_bridge --fragile  exits on the first malformed line
//   echo_bridge --leaky    answers with values outside [0,1]
#include <algorithm>
#include <cstring>
#include <iostream>
#include <map>
#include <random>
#include <string>

#include <json.hpp>

#include "promptrl/segmenter.hpp"

using nlohmann::json;

namespace {

struct Stored {
  int width = 0;
  int height = 0;
  std::vector<float> values;
};

void reply(const json& j) {
  std::cout << j.dump() << '\n' << std::flush;
}

void fail(const std::string& msg) { reply({{"op", "error"}, {"message", msg}}); }

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw std::runtime_error(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
  bool noisy = false, fragile = false, leaky = false;
  for (int i = 1; i < argc; ++i) {
    noisy |= std::strcmp(argv[i], "--noisy") == 0;
    fragile |= std::strcmp(argv[i], "--fragile") == 0;
    leaky |= std::strcmp(argv[i], "--leaky") == 0;
  }
  std::map<std::string, Stored> images;
  std::string line;
  while (std::getline(std::cin, line)) {
    json req;
    try {
      req = json::parse(line);
      if (!req.is_object()) throw std::runtime_error("request must be an object");
      const auto op = field<std::string>(req, "op");
      if (op == "hello") {
        const int version = field<int>(req, "version");
        if (version != 1) {
          fail("unsupported protocol version " + std::to_string(version));
          return 2;
        }
        reply({{"op", "hello_ack"}, {"version", 1}, {"name", noisy ? "noisy" : "echo"}});
      } else if (op == "set_image") {
        Stored s;
        const auto id = field<std::string>(req, "id");
        s.width = field<int>(req, "width");
        s.height = field<int>(req, "height");
        if (field<std::string>(req, "encoding") != "f32le") throw std::runtime_error("unsupported encoding");
        if (s.width < 1 || s.height < 1) throw std::runtime_error("bad dimensions");
        s.values = promptrl::decode_f32le(field<std::string>(req, "data"));
        if (s.values.size() != static_cast<std::size_t>(s.width) * s.height) {
          throw std::runtime_error("payload holds " + std::to_string(s.values.size()) + " floats, expected W*H");
        }
        images[id] = std::move(s);
        reply({{"op", "image_ack"}, {"id", id}});
      } else if (op == "predict") {
        const auto id = field<std::string>(req, "image_id");
        const auto it = images.find(id);
        if (it == images.end()) throw std::runtime_error("unknown image_id '" + id + "'");
        const Stored& s = it->second;
        for (const auto& p : field<json>(req, "prompts")) {
          const int x = field<int>(p, "x"), y = field<int>(p, "y");
          const auto pol = field<std::string>(p, "polarity");
          if (pol != "pos" && pol != "neg") throw std::runtime_error("bad polarity '" + pol + "'");
          if (x < 0 || y < 0 || x >= s.width || y >= s.height) throw std::runtime_error("prompt out of bounds");
        }
        const bool stochastic = field<bool>(req, "stochastic");
        const auto seed = field<std::int64_t>(req, "member_seed");
        std::vector<float> out(s.values.size());
        std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
        std::uniform_real_distribution<float> jitter(-0.05f, 0.05f);
        for (std::size_t i = 0; i < out.size(); ++i) {
          float v = s.values[i];
          if (noisy && stochastic) v += jitter(gen);
          out[i] = leaky ? v + 1.5f : std::clamp(v, 0.0f, 1.0f);
        }
        reply({{"op", "probs"}, {"image_id", id}, {"encoding", "f32le"}, {"data", promptrl::encode_f32le(out)}});
      } else {
        throw std::runtime_error("unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      if (fragile) return 3;
      fail(e.what());
    }
  }
  return 0;
}
