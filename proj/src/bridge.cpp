#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "promptrl/rng.hpp"
#include "promptrl/segmenter.hpp"

namespace promptrl {
namespace {

using nlohmann::json;
namespace bai = boost::archive::iterators;

constexpr int kProtocolVersion = 1;
constexpr int kReadTimeoutMs = 60'000;

[[noreturn]] void bridge_fail(const std::string& what) {
  throw Error(ErrorCode::BridgeError, what);
}

json parse_reply(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    bridge_fail("malformed reply: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) bridge_fail("reply lacks op");
  if (j["op"] == "error") bridge_fail("server error: " + j.value("message", std::string{}));
  return j;
}

void expect_op(const json& j, const char* op) {
  if (j["op"] != op) bridge_fail("expected " + std::string(op) + ", got " + j["op"].dump());
}

std::uint64_t fnv1a(std::span<const float> values) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string encode_f32le(std::span<const float> values) {
  std::string raw(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &values[i], 4);
    for (int b = 0; b < 4; ++b) raw[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  using It = bai::base64_from_binary<bai::transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(raw.cbegin()), It(raw.cend()));
  out.append((3 - raw.size() % 3) % 3, '=');
  return out;
}

std::vector<float> decode_f32le(const std::string& text) {
  std::string s = text;
  const std::size_t pad = s.size() - std::min(s.size(), s.find_last_not_of('=') + 1);
  if (s.size() % 4 != 0 || pad > 2) bridge_fail("invalid base64 length");
  s.resize(s.size() - pad);
  using It = bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string raw;
  try {
    raw.assign(It(s.cbegin()), It(s.cend()));
  } catch (const std::exception&) {
    bridge_fail("invalid base64 payload");
  }
  if (raw.size() % 4 != 0) bridge_fail("payload is not a whole number of floats");
  std::vector<float> out(raw.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

BridgeClient::BridgeClient(const std::string& command) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) bridge_fail("pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    bridge_fail("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) bridge_fail("fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  pid_ = pid;
}

BridgeClient::~BridgeClient() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ <= 0) return;
  for (int i = 0; i < 100; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
}

void BridgeClient::send_line(const std::string& line) {
  if (to_child_ < 0) bridge_fail("connection closed");
  std::string data = line;
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      bridge_fail("write to bridge failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string BridgeClient::read_line() {
  if (from_child_ < 0) bridge_fail("connection closed");
  for (;;) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, kReadTimeoutMs);
    if (ready == 0) bridge_fail("timed out waiting for bridge reply");
    if (ready < 0) {
      if (errno == EINTR) continue;
      bridge_fail("poll failed");
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      bridge_fail("read from bridge failed");
    }
    if (n == 0) bridge_fail("bridge closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int BridgeClient::close() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  int status = 0;
  if (pid_ > 0) {
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string BridgeClient::hello() {
  send_line(json{{"op", "hello"}, {"version", kProtocolVersion}}.dump());
  const json reply = parse_reply(read_line());
  expect_op(reply, "hello_ack");
  if (reply.value("version", -1) != kProtocolVersion) bridge_fail("protocol version mismatch");
  return reply.value("name", std::string{});
}

void BridgeClient::set_image(const std::string& id, const Image2D& image) {
  send_line(json{{"op", "set_image"},
                 {"id", id},
                 {"width", image.width()},
                 {"height", image.height()},
                 {"encoding", "f32le"},
                 {"data", encode_f32le(image.values())}}
                .dump());
  const json reply = parse_reply(read_line());
  expect_op(reply, "image_ack");
  if (reply.value("id", std::string{}) != id) bridge_fail("image_ack for the wrong id");
}

ProbabilityMap BridgeClient::predict(const std::string& image_id, int width, int height,
                                     const PromptSet& prompts, bool stochastic,
                                     std::int64_t member_seed) {
  json pts = json::array();
  for (const PromptPoint& p : prompts) {
    pts.push_back({{"x", p.x}, {"y", p.y},
                   {"polarity", p.polarity == Polarity::Positive ? "pos" : "neg"}});
  }
  send_line(json{{"op", "predict"},
                 {"image_id", image_id},
                 {"prompts", pts},
                 {"stochastic", stochastic},
                 {"member_seed", member_seed}}
                .dump());
  const json reply = parse_reply(read_line());
  expect_op(reply, "probs");
  if (reply.value("image_id", std::string{}) != image_id) bridge_fail("probs for the wrong image");
  if (reply.value("encoding", std::string{}) != "f32le") bridge_fail("unsupported encoding");
  if (!reply.contains("data") || !reply["data"].is_string()) bridge_fail("probs without data");
  std::vector<float> values = decode_f32le(reply["data"].get<std::string>());
  if (values.size() != static_cast<std::size_t>(width) * height) {
    bridge_fail("probs payload has " + std::to_string(values.size()) + " values, expected " +
                std::to_string(width * height));
  }
  for (float v : values) {
    if (!(v >= 0.0f && v <= 1.0f)) bridge_fail("probability outside [0, 1]");
  }
  return ProbabilityMap(width, height, std::move(values));
}

BridgeSegmenter::BridgeSegmenter(const std::string& command) : client_(command) {
  name_ = client_.hello();
}

void BridgeSegmenter::ensure_image(const Image2D& image) {
  const std::uint64_t h = fnv1a(image.values()) ^ (std::uint64_t(image.width()) << 32) ^
                          std::uint64_t(image.height());
  if (!current_id_.empty() && h == current_hash_) return;
  current_id_ = "img-" + std::to_string(counter_++);
  client_.set_image(current_id_, image);
  current_hash_ = h;
}

ProbabilityMap BridgeSegmenter::predict(const Image2D& image, const PromptSet& prompts) {
  check_prompts(image, prompts);
  ensure_image(image);
  return client_.predict(current_id_, image.width(), image.height(), prompts, false, 0);
}

std::vector<ProbabilityMap> BridgeSegmenter::predict_ensemble(const Image2D& image,
                                                              const PromptSet& prompts,
                                                              const EnsembleConfig& ens) {
  if (ens.members < 1) throw Error(ErrorCode::InvalidConfig, "ensemble needs >= 1 member");
  check_prompts(image, prompts);
  ensure_image(image);
  std::vector<ProbabilityMap> out;
  for (int k = 0; k < ens.members; ++k) {
    const auto seed = static_cast<std::int64_t>(mix_seed(ens.jitter_seed, k) >> 33);
    out.push_back(client_.predict(current_id_, image.width(), image.height(), prompts, true, seed));
  }
  return out;
}

}  // namespace promptrl
