#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "promptrl/image.hpp"

namespace promptrl {

// Per-pixel foreground probability in [0, 1].
class ProbabilityMap : public Grid<float> {
 public:
  using Grid::Grid;
  ProbabilityMap() = default;
  explicit ProbabilityMap(Grid<float> g) : Grid(std::move(g)) {}
};

enum class Backend { Builtin, Bridge };

struct SegmenterConfig {
  Backend backend = Backend::Builtin;
  double tolerance = 0.10;       // intensity units
  double smoothing_sigma = 1.0;  // pixels
  std::string bridge_endpoint;   // shell command line

  // Unprompted intensity prior for the built-in backend. When positive, the
  // output is max(blur(raw), prior_strength * o) with
  // o = clamp((blur1(I) - median(I)) / prior_contrast, 0, 1).
  // Zero (the default) keeps the plain contract: no prompts, all zeros.
  // Values below 0.5 never change binarize(p).
  double prior_strength = 0.0;
  double prior_contrast = 0.3;

  void validate() const;  // throws InvalidConfig
  bool operator==(const SegmenterConfig&) const = default;
};

struct EnsembleConfig {
  int members = 30;
  std::uint64_t jitter_seed = 0;
  double tolerance_jitter = 0.15;  // sd of the log-tolerance multiplier
  int seed_jitter = 1;             // max prompt displacement, pixels
  bool operator==(const EnsembleConfig&) const = default;
};

// Built-in backend: 4-connected growth from each prompt over pixels within
// `tolerance` of that prompt's intensity. Negative regions are subtracted.
Mask grow_regions(const Image2D& image, std::span<const PromptPoint> prompts, double tolerance);

// Separable Gaussian, replicate edges. sigma == 0 returns the input.
Grid<float> gaussian_blur(const Grid<float>& g, double sigma);

ProbabilityMap predict_builtin(const Image2D& image, const PromptSet& prompts,
                               const SegmenterConfig& cfg);

// Foreground iff p >= threshold. Throws InvalidThreshold outside [0, 1].
Mask binarize(const ProbabilityMap& p, double threshold = 0.5);

// Throws InvalidPrompt when a prompt lies outside the image.
void check_prompts(const Image2D& image, const PromptSet& prompts);

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::string name() const = 0;
  virtual ProbabilityMap predict(const Image2D& image, const PromptSet& prompts) = 0;
  virtual std::vector<ProbabilityMap> predict_ensemble(const Image2D& image,
                                                       const PromptSet& prompts,
                                                       const EnsembleConfig& ens) = 0;
};

class BuiltinSegmenter final : public Segmenter {
 public:
  explicit BuiltinSegmenter(SegmenterConfig cfg);
  std::string name() const override { return "builtin"; }
  ProbabilityMap predict(const Image2D& image, const PromptSet& prompts) override;
  std::vector<ProbabilityMap> predict_ensemble(const Image2D& image, const PromptSet& prompts,
                                               const EnsembleConfig& ens) override;
  const SegmenterConfig& config() const noexcept { return cfg_; }

 private:
  SegmenterConfig cfg_;
};

// Serial NDJSON client for an external segmenter process. One request in
// flight at a time; not safe to share between threads.
class BridgeClient {
 public:
  explicit BridgeClient(const std::string& command);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  // Handshake; returns the server name. Throws BridgeError on mismatch.
  std::string hello();
  void set_image(const std::string& id, const Image2D& image);
  ProbabilityMap predict(const std::string& image_id, int width, int height,
                         const PromptSet& prompts, bool stochastic, std::int64_t member_seed);

  // Raw line I/O, used by the conformance suite.
  void send_line(const std::string& line);
  std::string read_line();
  // Closes the child's stdin and waits for it; returns the exit status.
  int close();

 private:
  int to_child_ = -1;
  int from_child_ = -1;
  int pid_ = -1;
  std::string buffer_;
};

class BridgeSegmenter final : public Segmenter {
 public:
  explicit BridgeSegmenter(const std::string& command);
  std::string name() const override { return name_; }
  ProbabilityMap predict(const Image2D& image, const PromptSet& prompts) override;
  std::vector<ProbabilityMap> predict_ensemble(const Image2D& image, const PromptSet& prompts,
                                               const EnsembleConfig& ens) override;

 private:
  void ensure_image(const Image2D& image);

  BridgeClient client_;
  std::string name_;
  std::string current_id_;
  std::uint64_t current_hash_ = 0;
  int counter_ = 0;
};

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& cfg);

// One-shot convenience wrapper around make_segmenter.
ProbabilityMap predict(const Image2D& image, const PromptSet& prompts, const SegmenterConfig& cfg);
std::vector<ProbabilityMap> ensemble_predict(const Image2D& image, const PromptSet& prompts,
                                             const SegmenterConfig& cfg,
                                             const EnsembleConfig& ens);

// base64 of little-endian f32 values and back.
std::string encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(const std::string& text);

}  // namespace promptrl
