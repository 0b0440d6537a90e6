#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace promptrl {

enum class NetMode { Train, Eval };

// Fully connected layer with optional batch normalisation and ReLU, applied
// in the order FC -> BN -> ReLU.
template <class Real>
struct DenseLayer {
  int in = 0;
  int out = 0;
  bool batchnorm = true;
  bool relu = true;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::vector<Real> weight;  // out x in, row-major
  std::vector<Real> bias;
  std::vector<Real> gamma;
  std::vector<Real> beta;
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  std::vector<double> d_weight, d_bias, d_gamma, d_beta;

  // Forward caches for the last batch.
  std::vector<double> x_cache, z_cache, xhat_cache, y_cache;
  std::vector<double> batch_mean, batch_inv_std;
  int batch = 0;
  NetMode cached_mode = NetMode::Eval;

  DenseLayer() = default;
  DenseLayer(int in, int out, bool batchnorm, bool relu);

  // x is batch x in. Train mode normalises with batch statistics and, when
  // update_running is set, advances the running estimates.
  std::vector<double> forward(std::span<const double> x, int batch, NetMode mode,
                              bool update_running);
  // Accumulates parameter gradients; returns d loss / d x.
  std::vector<double> backward(std::span<const double> dy);
  void zero_grad();
};

struct QNetConfig {
  int state_dim = 192;
  std::vector<int> state_hidden{256, 128, 64, 32};
  std::vector<int> action_hidden{32, 32, 32};
  std::uint64_t seed = 1;
  bool operator==(const QNetConfig&) const = default;
};

// Parameter block view used by the optimiser, checkpoints and the gradient
// check. Order is declaration order.
template <class Real>
struct ParamBlock {
  std::string name;
  std::span<Real> value;
  std::span<double> grad;  // empty for running statistics
  bool decay = true;       // weight decay applies
  bool trainable = true;
};

// Two-branch Q network: state branch, action branch over the first three
// action features, linear fusion, and a sigmoid gate driven by the two KL
// action features. Q = fusion * sigmoid(gate).
template <class Real>
class BasicGatedQNetwork {
 public:
  static constexpr int kActionDim = 5;
  static constexpr int kActionBranchInputs = 3;

  BasicGatedQNetwork() = default;
  explicit BasicGatedQNetwork(const QNetConfig& cfg);

  const QNetConfig& config() const noexcept { return cfg_; }
  int state_dim() const noexcept { return cfg_.state_dim; }

  // states: batch x state_dim, actions: batch x 5.
  std::vector<double> forward(std::span<const double> states, std::span<const double> actions,
                              int batch, NetMode mode, bool update_running = true);

  // Eval-mode Q for one state against many candidate actions (k x 5). The
  // state branch runs once.
  std::vector<double> q_values(std::span<const double> state, std::span<const double> actions);

  // Gradients of 0.5 * mean (Q - target)^2 in train mode. Returns the loss.
  // Throws DegenerateBatch for batch < 2.
  double compute_gradients(std::span<const double> states, std::span<const double> actions,
                           std::span<const double> targets, int batch,
                           bool update_running = true);

  void zero_grad();
  std::vector<ParamBlock<Real>> parameters();

  // Last forward's fusion score and gate, per sample.
  const std::vector<double>& last_fusion() const noexcept { return fusion_out_; }
  const std::vector<double>& last_gate() const noexcept { return gate_out_; }

  template <class To>
  BasicGatedQNetwork<To> cast() const;

  std::vector<DenseLayer<Real>> state_layers;
  std::vector<DenseLayer<Real>> action_layers;
  DenseLayer<Real> fusion;
  std::vector<Real> gate_weight;  // 2
  std::vector<Real> gate_bias;    // 1
  std::vector<double> d_gate_weight, d_gate_bias;

 private:
  QNetConfig cfg_;
  std::vector<double> fusion_out_, gate_out_, gate_in_;
};

using GatedQNetwork = BasicGatedQNetwork<float>;

struct SgdConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  void validate() const;  // throws InvalidConfig
};

// v <- momentum * v + grad + weight_decay * param (decay optional);
// param <- param - lr * v.
template <class Real>
void sgd_update(std::span<Real> param, std::span<const double> grad, std::span<double> velocity,
                const SgdConfig& cfg, bool decay);

class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  // Steps every trainable block; batchnorm gamma/beta skip weight decay.
  void step(GatedQNetwork& net);
  const SgdConfig& config() const noexcept { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

struct FiniteDiffOptions {
  int probes = 500;
  double h = 1e-4;
  int batch = 4;
  std::uint64_t seed = 7;
};

// Max relative error |a - n| / max(|a|, |n|, 1e-6) between analytic and
// central-difference gradients on randomly probed parameters. Runs on a
// double-precision copy; probes whose perturbation flips a ReLU are redrawn.
double finite_diff_check(const GatedQNetwork& net, const FiniteDiffOptions& opts = {});

// Checkpoint: "PQN1", u32 little-endian header length, JSON header, then
// little-endian f32 parameter blocks (running statistics included) in
// declaration order. `extra` is stored under "config".
void save_checkpoint(const std::filesystem::path& path, GatedQNetwork& net,
                     const nlohmann::json& extra = nlohmann::json::object());
GatedQNetwork load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace promptrl
