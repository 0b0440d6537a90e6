#include "promptrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "promptrl/error.hpp"
#include "promptrl/rng.hpp"

namespace promptrl {

template <class Real>
DenseLayer<Real>::DenseLayer(int in_, int out_, bool bn, bool relu_)
    : in(in_), out(out_), batchnorm(bn), relu(relu_),
      weight(static_cast<std::size_t>(in_) * out_, Real(0)), bias(out_, Real(0)),
      gamma(bn ? out_ : 0, Real(1)), beta(bn ? out_ : 0, Real(0)),
      running_mean(bn ? out_ : 0, Real(0)), running_var(bn ? out_ : 0, Real(1)),
      d_weight(weight.size(), 0.0), d_bias(out_, 0.0), d_gamma(gamma.size(), 0.0),
      d_beta(beta.size(), 0.0) {}

template <class Real>
std::vector<double> DenseLayer<Real>::forward(std::span<const double> x, int b, NetMode mode,
                                              bool update_running) {
  if (x.size() != static_cast<std::size_t>(b) * in) {
    throw Error(ErrorCode::ShapeMismatch, "layer input has the wrong size");
  }
  batch = b;
  cached_mode = mode;
  x_cache.assign(x.begin(), x.end());
  z_cache.assign(static_cast<std::size_t>(b) * out, 0.0);
  for (int s = 0; s < b; ++s) {
    const double* xs = x.data() + static_cast<std::size_t>(s) * in;
    for (int o = 0; o < out; ++o) {
      const Real* w = weight.data() + static_cast<std::size_t>(o) * in;
      double acc = bias[o];
      for (int i = 0; i < in; ++i) acc += double(w[i]) * xs[i];
      z_cache[static_cast<std::size_t>(s) * out + o] = acc;
    }
  }

  std::vector<double> y = z_cache;
  if (batchnorm) {
    xhat_cache.assign(y.size(), 0.0);
    batch_mean.assign(out, 0.0);
    batch_inv_std.assign(out, 0.0);
    for (int o = 0; o < out; ++o) {
      double mean, var;
      if (mode == NetMode::Train) {
        mean = 0.0;
        for (int s = 0; s < b; ++s) mean += z_cache[static_cast<std::size_t>(s) * out + o];
        mean /= b;
        var = 0.0;
        for (int s = 0; s < b; ++s) {
          const double d = z_cache[static_cast<std::size_t>(s) * out + o] - mean;
          var += d * d;
        }
        var /= b;
        if (update_running) {
          const double unbiased = b > 1 ? var * b / (b - 1) : var;
          running_mean[o] = static_cast<Real>((1.0 - bn_momentum) * running_mean[o] + bn_momentum * mean);
          running_var[o] = static_cast<Real>((1.0 - bn_momentum) * running_var[o] + bn_momentum * unbiased);
        }
      } else {
        mean = running_mean[o];
        var = std::max(0.0, double(running_var[o]));
      }
      const double inv_std = 1.0 / std::sqrt(var + bn_eps);
      batch_mean[o] = mean;
      batch_inv_std[o] = inv_std;
      for (int s = 0; s < b; ++s) {
        const std::size_t k = static_cast<std::size_t>(s) * out + o;
        xhat_cache[k] = (z_cache[k] - mean) * inv_std;
        y[k] = double(gamma[o]) * xhat_cache[k] + double(beta[o]);
      }
    }
  }
  if (relu) {
    for (double& v : y) v = v > 0.0 ? v : 0.0;
  }
  y_cache = y;
  return y;
}

template <class Real>
std::vector<double> DenseLayer<Real>::backward(std::span<const double> dy_in) {
  const int b = batch;
  std::vector<double> dz(dy_in.begin(), dy_in.end());
  if (relu) {
    for (std::size_t k = 0; k < dz.size(); ++k) {
      if (!(y_cache[k] > 0.0)) dz[k] = 0.0;
    }
  }
  if (batchnorm) {
    for (int o = 0; o < out; ++o) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < b; ++s) {
        const std::size_t k = static_cast<std::size_t>(s) * out + o;
        sum_dy += dz[k];
        sum_dy_xhat += dz[k] * xhat_cache[k];
      }
      d_gamma[o] += sum_dy_xhat;
      d_beta[o] += sum_dy;
      const double g = gamma[o], inv_std = batch_inv_std[o];
      for (int s = 0; s < b; ++s) {
        const std::size_t k = static_cast<std::size_t>(s) * out + o;
        if (cached_mode == NetMode::Train) {
          // dxhat = dy * gamma; dz = inv_std / B * (B dxhat - sum dxhat - xhat sum dxhat xhat)
          dz[k] = g * inv_std / b * (b * dz[k] - sum_dy - xhat_cache[k] * sum_dy_xhat);
        } else {
          dz[k] = g * inv_std * dz[k];
        }
      }
    }
  }
  std::vector<double> dx(static_cast<std::size_t>(b) * in, 0.0);
  for (int s = 0; s < b; ++s) {
    const double* xs = x_cache.data() + static_cast<std::size_t>(s) * in;
    double* dxs = dx.data() + static_cast<std::size_t>(s) * in;
    for (int o = 0; o < out; ++o) {
      const double g = dz[static_cast<std::size_t>(s) * out + o];
      if (g == 0.0) continue;
      d_bias[o] += g;
      double* dw = d_weight.data() + static_cast<std::size_t>(o) * in;
      const Real* w = weight.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        dw[i] += g * xs[i];
        dxs[i] += g * double(w[i]);
      }
    }
  }
  return dx;
}

template <class Real>
void DenseLayer<Real>::zero_grad() {
  std::fill(d_weight.begin(), d_weight.end(), 0.0);
  std::fill(d_bias.begin(), d_bias.end(), 0.0);
  std::fill(d_gamma.begin(), d_gamma.end(), 0.0);
  std::fill(d_beta.begin(), d_beta.end(), 0.0);
}

namespace {

template <class Real>
void he_uniform(DenseLayer<Real>& layer, Rng& rng) {
  const double limit = std::sqrt(6.0 / layer.in);
  for (Real& w : layer.weight) w = static_cast<Real>(rng.uniform(-limit, limit));
}

double sigmoid(double g) {
  return g >= 0.0 ? 1.0 / (1.0 + std::exp(-g)) : std::exp(g) / (1.0 + std::exp(g));
}

}  // namespace

template <class Real>
BasicGatedQNetwork<Real>::BasicGatedQNetwork(const QNetConfig& cfg)
    : gate_weight(2, Real(0)), gate_bias(1, Real(0)), d_gate_weight(2, 0.0),
      d_gate_bias(1, 0.0), cfg_(cfg) {
  if (cfg.state_dim < 1 || cfg.state_hidden.empty() || cfg.action_hidden.empty()) {
    throw Error(ErrorCode::InvalidConfig, "network needs a state input and hidden layers");
  }
  Rng rng(cfg.seed);
  int in = cfg.state_dim;
  for (int w : cfg.state_hidden) {
    state_layers.emplace_back(in, w, true, true);
    he_uniform(state_layers.back(), rng);
    in = w;
  }
  in = kActionBranchInputs;
  for (int w : cfg.action_hidden) {
    action_layers.emplace_back(in, w, true, true);
    he_uniform(action_layers.back(), rng);
    in = w;
  }
  fusion = DenseLayer<Real>(cfg.state_hidden.back() + cfg.action_hidden.back(), 1, false, false);
  he_uniform(fusion, rng);
}

template <class Real>
std::vector<double> BasicGatedQNetwork<Real>::forward(std::span<const double> states,
                                                      std::span<const double> actions, int batch,
                                                      NetMode mode, bool update_running) {
  if (batch < 1 || states.size() != static_cast<std::size_t>(batch) * cfg_.state_dim ||
      actions.size() != static_cast<std::size_t>(batch) * kActionDim) {
    throw Error(ErrorCode::ShapeMismatch, "state/action batch does not match the network");
  }
  std::vector<double> hs(states.begin(), states.end());
  for (auto& layer : state_layers) hs = layer.forward(hs, batch, mode, update_running);

  std::vector<double> ha(static_cast<std::size_t>(batch) * kActionBranchInputs);
  gate_in_.assign(static_cast<std::size_t>(batch) * 2, 0.0);
  for (int s = 0; s < batch; ++s) {
    for (int j = 0; j < kActionBranchInputs; ++j) {
      ha[static_cast<std::size_t>(s) * kActionBranchInputs + j] = actions[s * kActionDim + j];
    }
    gate_in_[2 * s] = actions[s * kActionDim + 3];
    gate_in_[2 * s + 1] = actions[s * kActionDim + 4];
  }
  for (auto& layer : action_layers) ha = layer.forward(ha, batch, mode, update_running);

  const int ws = cfg_.state_hidden.back(), wa = cfg_.action_hidden.back();
  std::vector<double> joined(static_cast<std::size_t>(batch) * (ws + wa));
  for (int s = 0; s < batch; ++s) {
    std::copy_n(hs.begin() + static_cast<std::ptrdiff_t>(s) * ws, ws,
                joined.begin() + static_cast<std::ptrdiff_t>(s) * (ws + wa));
    std::copy_n(ha.begin() + static_cast<std::ptrdiff_t>(s) * wa, wa,
                joined.begin() + static_cast<std::ptrdiff_t>(s) * (ws + wa) + ws);
  }
  fusion_out_ = fusion.forward(joined, batch, mode, update_running);

  gate_out_.assign(batch, 0.0);
  std::vector<double> q(batch);
  for (int s = 0; s < batch; ++s) {
    const double g = double(gate_weight[0]) * gate_in_[2 * s] +
                     double(gate_weight[1]) * gate_in_[2 * s + 1] + double(gate_bias[0]);
    gate_out_[s] = sigmoid(g);
    q[s] = fusion_out_[s] * gate_out_[s];
  }
  return q;
}

template <class Real>
std::vector<double> BasicGatedQNetwork<Real>::q_values(std::span<const double> state,
                                                       std::span<const double> actions) {
  if (state.size() != static_cast<std::size_t>(cfg_.state_dim) || actions.size() % kActionDim) {
    throw Error(ErrorCode::ShapeMismatch, "state/action sizes do not match the network");
  }
  const int k = static_cast<int>(actions.size() / kActionDim);
  if (k == 0) return {};
  std::vector<double> hs(state.begin(), state.end());
  for (auto& layer : state_layers) hs = layer.forward(hs, 1, NetMode::Eval, false);

  std::vector<double> ha(static_cast<std::size_t>(k) * kActionBranchInputs);
  for (int s = 0; s < k; ++s) {
    for (int j = 0; j < kActionBranchInputs; ++j) ha[s * kActionBranchInputs + j] = actions[s * kActionDim + j];
  }
  for (auto& layer : action_layers) ha = layer.forward(ha, k, NetMode::Eval, false);

  // Fusion is linear, so split it into a shared state term and a per-action term.
  const int ws = cfg_.state_hidden.back(), wa = cfg_.action_hidden.back();
  double state_term = fusion.bias[0];
  for (int i = 0; i < ws; ++i) state_term += double(fusion.weight[i]) * hs[i];
  std::vector<double> q(k);
  for (int s = 0; s < k; ++s) {
    double score = state_term;
    for (int i = 0; i < wa; ++i) score += double(fusion.weight[ws + i]) * ha[static_cast<std::size_t>(s) * wa + i];
    const double g = double(gate_weight[0]) * actions[s * kActionDim + 3] +
                     double(gate_weight[1]) * actions[s * kActionDim + 4] + double(gate_bias[0]);
    q[s] = score * sigmoid(g);
  }
  return q;
}

template <class Real>
double BasicGatedQNetwork<Real>::compute_gradients(std::span<const double> states,
                                                   std::span<const double> actions,
                                                   std::span<const double> targets, int batch,
                                                   bool update_running) {
  if (batch < 2) throw Error(ErrorCode::DegenerateBatch, "batchnorm training needs batch >= 2");
  if (targets.size() != static_cast<std::size_t>(batch)) {
    throw Error(ErrorCode::ShapeMismatch, "one target per sample required");
  }
  const std::vector<double> q = forward(states, actions, batch, NetMode::Train, update_running);
  double loss = 0.0;
  std::vector<double> d_fusion(batch);
  for (int s = 0; s < batch; ++s) {
    const double err = q[s] - targets[s];
    loss += 0.5 * err * err / batch;
    const double dq = err / batch;
    const double sig = gate_out_[s];
    d_fusion[s] = dq * sig;
    const double dg = dq * fusion_out_[s] * sig * (1.0 - sig);
    d_gate_weight[0] += dg * gate_in_[2 * s];
    d_gate_weight[1] += dg * gate_in_[2 * s + 1];
    d_gate_bias[0] += dg;
  }
  const std::vector<double> d_joined = fusion.backward(d_fusion);
  const int ws = cfg_.state_hidden.back(), wa = cfg_.action_hidden.back();
  std::vector<double> dhs(static_cast<std::size_t>(batch) * ws), dha(static_cast<std::size_t>(batch) * wa);
  for (int s = 0; s < batch; ++s) {
    std::copy_n(d_joined.begin() + static_cast<std::ptrdiff_t>(s) * (ws + wa), ws,
                dhs.begin() + static_cast<std::ptrdiff_t>(s) * ws);
    std::copy_n(d_joined.begin() + static_cast<std::ptrdiff_t>(s) * (ws + wa) + ws, wa,
                dha.begin() + static_cast<std::ptrdiff_t>(s) * wa);
  }
  for (auto it = state_layers.rbegin(); it != state_layers.rend(); ++it) dhs = it->backward(dhs);
  for (auto it = action_layers.rbegin(); it != action_layers.rend(); ++it) dha = it->backward(dha);
  return loss;
}

template <class Real>
void BasicGatedQNetwork<Real>::zero_grad() {
  for (auto& l : state_layers) l.zero_grad();
  for (auto& l : action_layers) l.zero_grad();
  fusion.zero_grad();
  std::fill(d_gate_weight.begin(), d_gate_weight.end(), 0.0);
  std::fill(d_gate_bias.begin(), d_gate_bias.end(), 0.0);
}

template <class Real>
std::vector<ParamBlock<Real>> BasicGatedQNetwork<Real>::parameters() {
  std::vector<ParamBlock<Real>> out;
  auto add_layer = [&](DenseLayer<Real>& l, const std::string& prefix) {
    out.push_back({prefix + ".weight", l.weight, l.d_weight, true, true});
    out.push_back({prefix + ".bias", l.bias, l.d_bias, true, true});
    if (l.batchnorm) {
      out.push_back({prefix + ".gamma", l.gamma, l.d_gamma, false, true});
      out.push_back({prefix + ".beta", l.beta, l.d_beta, false, true});
      out.push_back({prefix + ".running_mean", l.running_mean, {}, false, false});
      out.push_back({prefix + ".running_var", l.running_var, {}, false, false});
    }
  };
  for (std::size_t i = 0; i < state_layers.size(); ++i) add_layer(state_layers[i], "state" + std::to_string(i));
  for (std::size_t i = 0; i < action_layers.size(); ++i) add_layer(action_layers[i], "action" + std::to_string(i));
  add_layer(fusion, "fusion");
  out.push_back({"gate.weight", gate_weight, d_gate_weight, true, true});
  out.push_back({"gate.bias", gate_bias, d_gate_bias, true, true});
  return out;
}

namespace {

template <class To, class From>
DenseLayer<To> cast_layer(const DenseLayer<From>& l) {
  DenseLayer<To> out(l.in, l.out, l.batchnorm, l.relu);
  out.bn_eps = l.bn_eps;
  out.bn_momentum = l.bn_momentum;
  auto conv = [](const std::vector<From>& v) { return std::vector<To>(v.begin(), v.end()); };
  out.weight = conv(l.weight);
  out.bias = conv(l.bias);
  out.gamma = conv(l.gamma);
  out.beta = conv(l.beta);
  out.running_mean = conv(l.running_mean);
  out.running_var = conv(l.running_var);
  return out;
}

}  // namespace

template <class Real>
template <class To>
BasicGatedQNetwork<To> BasicGatedQNetwork<Real>::cast() const {
  BasicGatedQNetwork<To> out(cfg_);
  for (std::size_t i = 0; i < state_layers.size(); ++i) out.state_layers[i] = cast_layer<To>(state_layers[i]);
  for (std::size_t i = 0; i < action_layers.size(); ++i) out.action_layers[i] = cast_layer<To>(action_layers[i]);
  out.fusion = cast_layer<To>(fusion);
  out.gate_weight.assign(gate_weight.begin(), gate_weight.end());
  out.gate_bias.assign(gate_bias.begin(), gate_bias.end());
  return out;
}

template struct DenseLayer<float>;
template struct DenseLayer<double>;
template class BasicGatedQNetwork<float>;
template class BasicGatedQNetwork<double>;
template BasicGatedQNetwork<double> BasicGatedQNetwork<float>::cast<double>() const;
template BasicGatedQNetwork<float> BasicGatedQNetwork<double>::cast<float>() const;
template BasicGatedQNetwork<float> BasicGatedQNetwork<float>::cast<float>() const;

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
}

template <class Real>
void sgd_update(std::span<Real> param, std::span<const double> grad, std::span<double> velocity,
                const SgdConfig& cfg, bool decay) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter, gradient and velocity sizes differ");
  }
  const double wd = decay ? cfg.weight_decay : 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] + grad[i] + wd * double(param[i]);
    param[i] = static_cast<Real>(double(param[i]) - cfg.learning_rate * velocity[i]);
  }
}

template void sgd_update<float>(std::span<float>, std::span<const double>, std::span<double>,
                                const SgdConfig&, bool);
template void sgd_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                 const SgdConfig&, bool);

void SgdOptimizer::step(GatedQNetwork& net) {
  auto blocks = net.parameters();
  if (velocity_.empty()) {
    for (const auto& b : blocks) velocity_.emplace_back(b.trainable ? b.value.size() : 0, 0.0);
  }
  if (velocity_.size() != blocks.size()) throw Error(ErrorCode::ShapeMismatch, "optimizer bound to another network");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].trainable) continue;
    sgd_update<float>(blocks[i].value, blocks[i].grad, velocity_[i], cfg_, blocks[i].decay);
  }
}

namespace {

std::vector<std::uint8_t> relu_pattern(BasicGatedQNetwork<double>& net) {
  std::vector<std::uint8_t> out;
  auto add = [&](const DenseLayer<double>& l) {
    for (double v : l.y_cache) out.push_back(v > 0.0);
  };
  for (const auto& l : net.state_layers) add(l);
  for (const auto& l : net.action_layers) add(l);
  return out;
}

double batch_loss(BasicGatedQNetwork<double>& net, const std::vector<double>& s,
                  const std::vector<double>& a, const std::vector<double>& t, int batch) {
  const std::vector<double> q = net.forward(s, a, batch, NetMode::Train, false);
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) loss += 0.5 * (q[i] - t[i]) * (q[i] - t[i]) / batch;
  return loss;
}

}  // namespace

double finite_diff_check(const GatedQNetwork& net, const FiniteDiffOptions& opts) {
  BasicGatedQNetwork<double> dnet = net.cast<double>();
  Rng rng(opts.seed);
  const int batch = std::max(2, opts.batch);
  const int sd = dnet.state_dim();
  std::vector<double> states(static_cast<std::size_t>(batch) * sd), actions(static_cast<std::size_t>(batch) * 5),
      targets(batch);
  for (double& v : states) v = rng.uniform(0.0, 1.0);
  for (double& v : actions) v = rng.uniform(0.0, 2.0);
  for (double& v : targets) v = rng.uniform(-1.0, 1.0);

  dnet.zero_grad();
  dnet.compute_gradients(states, actions, targets, batch, false);
  batch_loss(dnet, states, actions, targets, batch);
  const std::vector<std::uint8_t> base_pattern = relu_pattern(dnet);

  auto blocks = dnet.parameters();
  std::vector<std::size_t> trainable;
  std::size_t total = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].trainable) {
      trainable.push_back(i);
      total += blocks[i].value.size();
    }
  }
  double worst = 0.0;
  int done = 0;
  for (int attempt = 0; done < opts.probes && attempt < opts.probes * 20; ++attempt) {
    // Pick a parameter uniformly over all trainable scalars.
    std::size_t k = rng.uniform_index(total);
    std::size_t bi = 0;
    for (std::size_t idx : trainable) {
      if (k < blocks[idx].value.size()) {
        bi = idx;
        break;
      }
      k -= blocks[idx].value.size();
    }
    double& p = blocks[bi].value[k];
    const double saved = p;
    p = saved + opts.h;
    const double up = batch_loss(dnet, states, actions, targets, batch);
    const bool kink_up = relu_pattern(dnet) != base_pattern;
    p = saved - opts.h;
    const double down = batch_loss(dnet, states, actions, targets, batch);
    const bool kink_down = relu_pattern(dnet) != base_pattern;
    p = saved;
    if (kink_up || kink_down) continue;
    const double numeric = (up - down) / (2.0 * opts.h);
    const double analytic = blocks[bi].grad[k];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (std::isfinite(rel)) worst = std::max(worst, rel);
    ++done;
  }
  return worst;
}

void save_checkpoint(const std::filesystem::path& path, GatedQNetwork& net,
                     const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = "PQN1";
  header["state_dim"] = net.config().state_dim;
  header["state_hidden"] = net.config().state_hidden;
  header["action_hidden"] = net.config().action_hidden;
  header["seed"] = net.config().seed;
  header["config"] = extra;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : net.parameters()) blocks.push_back({{"name", b.name}, {"size", b.value.size()}});
  header["blocks"] = blocks;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write("PQN1", 4);
  const auto len = static_cast<std::uint32_t>(text.size());
  const unsigned char lb[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                               static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
  out.write(reinterpret_cast<const char*>(lb), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : net.parameters()) {
    for (float v : b.value) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      const unsigned char fb[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                   static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(fb), 4);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

GatedQNetwork load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingModel, "checkpoint " + path.string() + " not found");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::InvalidConfig, "checkpoint " + path.string() + ": " + why);
  };
  if (data.size() < 8 || data.compare(0, 4, "PQN1") != 0) throw corrupt("bad magic");
  const auto* u = reinterpret_cast<const unsigned char*>(data.data());
  const std::uint32_t len = u[4] | (u[5] << 8) | (u[6] << 16) | (std::uint32_t(u[7]) << 24);
  if (data.size() < 8 + std::size_t(len)) throw corrupt("truncated header");
  nlohmann::json header;
  QNetConfig cfg;
  try {
    header = nlohmann::json::parse(data.substr(8, len));
    cfg.state_dim = header.at("state_dim").get<int>();
    cfg.state_hidden = header.at("state_hidden").get<std::vector<int>>();
    cfg.action_hidden = header.at("action_hidden").get<std::vector<int>>();
    cfg.seed = header.value("seed", std::uint64_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(e.what());
  }
  GatedQNetwork net(cfg);
  std::size_t off = 8 + len;
  auto blocks = net.parameters();
  const auto& declared = header.at("blocks");
  if (declared.size() != blocks.size()) throw corrupt("block count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (declared[i].value("size", std::size_t{0}) != blocks[i].value.size()) throw corrupt("block size mismatch");
    if (data.size() < off + 4 * blocks[i].value.size()) throw corrupt("truncated parameters");
    for (float& v : blocks[i].value) {
      const std::uint32_t bits = u[off] | (u[off + 1] << 8) | (u[off + 2] << 16) | (std::uint32_t(u[off + 3]) << 24);
      std::memcpy(&v, &bits, 4);
      off += 4;
    }
  }
  if (extra) *extra = header.value("config", nlohmann::json::object());
  return net;
}

}  // namespace promptrl
