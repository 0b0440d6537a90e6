#include "promptrl/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "promptrl/metrics.hpp"

namespace promptrl {

PromptEnv::PromptEnv(const LabeledCase& c, RegionPool pool, Segmenter& segmenter, int budget)
    : case_(&c), pool_(std::move(pool)), segmenter_(&segmenter), budget_(budget) {
  if (budget < 1) throw Error(ErrorCode::InvalidConfig, "budget must be >= 1");
  if (pool_.width != c.image.width() || pool_.height != c.image.height()) {
    throw Error(ErrorCode::ShapeMismatch, "region pool does not match the case");
  }
  if (static_cast<std::size_t>(budget) > pool_.size()) {
    throw Error(ErrorCode::InvalidConfig, "budget exceeds the number of regions");
  }
}

void PromptEnv::refresh() {
  features_.emplace(map_, pool_, &case_->truth);
  dice_ = dice(binarize(map_), case_->truth);
}

std::vector<double> PromptEnv::reset() {
  prompts_ = PromptSet{};
  selected_.assign(pool_.size(), false);
  history_.clear();
  map_ = segmenter_->predict(case_->image, prompts_);
  refresh();
  return state();
}

StepResult PromptEnv::step(int region) {
  if (selected_.empty()) throw Error(ErrorCode::EpisodeFinished, "environment was not reset");
  if (done()) throw Error(ErrorCode::EpisodeFinished, "prompt budget exhausted");
  if (region < 0 || static_cast<std::size_t>(region) >= pool_.size()) {
    throw Error(ErrorCode::InvalidPrompt, "region index out of range");
  }
  if (selected_[region]) throw Error(ErrorCode::RepeatedAction, "region already selected");

  const double before = dice_;
  const PromptPoint p = region_to_prompt(pool_.regions[region], map_);
  // Two tiles can share a max-entropy pixel only if they overlap, which a
  // pool never does; the prompt is therefore new.
  prompts_.add(p);
  selected_[region] = true;
  history_.push_back(region);
  map_ = segmenter_->predict(case_->image, prompts_);
  refresh();
  return {state(), dice_ - before, done()};
}

std::vector<int> PromptEnv::legal_actions() const {
  std::vector<int> out;
  if (done()) return out;
  for (std::size_t i = 0; i < selected_.size(); ++i) {
    if (!selected_[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

ActionRepr PromptEnv::action_features(int region, bool use_truth, KlMode mode) const {
  return features_->action(static_cast<std::size_t>(region), selected_, use_truth, mode);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw Error(ErrorCode::InvalidConfig, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 14));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch) {
  if (items_.size() < batch || batch == 0) {
    throw Error(ErrorCode::EmptyInput, "replay buffer holds fewer transitions than the batch");
  }
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &items_[rng_.uniform_index(items_.size())];
  return out;
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0)) {
    fail("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) fail("decay fraction must be in (0, 1]");
  if (batch_size < 2) fail("batch size must be >= 2");
  if (target_sync < 1) fail("target sync interval must be >= 1");
  if (replay_capacity < batch_size) fail("replay capacity must hold a batch");
  if (episodes < 1) fail("episodes must be >= 1");
  if (budget < 1) fail("budget must be >= 1");
  if (grid < 1) fail("grid must be >= 1");
  sgd.validate();
}

double AgentConfig::epsilon_at(int episode) const {
  const double horizon = std::max(1.0, epsilon_decay_fraction * episodes);
  const double frac = std::min(1.0, episode / horizon);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

namespace {

std::vector<double> legal_action_matrix(const PromptEnv& env, const std::vector<int>& legal,
                                        bool use_truth, KlMode mode) {
  std::vector<double> out;
  out.reserve(legal.size() * kActionFeatures);
  for (int a : legal) {
    const ActionRepr f = env.action_features(a, use_truth, mode);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<double> legal_q_values(GatedQNetwork& net, const std::vector<double>& state,
                                   const PromptEnv& env, bool use_truth, KlMode mode) {
  const std::vector<int> legal = env.legal_actions();
  return net.q_values(state, legal_action_matrix(env, legal, use_truth, mode));
}

int select_action(GatedQNetwork& net, const std::vector<double>& state, const PromptEnv& env,
                  double epsilon, Rng& rng, bool use_truth, KlMode mode) {
  const std::vector<int> legal = env.legal_actions();
  if (legal.empty()) throw Error(ErrorCode::EpisodeFinished, "no legal action left");
  if (rng.uniform01() < epsilon) return legal[rng.uniform_index(legal.size())];
  const std::vector<double> q = net.q_values(state, legal_action_matrix(env, legal, use_truth, mode));
  return legal[argmax_first(q)];
}

TrainResult train_agent(const std::vector<LabeledCase>& cases, const AgentConfig& cfg,
                        const SegmenterConfig& seg,
                        const std::function<void(const TrainingLogRow&)>& progress) {
  cfg.validate();
  if (cases.empty()) throw Error(ErrorCode::InvalidConfig, "training needs at least one case");
  const int w = cases.front().image.width(), h = cases.front().image.height();
  for (const auto& c : cases) {
    if (c.image.width() != w || c.image.height() != h) {
      throw Error(ErrorCode::InvalidConfig, "training cases must share one image size");
    }
  }
  const RegionPool pool = build_region_pool(w, h, cfg.grid, cfg.grid);
  auto segmenter = make_segmenter(seg);

  QNetConfig qcfg;
  qcfg.state_dim = static_cast<int>(pool.size()) * kStateFeatures;
  qcfg.seed = mix_seed(cfg.seed, 10);
  TrainResult result{GatedQNetwork(qcfg), {}};
  GatedQNetwork& online = result.net;
  GatedQNetwork target = online;
  SgdOptimizer opt(cfg.sgd);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity), mix_seed(cfg.seed, 11));
  Rng case_rng(mix_seed(cfg.seed, 12));
  Rng policy_rng(mix_seed(cfg.seed, 13));

  const int sd = qcfg.state_dim;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> states(batch * sd), actions(batch * kActionFeatures), targets(batch);
  long updates = 0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const LabeledCase& c = cases[case_rng.uniform_index(cases.size())];
    PromptEnv env(c, pool, *segmenter, cfg.budget);
    std::vector<double> state = env.reset();
    const double eps = cfg.epsilon_at(ep);
    TrainingLogRow row;
    row.episode = ep;
    row.epsilon = eps;
    double loss_sum = 0.0;
    int loss_count = 0;

    while (!env.done()) {
      const int a = select_action(online, state, env, eps, policy_rng, true, cfg.kl_mode);
      Transition t;
      t.state.assign(state.begin(), state.end());
      const ActionRepr af = env.action_features(a, true, cfg.kl_mode);
      t.action = af;
      t.action_index = a;
      StepResult r = env.step(a);
      t.reward = r.reward;
      t.done = r.done;
      t.next_state.assign(r.state.begin(), r.state.end());
      if (!r.done) {
        const std::vector<double> m = legal_action_matrix(env, env.legal_actions(), true, cfg.kl_mode);
        t.next_actions.assign(m.begin(), m.end());
      }
      replay.push(std::move(t));
      row.episode_return += r.reward;
      state = std::move(r.state);

      if (replay.size() < batch) continue;
      const auto sample = replay.sample(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const Transition& s = *sample[i];
        std::copy(s.state.begin(), s.state.end(), states.begin() + static_cast<std::ptrdiff_t>(i * sd));
        std::copy(s.action.begin(), s.action.end(),
                  actions.begin() + static_cast<std::ptrdiff_t>(i * kActionFeatures));
        double y = s.reward;
        if (!s.done && !s.next_actions.empty() && cfg.gamma > 0.0) {
          const std::vector<double> ns(s.next_state.begin(), s.next_state.end());
          const std::vector<double> na(s.next_actions.begin(), s.next_actions.end());
          const std::vector<double> q = target.q_values(ns, na);
          y += cfg.gamma * *std::max_element(q.begin(), q.end());
        }
        targets[i] = y;
      }
      online.zero_grad();
      loss_sum += online.compute_gradients(states, actions, targets, cfg.batch_size);
      ++loss_count;
      opt.step(online);
      if (++updates % cfg.target_sync == 0) target = online;
    }
    row.final_dice = env.current_dice();
    row.loss_mean = loss_count ? loss_sum / loss_count : 0.0;
    result.log.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

std::string training_log_csv(const std::vector<TrainingLogRow>& log) {
  std::ostringstream out;
  out.precision(10);
  out << "episode,return,final_dice,epsilon,loss_mean\n";
  for (const auto& r : log) {
    out << r.episode << ',' << r.episode_return << ',' << r.final_dice << ',' << r.epsilon << ','
        << r.loss_mean << '\n';
  }
  return out.str();
}

std::string_view to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::Bald: return "bald";
    case BaselineMode::Entropy: return "entropy";
    case BaselineMode::Uniform: return "uniform";
    case BaselineMode::Random: return "random";
  }
  return "?";
}

BaselineMode baseline_from_string(std::string_view name) {
  if (name == "bald") return BaselineMode::Bald;
  if (name == "entropy") return BaselineMode::Entropy;
  if (name == "uniform") return BaselineMode::Uniform;
  if (name == "random") return BaselineMode::Random;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline '" + std::string(name) + "'");
}

int baseline_select(BaselineMode mode, PromptEnv& env, const EnsembleConfig& ens, Rng& rng) {
  const std::vector<int> legal = env.legal_actions();
  if (legal.empty()) throw Error(ErrorCode::EpisodeFinished, "no legal action left");
  if (mode == BaselineMode::Uniform || mode == BaselineMode::Random) {
    return legal[rng.uniform_index(legal.size())];
  }
  std::vector<double> score(legal.size(), 0.0);
  if (mode == BaselineMode::Entropy) {
    for (std::size_t i = 0; i < legal.size(); ++i) score[i] = env.features()[legal[i]].entropy_sum;
  } else {
    const auto members = env.segmenter().predict_ensemble(env.labeled_case().image, env.prompts(), ens);
    const ScalarMap bald = bald_map(members);
    for (std::size_t i = 0; i < legal.size(); ++i) {
      const Region& r = env.pool().regions[legal[i]];
      double s = 0.0;
      for (int y = r.y0; y < r.y0 + r.h; ++y) {
        for (int x = r.x0; x < r.x0 + r.w; ++x) s += bald(x, y);
      }
      score[i] = s;
    }
  }
  return legal[argmax_first(score)];
}

bool should_stop(double max_q, const std::vector<double>& history, int step, int budget,
                 const StopCriterion& crit) {
  if (step >= budget) return true;
  if (!(max_q < crit.q_threshold)) return false;
  const int need = crit.patience - 1;
  if (static_cast<int>(history.size()) < need) return false;
  for (int i = 0; i < need; ++i) {
    if (!(history[history.size() - 1 - i] < crit.q_threshold)) return false;
  }
  return true;
}

namespace {

std::uint64_t policy_stream(const Policy& p) {
  if (!p.baseline) return 0;
  return 1 + static_cast<std::uint64_t>(*p.baseline);
}

struct CaseOutcome {
  std::vector<double> dice;
  std::optional<double> hd95;
  double wall_time = 0.0;
  int stop_step = 0;
};

CaseOutcome run_case(const Policy& policy, GatedQNetwork* net, Segmenter& segmenter,
                     const LabeledCase& c, std::size_t index, const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const RegionPool pool = build_region_pool(c.image.width(), c.image.height(), opts.grid, opts.grid);
  PromptEnv env(c, pool, segmenter, opts.budget);
  std::vector<double> state = env.reset();
  Rng rng(mix_seed(mix_seed(opts.seed, policy_stream(policy)), index));

  CaseOutcome out;
  out.stop_step = opts.budget;
  out.dice.push_back(env.current_dice());
  auto record_hd = [&] {
    const Mask m = binarize(env.current_map());
    if (!m.empty()) out.hd95 = hd95(m, c.truth, c.image.spacing());
  };
  if (opts.report_step == 0) record_hd();
  std::vector<double> q_history;
  bool stopped = false;
  for (int t = 1; t <= opts.budget; ++t) {
    if (!stopped) {
      int a;
      if (net) {
        if (opts.stop) {
          const std::vector<double> q = legal_q_values(*net, state, env, false, opts.kl_mode);
          const double max_q = *std::max_element(q.begin(), q.end());
          if (should_stop(max_q, q_history, env.step_count(), opts.budget, *opts.stop)) {
            stopped = true;
            out.stop_step = env.step_count();
          }
          q_history.push_back(max_q);
        }
        a = stopped ? -1 : select_action(*net, state, env, 0.0, rng, false, opts.kl_mode);
      } else {
        EnsembleConfig ens = opts.ensemble;
        ens.jitter_seed = mix_seed(mix_seed(opts.ensemble.jitter_seed, index), static_cast<std::uint64_t>(t));
        a = baseline_select(*policy.baseline, env, ens, rng);
      }
      if (!stopped) state = env.step(a).state;
    }
    out.dice.push_back(env.current_dice());
    if (t == opts.report_step) record_hd();
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

EvalResult evaluate_policy(const Policy& policy, const std::vector<LabeledCase>& cases,
                           const SegmenterConfig& seg, const EvalOptions& opts) {
  if (cases.empty()) throw Error(ErrorCode::EmptyInput, "no cases to evaluate");
  if ((policy.net == nullptr) == !policy.baseline.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "policy needs exactly one of a network or a baseline");
  }
  std::vector<CaseOutcome> outcomes(cases.size());
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(cases.size())));

  auto worker = [&](std::size_t begin, std::size_t stride) {
    auto segmenter = make_segmenter(seg);
    std::optional<GatedQNetwork> local;
    if (policy.net) local = *policy.net;
    for (std::size_t i = begin; i < cases.size(); i += stride) {
      outcomes[i] = run_case(policy, local ? &*local : nullptr, *segmenter, cases[i], i, opts);
    }
  };
  if (jobs == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    for (int j = 0; j < jobs; ++j) {
      threads.emplace_back([&, j] {
        try {
          worker(static_cast<std::size_t>(j), static_cast<std::size_t>(jobs));
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalResult r;
  for (auto& o : outcomes) {
    r.dice.push_back(std::move(o.dice));
    r.hd95.push_back(o.hd95);
    r.wall_time.push_back(o.wall_time);
    r.stop_step.push_back(o.stop_step);
  }
  for (int t = 0; t <= opts.budget; ++t) {
    std::vector<double> col;
    for (const auto& d : r.dice) col.push_back(d[t]);
    const Summary s = summarize(col);
    r.curve.push_back({t, s.mean, s.sd});
  }
  return r;
}

}  // namespace promptrl
