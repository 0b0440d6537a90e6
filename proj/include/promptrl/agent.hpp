#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "promptrl/features.hpp"
#include "promptrl/image.hpp"
#include "promptrl/nn.hpp"
#include "promptrl/rng.hpp"
#include "promptrl/segmenter.hpp"

namespace promptrl {

inline constexpr int kDefaultBudget = 10;

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

// One prompting episode on one case. Region i becomes a prompt at its
// max-entropy pixel; the reward is the change in Dice against the truth.
// The case and segmenter must outlive the environment.
class PromptEnv {
 public:
  PromptEnv(const LabeledCase& c, RegionPool pool, Segmenter& segmenter,
            int budget = kDefaultBudget);

  std::vector<double> reset();
  StepResult step(int region);

  const LabeledCase& labeled_case() const noexcept { return *case_; }
  const RegionPool& pool() const noexcept { return pool_; }
  const ProbabilityMap& current_map() const noexcept { return map_; }
  const PromptSet& prompts() const noexcept { return prompts_; }
  const std::vector<bool>& selected() const noexcept { return selected_; }
  const std::vector<int>& history() const noexcept { return history_; }
  const FeatureCache& features() const { return *features_; }
  Segmenter& segmenter() noexcept { return *segmenter_; }

  int step_count() const noexcept { return static_cast<int>(history_.size()); }
  int budget() const noexcept { return budget_; }
  bool done() const noexcept { return step_count() >= budget_; }
  double current_dice() const noexcept { return dice_; }

  std::vector<int> legal_actions() const;
  std::vector<double> state() const { return features_->state(); }
  // Features for one candidate; labeled-KL uses the truth when use_truth.
  ActionRepr action_features(int region, bool use_truth, KlMode mode = KlMode::Max) const;

 private:
  void refresh();

  const LabeledCase* case_;
  RegionPool pool_;
  Segmenter* segmenter_;
  int budget_;
  PromptSet prompts_;
  ProbabilityMap map_;
  std::vector<bool> selected_;
  std::vector<int> history_;
  std::optional<FeatureCache> features_;
  double dice_ = 0.0;
};

struct Transition {
  std::vector<float> state;
  ActionRepr action{};
  int action_index = 0;
  double reward = 0.0;
  std::vector<float> next_state;
  // Features of every legal action at next_state, k x 5 row-major.
  std::vector<float> next_actions;
  bool done = false;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);
  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  // Uniform with replacement. Throws EmptyInput when size < batch.
  std::vector<const Transition*> sample(std::size_t batch);

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
  Rng rng_;
};

struct AgentConfig {
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of all episodes
  int batch_size = 32;
  int target_sync = 500;  // optimisation steps
  int replay_capacity = 10000;
  int episodes = 2000;
  int budget = kDefaultBudget;
  int grid = kDefaultGrid;
  std::uint64_t seed = 1;
  KlMode kl_mode = KlMode::Max;
  SgdConfig sgd{};

  void validate() const;  // throws InvalidConfig
  double epsilon_at(int episode) const;
};

// Epsilon-greedy over unselected regions; ties go to the smallest index.
int select_action(GatedQNetwork& net, const std::vector<double>& state, const PromptEnv& env,
                  double epsilon, Rng& rng, bool use_truth = false, KlMode mode = KlMode::Max);

// Eval-mode Q for every legal action, parallel to env.legal_actions().
std::vector<double> legal_q_values(GatedQNetwork& net, const std::vector<double>& state,
                                   const PromptEnv& env, bool use_truth = false,
                                   KlMode mode = KlMode::Max);

struct TrainingLogRow {
  int episode = 0;
  double episode_return = 0.0;
  double final_dice = 0.0;
  double epsilon = 0.0;
  double loss_mean = 0.0;  // 0 when no update ran
};

struct TrainResult {
  GatedQNetwork net;
  std::vector<TrainingLogRow> log;
};

// Standard DQN with replay and a periodically synced target network.
// `progress`, when set, is called after every episode.
TrainResult train_agent(const std::vector<LabeledCase>& cases, const AgentConfig& cfg,
                        const SegmenterConfig& seg,
                        const std::function<void(const TrainingLogRow&)>& progress = {});

std::string training_log_csv(const std::vector<TrainingLogRow>& log);

enum class BaselineMode { Bald, Entropy, Uniform, Random };
std::string_view to_string(BaselineMode m);
BaselineMode baseline_from_string(std::string_view name);

int baseline_select(BaselineMode mode, PromptEnv& env, const EnsembleConfig& ens, Rng& rng);

struct StopCriterion {
  double q_threshold = 0.01;
  int patience = 2;
};

// `history` holds the max legal Q of earlier decision points in this
// episode, oldest first; `max_q` is the current one.
bool should_stop(double max_q, const std::vector<double>& history, int step, int budget,
                 const StopCriterion& crit = {});

struct Policy {
  // Exactly one of net / baseline is set.
  GatedQNetwork* net = nullptr;
  std::optional<BaselineMode> baseline;
  std::string label;
};

struct EvalOptions {
  int budget = kDefaultBudget;
  int grid = kDefaultGrid;
  std::uint64_t seed = 1;
  EnsembleConfig ensemble{};
  KlMode kl_mode = KlMode::Max;
  std::optional<StopCriterion> stop;
  int jobs = 1;
  // Step at which HD95 is recorded for reports.
  int report_step = 7;
};

struct CurvePoint {
  int t = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct EvalResult {
  std::vector<CurvePoint> curve;            // t = 0 .. budget
  std::vector<std::vector<double>> dice;    // [case][t]
  std::vector<std::optional<double>> hd95;  // [case] at report_step
  std::vector<double> wall_time;            // [case], seconds
  std::vector<int> stop_step;               // [case]; budget when never stopped
};

EvalResult evaluate_policy(const Policy& policy, const std::vector<LabeledCase>& cases,
                           const SegmenterConfig& seg, const EvalOptions& opts);

}  // namespace promptrl
