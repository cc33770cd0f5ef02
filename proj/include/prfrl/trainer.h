#pragma once

// Ranker pre-training, the REINFORCE selector loop and the joint training
// procedure for every selection mode.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "prfrl/optim.h"
#include "prfrl/ranker.h"
#include "prfrl/selector.h"

namespace prfrl {

struct EpisodeConfig {
  std::size_t episodes = 50;
  double gamma = 0.3;
  double reward_sample_rate = 0.05;
  double policy_lr = 1e-3;
  double ranker_lr = 1e-3;
  std::size_t pretrain_steps = 200;
  std::size_t batch_size = 12;
  std::uint64_t seed = 0;
  bool ranker_linear_decay = true;
  OptimizerAlgorithm policy_optimizer = OptimizerAlgorithm::kAdam;
  // Update with the discounted future reward (true) or the raw immediate one.
  bool future_reward = true;
  // Subtract a running mean of past rewards before the update.
  bool reward_baseline = false;
  // Reward-set inputs use actions sampled from the policy, drawn once per
  // episode, instead of greedy selection.
  bool sampled_reward_selection = false;

  void validate() const;
};

// Independent random streams derived from one root seed.
struct RngStreams {
  std::mt19937_64 data;
  std::mt19937_64 policy;
  std::mt19937_64 gumbel;
  std::mt19937_64 reward;
  std::mt19937_64 init;
  std::mt19937_64 dropout;

  static RngStreams from_seed(std::uint64_t seed);
};

double compute_reward(double prev_loss, double cur_loss);

// r'_b = sum_{k >= 0} gamma^k r_{b+k} up to the end of the episode.
std::vector<double> future_rewards(std::span<const double> immediates, double gamma);

// Uniform sample without replacement of max(1, round(q * n)) indices in
// increasing order.
std::vector<std::size_t> sample_reward_set(std::size_t n, double q,
                                           std::mt19937_64& rng);

struct HistoryEntry {
  std::vector<std::vector<Vector>> states;  // per example, per term
  std::vector<ActionVector> actions;
  double reward = 0.0;
};

using EpisodeHistory = std::vector<HistoryEntry>;

struct BatchLog {
  std::size_t episode = 0;
  std::size_t batch = 0;
  double train_loss = 0.0;
  double reward = 0.0;
  double future_reward = 0.0;
  double select_rate = 0.0;
};

void write_batch_log(const BatchLog& entry, std::ostream& out);

enum class PolicyOverride { kNone, kAlwaysDrop, kAlwaysSelect };

// What the REINFORCE loop needs from the world it acts in.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t train_size() const = 0;
  virtual std::size_t valid_size() const = 0;
  // Selector state of every PRF term of each listed training example.
  virtual std::vector<std::vector<Vector>> term_states(
      std::span<const std::size_t> batch) = 0;
  // Updates the ranker with the selected terms; returns the batch loss.
  virtual double train_batch(std::span<const std::size_t> batch,
                             std::span<const ActionVector> actions) = 0;
  // Loss on the listed validation examples with greedy selection.
  virtual double reward_loss(std::span<const std::size_t> reward_set,
                             const ParameterStore& policy,
                             PolicyOverride override_mode) = 0;
  // Switches reward_loss to sampled selection for the rest of the episode,
  // with draws fixed by `draw_seed`.
  virtual void sample_reward_actions(std::uint64_t draw_seed) { (void)draw_seed; }
};

// Applies (1/B) * sum_i r * sum_j grad log pi(a_ij | s_ij) as an ascent step.
// Returns false without touching the policy when the gradient is zero.
bool policy_gradient_update(ParameterStore& policy, Optimizer& optimizer,
                            const HistoryEntry& entry, double reward,
                            std::size_t batch_size);

struct EpisodeSummary {
  std::size_t episode = 0;
  std::vector<std::size_t> reward_set;
  std::size_t history_before_update = 0;
  std::vector<BatchLog> batches;
};

class Reinforce {
 public:
  Reinforce(Environment& env, ParameterStore& policy, const EpisodeConfig& config,
            RngStreams& rng, PolicyOverride override_mode = PolicyOverride::kNone);

  EpisodeSummary run_episode(std::size_t episode);
  const EpisodeHistory& history() const { return history_; }

 private:
  Environment& env_;
  ParameterStore& policy_;
  EpisodeConfig config_;
  RngStreams& rng_;
  PolicyOverride override_;
  Optimizer optimizer_;
  EpisodeHistory history_;
  double baseline_ = 0.0;
  std::size_t baseline_count_ = 0;
};

// Shuffled batches covering [0, n) once.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n,
                                                       std::size_t batch_size,
                                                       std::mt19937_64& rng);

// --- full model training -----------------------------------------------------

struct ModelConfig {
  nn::EncoderConfig encoder;
  InputLimits limits;
  SelectorConfig selector;
  std::size_t vocab_size = 0;
};

struct TrainingData {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> valid;
};

// Fresh parameters: token table, encoder, head, policy and gate.
RankerModel init_model(const ModelConfig& config, std::mt19937_64& rng);

// Assembles an example with the terms whose action is 1. An empty action
// vector is accepted for examples without terms.
RankerInput assemble_selected(const EncodedExample& example,
                              std::span<const int> actions, const InputLimits& limits);

// Environment over the ranker and its training/validation data.
class RankerEnvironment : public Environment {
 public:
  RankerEnvironment(RankerModel& model, const TrainingData& data,
                    Optimizer& ranker_optimizer, std::mt19937_64& dropout_rng);

  std::size_t train_size() const override { return data_.train.size(); }
  std::size_t valid_size() const override { return data_.valid.size(); }
  std::vector<std::vector<Vector>> term_states(std::span<const std::size_t> batch) override;
  double train_batch(std::span<const std::size_t> batch,
                     std::span<const ActionVector> actions) override;
  double reward_loss(std::span<const std::size_t> reward_set,
                     const ParameterStore& policy, PolicyOverride override_mode) override;
  void sample_reward_actions(std::uint64_t draw_seed) override { draw_seed_ = draw_seed; }

 private:
  RankerModel& model_;
  const TrainingData& data_;
  Optimizer& optimizer_;
  std::mt19937_64& dropout_rng_;
  std::optional<std::uint64_t> draw_seed_;
};

struct TrainOptions {
  PolicyOverride policy_override = PolicyOverride::kNone;
  // Called after each batch.
  std::function<void(const BatchLog&)> on_batch;
  // Called after each RL episode.
  std::function<void(const EpisodeSummary&, const EpisodeHistory&)> on_episode;
};

// Pre-trains the ranker without PRF terms, then runs `episodes` passes of
// the configured selection mode. Rule and no-PRF modes train the ranker
// alone; gate and Gumbel modes train selector and ranker through the ranker
// loss; RL modes run the REINFORCE procedure.
RankerModel train_model(const TrainingData& data, const ModelConfig& config,
                        const EpisodeConfig& episode, const TrainOptions& options = {});

// Terms an example feeds to the ranker at evaluation time, with the
// per-term selection probability (or gate value) for export.
struct EvalSelection {
  ActionVector actions;
  std::vector<double> p_select;
  std::vector<Vector> gates;  // gate modes only
};

EvalSelection evaluation_selection(const RankerModel& model,
                                   const SelectorConfig& selector,
                                   const EncodedExample& example);

// Loss of one example whose terms all pass through the differentiable
// selector (gate or Gumbel mode). With `grads`, accumulates weight times the
// gradient of the ranker, selector and token table. `gate_sum` receives the
// sum of gate values (or hard selections) over the example's terms.
double selector_example_loss(const RankerModel& model, const SelectorConfig& selector,
                             const EncodedExample& example, double weight,
                             nn::DropoutContext dropout, std::mt19937_64* gumbel_rng,
                             GradStore* grads, double* gate_sum = nullptr);

// Evaluation-mode score of one example under the selector.
double score_example(const RankerModel& model, const SelectorConfig& selector,
                     const EncodedExample& example, EvalSelection* selection = nullptr);

}  // namespace prfrl
