#include "prfrl/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "prfrl/error.h"
#include "prfrl/log.h"

namespace prfrl {

void EpisodeConfig::validate() const {
  if (episodes < 1) throw InvalidArgument("episodes must be at least 1");
  if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("discount must be in [0, 1]");
  if (!(reward_sample_rate > 0.0) || reward_sample_rate > 1.0) {
    throw InvalidArgument("reward sample rate must be in (0, 1]");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (!(policy_lr >= 0.0) || !(ranker_lr >= 0.0)) {
    throw InvalidArgument("learning rates must be non-negative");
  }
}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  auto stream = [seed](std::uint32_t component) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32), component};
    return std::mt19937_64(seq);
  };
  return {stream(1), stream(2), stream(3), stream(4), stream(5), stream(6)};
}

double compute_reward(double prev_loss, double cur_loss) {
  if (!std::isfinite(prev_loss) || !std::isfinite(cur_loss)) {
    throw NumericalError("non-finite reward-set loss");
  }
  return prev_loss - cur_loss;
}

std::vector<double> future_rewards(std::span<const double> immediates, double gamma) {
  std::vector<double> out(immediates.size());
  double acc = 0.0;
  for (std::size_t b = immediates.size(); b-- > 0;) {
    acc = immediates[b] + gamma * acc;
    out[b] = acc;
  }
  return out;
}

std::vector<std::size_t> sample_reward_set(std::size_t n, double q, std::mt19937_64& rng) {
  if (n == 0) throw InvalidArgument("reward set needs validation examples");
  const auto wanted = static_cast<std::size_t>(std::llround(q * static_cast<double>(n)));
  const std::size_t size = std::clamp<std::size_t>(wanted, 1, n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(size);
  std::sample(all.begin(), all.end(), std::back_inserter(out), size, rng);
  return out;
}

void write_batch_log(const BatchLog& entry, std::ostream& out) {
  nlohmann::ordered_json j;
  j["episode"] = entry.episode;
  j["batch"] = entry.batch;
  j["train_loss"] = entry.train_loss;
  j["reward"] = entry.reward;
  j["future_reward"] = entry.future_reward;
  j["select_rate"] = entry.select_rate;
  out << j.dump() << '\n';
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n,
                                                       std::size_t batch_size,
                                                       std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

bool policy_gradient_update(ParameterStore& policy, Optimizer& optimizer,
                            const HistoryEntry& entry, double reward,
                            std::size_t batch_size) {
  if (!std::isfinite(reward)) throw NumericalError("non-finite reward");
  if (reward == 0.0 || batch_size == 0) return false;
  GradStore grads;
  const double weight = reward / static_cast<double>(batch_size);
  bool any = false;
  for (std::size_t i = 0; i < entry.states.size(); ++i) {
    for (std::size_t j = 0; j < entry.states[i].size(); ++j) {
      log_prob_backward(policy, entry.states[i][j], entry.actions[i][j], weight, grads);
      any = true;
    }
  }
  if (!any) return false;
  optimizer.step(policy, grads, /*ascend=*/true);
  return true;
}

namespace {

OptimizerConfig policy_optimizer_config(const EpisodeConfig& config) {
  OptimizerConfig opt;
  opt.algorithm = config.policy_optimizer;
  opt.learning_rate = config.policy_lr;
  return opt;
}

}  // namespace

Reinforce::Reinforce(Environment& env, ParameterStore& policy,
                     const EpisodeConfig& config, RngStreams& rng,
                     PolicyOverride override_mode)
    : env_(env),
      policy_(policy),
      config_(config),
      rng_(rng),
      override_(override_mode),
      optimizer_(policy_optimizer_config(config)) {
  config_.validate();
  if (env_.train_size() == 0) throw InvalidArgument("empty training split");
}

EpisodeSummary Reinforce::run_episode(std::size_t episode) {
  EpisodeSummary summary;
  summary.episode = episode;
  const auto batches = shuffled_batches(env_.train_size(), config_.batch_size, rng_.data);
  summary.reward_set = sample_reward_set(env_.valid_size(), config_.reward_sample_rate,
                                         rng_.reward);
  if (config_.sampled_reward_selection) env_.sample_reward_actions(rng_.reward());
  double prev = env_.reward_loss(summary.reward_set, policy_, override_);

  std::vector<double> immediates;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    HistoryEntry entry;
    entry.states = env_.term_states(batches[b]);
    std::size_t selected = 0;
    std::size_t total = 0;
    for (const auto& example_states : entry.states) {
      ActionVector actions;
      for (const Vector& s : example_states) {
        int a = 0;
        if (override_ == PolicyOverride::kAlwaysSelect) {
          a = 1;
        } else if (override_ == PolicyOverride::kNone) {
          std::bernoulli_distribution draw(policy_probs(policy_, s)[0]);
          a = draw(rng_.policy) ? 1 : 0;
        }
        actions.push_back(a);
        selected += static_cast<std::size_t>(a);
        ++total;
      }
      entry.actions.push_back(std::move(actions));
    }
    BatchLog log_entry;
    log_entry.episode = episode;
    log_entry.batch = b;
    log_entry.train_loss = env_.train_batch(batches[b], entry.actions);
    const double cur = env_.reward_loss(summary.reward_set, policy_, override_);
    entry.reward = compute_reward(prev, cur);
    prev = cur;
    log_entry.reward = entry.reward;
    log_entry.select_rate =
        total == 0 ? 0.0 : static_cast<double>(selected) / static_cast<double>(total);
    immediates.push_back(entry.reward);
    history_.push_back(std::move(entry));
    summary.batches.push_back(log_entry);
  }

  const std::vector<double> future = future_rewards(immediates, config_.gamma);
  for (std::size_t b = 0; b < summary.batches.size(); ++b) {
    summary.batches[b].future_reward = future[b];
  }
  summary.history_before_update = history_.size();
  if (override_ == PolicyOverride::kNone) {
    for (std::size_t b = 0; b < history_.size(); ++b) {
      double reward = config_.future_reward ? future[b] : immediates[b];
      if (config_.reward_baseline) {
        const double raw = reward;
        if (baseline_count_ > 0) reward -= baseline_;
        ++baseline_count_;
        baseline_ += (raw - baseline_) / static_cast<double>(baseline_count_);
      }
      policy_gradient_update(policy_, optimizer_, history_[b], reward,
                             history_[b].states.size());
    }
  }
  history_.clear();
  return summary;
}

// --- full model ------------------------------------------------------------

RankerModel init_model(const ModelConfig& config, std::mt19937_64& rng) {
  config.encoder.validate();
  config.limits.validate();
  config.selector.validate();
  if (config.vocab_size <= Vocabulary::kNumReserved) {
    throw InvalidArgument("vocabulary too small");
  }
  if (config.limits.max_len > config.encoder.max_len) {
    throw InvalidArgument("input max_len exceeds encoder max_len");
  }
  RankerModel model;
  model.encoder = config.encoder;
  model.limits = config.limits;
  nn::init_embedding(model.params, config.vocab_size, config.encoder.d, rng);
  nn::init_encoder(model.params, config.encoder, rng);
  init_head(model.params, config.encoder.d);
  init_policy(model.params, config.encoder.d);
  init_gate(model.params, config.encoder.d, config.selector.elementwise_gate);
  return model;
}

RankerInput assemble_selected(const EncodedExample& example, std::span<const int> actions,
                              const InputLimits& limits) {
  if (actions.empty() && !example.terms.empty()) {
    return assemble_input(example.turns, example.response, {}, limits);
  }
  const std::vector<IdList> chosen = apply_selection(std::span<const IdList>(example.terms), actions);
  return assemble_input(example.turns, example.response, chosen, limits);
}

namespace {

ActionVector greedy_actions(const ParameterStore& policy, const std::vector<Vector>& states,
                            PolicyOverride override_mode) {
  ActionVector actions;
  for (const Vector& s : states) {
    switch (override_mode) {
      case PolicyOverride::kAlwaysDrop: actions.push_back(0); break;
      case PolicyOverride::kAlwaysSelect: actions.push_back(1); break;
      case PolicyOverride::kNone:
        actions.push_back(policy_probs(policy, s)[0] >= 0.5 ? 1 : 0);
        break;
    }
  }
  return actions;
}

std::vector<Vector> example_states(const RankerModel& model, const EncodedExample& ex) {
  if (ex.terms.empty()) return {};
  SelectorState st = state_of(ex.response, ex.terms, model.params.get(nn::kTokenEmbedding));
  std::vector<Vector> out;
  out.reserve(st.terms.size());
  for (TermState& t : st.terms) out.push_back(std::move(t.s));
  return out;
}

bool is_rl(SelectionMode mode) {
  return mode == SelectionMode::kRlSample || mode == SelectionMode::kRlGreedy;
}

bool is_gate(SelectionMode mode) {
  return mode == SelectionMode::kGateTanh || mode == SelectionMode::kGateSigmoid;
}

ActionVector rule_actions(const EncodedExample& ex, long top_m) {
  const std::size_t keep =
      top_m < 0 ? ex.terms.size() : std::min(ex.terms.size(), static_cast<std::size_t>(top_m));
  ActionVector a(ex.terms.size(), 0);
  std::fill(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(keep), 1);
  return a;
}

}  // namespace

RankerEnvironment::RankerEnvironment(RankerModel& model, const TrainingData& data,
                                     Optimizer& ranker_optimizer,
                                     std::mt19937_64& dropout_rng)
    : model_(model), data_(data), optimizer_(ranker_optimizer), dropout_rng_(dropout_rng) {}

std::vector<std::vector<Vector>> RankerEnvironment::term_states(
    std::span<const std::size_t> batch) {
  std::vector<std::vector<Vector>> out;
  out.reserve(batch.size());
  for (std::size_t idx : batch) out.push_back(example_states(model_, data_.train.at(idx)));
  return out;
}

double RankerEnvironment::train_batch(std::span<const std::size_t> batch,
                                      std::span<const ActionVector> actions) {
  std::vector<RankerInput> inputs;
  inputs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    inputs.push_back(assemble_selected(data_.train.at(batch[i]), actions[i], model_.limits));
  }
  std::vector<RankerBatchItem> items;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    items.push_back({&inputs[i], data_.train[batch[i]].label});
  }
  return ranker_train_step(model_, optimizer_, items, &dropout_rng_);
}

double RankerEnvironment::reward_loss(std::span<const std::size_t> reward_set,
                                      const ParameterStore& policy,
                                      PolicyOverride override_mode) {
  std::vector<double> preds;
  std::vector<int> labels;
  for (std::size_t idx : reward_set) {
    const EncodedExample& ex = data_.valid.at(idx);
    const std::vector<Vector> states = example_states(model_, ex);
    ActionVector actions;
    if (draw_seed_ && override_mode == PolicyOverride::kNone) {
      std::mt19937_64 draw(*draw_seed_ + idx);
      for (const Vector& s : states) {
        std::bernoulli_distribution select(policy_probs(policy, s)[0]);
        actions.push_back(select(draw) ? 1 : 0);
      }
    } else {
      actions = greedy_actions(policy, states, override_mode);
    }
    preds.push_back(score(model_, assemble_selected(ex, actions, model_.limits)));
    labels.push_back(ex.label);
  }
  return batch_loss(preds, labels);
}

double selector_example_loss(const RankerModel& model, const SelectorConfig& selector,
                             const EncodedExample& ex, double weight,
                             nn::DropoutContext dropout, std::mt19937_64* gumbel_rng,
                             GradStore* grads, double* gate_sum) {
  const bool gumbel = selector.mode == SelectionMode::kGumbel;
  if (!gumbel && !is_gate(selector.mode)) {
    throw InvalidArgument("selector loss needs a gate or gumbel mode");
  }
  const RankerInput input = assemble_input(ex.turns, ex.response, ex.terms, model.limits);
  if (ex.terms.empty()) {
    if (grads != nullptr) {
      return example_loss_backward(model, input, ex.label, nullptr, weight, dropout,
                                   *grads, nullptr);
    }
    const double p = score(model, input);
    return ex.label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }

  const Matrix& table = model.params.get(nn::kTokenEmbedding);
  const SelectorState state = state_of(ex.response, ex.terms, table);
  const std::size_t width = gumbel ? 1 : model.params.get(kGateW).rows();
  std::vector<Vector> gates;
  std::vector<GumbelSample> samples;
  for (const TermState& ts : state.terms) {
    if (gumbel) {
      if (gumbel_rng == nullptr) throw InvalidArgument("gumbel mode needs a random stream");
      samples.push_back(gumbel_select(model.params, ts.s, selector.temperature, *gumbel_rng));
      gates.push_back({static_cast<double>(samples.back().action)});
    } else {
      gates.push_back(soft_gate(model.params, ts.s, selector.mode));
    }
    if (gate_sum != nullptr) {
      *gate_sum += std::accumulate(gates.back().begin(), gates.back().end(), 0.0) /
                   static_cast<double>(gates.back().size());
    }
  }
  const Matrix token_gate = token_gates(input, gates, width);
  if (grads == nullptr) {
    const double p = score(model, input, &token_gate);
    return ex.label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }

  Matrix d_gates;
  const double loss = example_loss_backward(model, input, ex.label, &token_gate, weight,
                                            dropout, *grads, &d_gates);
  std::vector<Vector> d_states;
  for (std::size_t i = 0; i < state.terms.size(); ++i) {
    Vector d_gate(width, 0.0);
    if (const auto& span = input.term_spans[i]) {
      for (std::size_t t = span->begin; t < span->end; ++t) {
        for (std::size_t c = 0; c < width; ++c) d_gate[c] += d_gates(t, c);
      }
    }
    const Vector& s = state.terms[i].s;
    if (gumbel) {
      d_states.push_back(gumbel_backward(model.params, s, samples[i], selector.temperature,
                                         d_gate[0], *grads));
    } else {
      d_states.push_back(soft_gate_backward(model.params, s, selector.mode, d_gate, *grads));
    }
  }
  state_backward(ex.response, ex.terms, state, d_states,
                 grads->at(nn::kTokenEmbedding, table.rows(), table.cols()));
  return loss;
}

RankerModel train_model(const TrainingData& data, const ModelConfig& config,
                        const EpisodeConfig& episode, const TrainOptions& options) {
  episode.validate();
  if (data.train.empty()) throw InvalidArgument("empty training split");
  const SelectionMode mode = config.selector.mode;
  if (is_rl(mode) && data.valid.empty()) {
    throw InvalidArgument("reinforced selection needs a validation split");
  }

  RngStreams rng = RngStreams::from_seed(episode.seed);
  RankerModel model = init_model(config, rng.init);
  model.params.seed = episode.seed;

  const std::size_t n = data.train.size();
  const std::size_t per_episode = (n + episode.batch_size - 1) / episode.batch_size;
  OptimizerConfig ranker_opt;
  ranker_opt.learning_rate = episode.ranker_lr;
  ranker_opt.linear_decay = episode.ranker_linear_decay;
  ranker_opt.total_steps = episode.pretrain_steps + episode.episodes * per_episode;
  Optimizer optimizer(ranker_opt);
  nn::DropoutContext dropout{model.encoder.dropout, &rng.dropout};

  auto emit = [&](const BatchLog& entry) {
    if (options.on_batch) options.on_batch(entry);
  };

  // Inputs of the no-PRF and rule modes never change.
  std::vector<RankerInput> fixed_plain(n);
  std::vector<bool> have_plain(n, false);
  auto plain_input = [&](std::size_t i) -> const RankerInput& {
    if (!have_plain[i]) {
      fixed_plain[i] = assemble_input(data.train[i].turns, data.train[i].response, {},
                                      model.limits);
      have_plain[i] = true;
    }
    return fixed_plain[i];
  };

  // Pre-training without PRF terms.
  {
    std::vector<std::vector<std::size_t>> batches;
    std::size_t next = 0;
    for (std::size_t step = 0; step < episode.pretrain_steps; ++step) {
      if (next == batches.size()) {
        batches = shuffled_batches(n, episode.batch_size, rng.data);
        next = 0;
      }
      std::vector<RankerBatchItem> items;
      for (std::size_t idx : batches[next]) items.push_back({&plain_input(idx), data.train[idx].label});
      ++next;
      BatchLog entry;
      entry.batch = step;
      entry.train_loss = ranker_train_step(model, optimizer, items, &rng.dropout);
      log::info("pretrain step {} loss {:.4f}", step, entry.train_loss);
    }
  }

  if (is_rl(mode)) {
    RankerEnvironment env(model, data, optimizer, rng.dropout);
    Reinforce reinforce(env, model.params, episode, rng, options.policy_override);
    for (std::size_t e = 0; e < episode.episodes; ++e) {
      const EpisodeSummary summary = reinforce.run_episode(e);
      double loss = 0.0, rate = 0.0;
      for (const BatchLog& entry : summary.batches) {
        emit(entry);
        loss += entry.train_loss;
        rate += entry.select_rate;
      }
      const double nb = static_cast<double>(summary.batches.size());
      log::info("episode {} train loss {:.4f} select rate {:.3f}", e, loss / nb, rate / nb);
      if (options.on_episode) options.on_episode(summary, reinforce.history());
    }
    return model;
  }

  std::vector<RankerInput> fixed_rule;
  if (mode == SelectionMode::kRule) {
    fixed_rule.reserve(n);
    for (const EncodedExample& ex : data.train) {
      fixed_rule.push_back(
          assemble_selected(ex, rule_actions(ex, config.selector.rule_top_m), model.limits));
    }
  }

  for (std::size_t e = 0; e < episode.episodes; ++e) {
    const auto batches = shuffled_batches(n, episode.batch_size, rng.data);
    double episode_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      BatchLog entry;
      entry.episode = e;
      entry.batch = b;
      if (mode == SelectionMode::kNone || mode == SelectionMode::kRule) {
        std::vector<RankerBatchItem> items;
        std::size_t selected = 0, total = 0;
        for (std::size_t idx : batches[b]) {
          const RankerInput& in = mode == SelectionMode::kRule ? fixed_rule[idx] : plain_input(idx);
          items.push_back({&in, data.train[idx].label});
          total += data.train[idx].terms.size();
          if (mode == SelectionMode::kRule) {
            const ActionVector a = rule_actions(data.train[idx], config.selector.rule_top_m);
            selected += static_cast<std::size_t>(std::count(a.begin(), a.end(), 1));
          }
        }
        entry.train_loss = ranker_train_step(model, optimizer, items, &rng.dropout);
        entry.select_rate = total == 0 ? 0.0 : static_cast<double>(selected) / static_cast<double>(total);
      } else {
        GradStore grads;
        const double weight = 1.0 / static_cast<double>(batches[b].size());
        double gate_sum = 0.0;
        std::size_t total = 0;
        for (std::size_t idx : batches[b]) {
          entry.train_loss += weight * selector_example_loss(model, config.selector,
                                                             data.train[idx], weight, dropout,
                                                             &rng.gumbel, &grads, &gate_sum);
          total += data.train[idx].terms.size();
        }
        optimizer.step(model.params, grads);
        entry.select_rate = total == 0 ? 0.0 : gate_sum / static_cast<double>(total);
      }
      episode_loss += entry.train_loss;
      emit(entry);
    }
    log::info("epoch {} train loss {:.4f}", e,
              episode_loss / static_cast<double>(batches.size()));
  }
  return model;
}

EvalSelection evaluation_selection(const RankerModel& model, const SelectorConfig& selector,
                                   const EncodedExample& ex) {
  EvalSelection out;
  const std::size_t k = ex.terms.size();
  switch (selector.mode) {
    case SelectionMode::kNone:
      out.actions.assign(k, 0);
      out.p_select.assign(k, 0.0);
      break;
    case SelectionMode::kRule:
      out.actions = rule_actions(ex, selector.rule_top_m);
      out.p_select.assign(out.actions.begin(), out.actions.end());
      break;
    case SelectionMode::kRlSample:
    case SelectionMode::kRlGreedy:
    case SelectionMode::kGumbel:
      for (const Vector& s : example_states(model, ex)) {
        const double p = policy_probs(model.params, s)[0];
        out.p_select.push_back(p);
        out.actions.push_back(p >= 0.5 ? 1 : 0);
      }
      break;
    case SelectionMode::kGateTanh:
    case SelectionMode::kGateSigmoid:
      for (const Vector& s : example_states(model, ex)) {
        Vector g = soft_gate(model.params, s, selector.mode);
        out.p_select.push_back(std::accumulate(g.begin(), g.end(), 0.0) /
                               static_cast<double>(g.size()));
        out.actions.push_back(1);
        out.gates.push_back(std::move(g));
      }
      break;
  }
  return out;
}

double score_example(const RankerModel& model, const SelectorConfig& selector,
                     const EncodedExample& ex, EvalSelection* selection) {
  EvalSelection local = evaluation_selection(model, selector, ex);
  double p = 0.0;
  if (is_gate(selector.mode) && !ex.terms.empty()) {
    const RankerInput input = assemble_input(ex.turns, ex.response, ex.terms, model.limits);
    const Matrix gates = token_gates(input, local.gates, local.gates.front().size());
    p = score(model, input, &gates);
  } else {
    p = score(model, assemble_selected(ex, local.actions, model.limits));
  }
  if (selection != nullptr) *selection = std::move(local);
  return p;
}

}  // namespace prfrl
