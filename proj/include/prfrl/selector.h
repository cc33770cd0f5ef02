#pragma once

// PRF term selection: selector states, the two-way policy network, the
// learned gates and the Gumbel-softmax relaxation.

#include <array>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prfrl/dataset.h"
#include "prfrl/nn.h"
#include "prfrl/ranker.h"
#include "prfrl/tensor.h"

namespace prfrl {

inline constexpr const char* kPolicyW = "policy.w";  // d x 2, column 0 = select
inline constexpr const char* kPolicyB = "policy.b";  // 1 x 2
inline constexpr const char* kGateW = "gate.w";      // out x d
inline constexpr const char* kGateB = "gate.b";      // 1 x out

enum class SelectionMode {
  kNone,
  kRlSample,
  kRlGreedy,
  kRule,
  kGateTanh,
  kGateSigmoid,
  kGumbel,
};

SelectionMode parse_selection_mode(std::string_view name);
std::string_view selection_mode_name(SelectionMode mode);

struct SelectorConfig {
  SelectionMode mode = SelectionMode::kRlSample;
  double temperature = 1.0;
  // Terms kept by the rule baseline; negative keeps every term.
  long rule_top_m = -1;
  // One gate per embedding coordinate instead of a single scalar.
  bool elementwise_gate = false;

  void validate() const;
};

// State of one term plus what its backward pass needs.
struct TermState {
  Vector s;  // h + h'
  Vector h;
  std::vector<std::size_t> argmax;
  nn::AttentionPool attended;
};

struct SelectorState {
  std::vector<TermState> terms;
  std::vector<Vector> response;  // response token embeddings
};

// h_i = max_pool(embed(term_i)), h_i' = attention_pool(h_i, embed(response)),
// s_i = h_i + h_i'.
SelectorState state_of(std::span<const TokenId> response_ids,
                       std::span<const IdList> term_ids, const Matrix& table);

// Accumulates the token-table gradient given d(s_i) for every term.
void state_backward(std::span<const TokenId> response_ids,
                    std::span<const IdList> term_ids, const SelectorState& state,
                    std::span<const Vector> d_states, Matrix& d_table);

void init_policy(ParameterStore& params, std::size_t d);
void init_gate(ParameterStore& params, std::size_t d, bool elementwise);

// Policy logits (select, drop).
std::array<double, 2> policy_logits(const ParameterStore& params,
                                    std::span<const double> s);
// (p_select, p_drop)
std::array<double, 2> policy_probs(const ParameterStore& params,
                                   std::span<const double> s);

using ActionVector = std::vector<int>;

// rl_sample draws Bernoulli(p_select); rl_greedy selects iff p_select >= 0.5;
// gumbel keeps the hard straight-through decision.
ActionVector select_actions(const ParameterStore& params,
                            std::span<const TermState> states,
                            const SelectorConfig& config, std::mt19937_64& rng);

std::vector<std::string> apply_selection(std::span<const std::string> terms,
                                         std::span<const int> actions);
std::vector<IdList> apply_selection(std::span<const IdList> terms,
                                    std::span<const int> actions);

std::vector<std::string> rule_select(std::span<const std::string> terms, long top_m);

// Accumulates d log pi(action | s) into the policy gradient, scaled by
// `weight`. Returns log pi(action | s).
double log_prob_backward(const ParameterStore& params, std::span<const double> s,
                         int action, double weight, GradStore& grads);

// g = tanh(w_g s + b_g) or sigmoid(w_g s + b_g), one value per gate row.
Vector soft_gate(const ParameterStore& params, std::span<const double> s,
                 SelectionMode mode);

// Given dL/dg, accumulates gate parameter gradients and returns dL/ds.
Vector soft_gate_backward(const ParameterStore& params, std::span<const double> s,
                          SelectionMode mode, std::span<const double> d_gate,
                          GradStore& grads);

struct GumbelSample {
  int action = 0;              // 1 = select
  std::array<double, 2> relaxed{};  // softmax((logit + G) / tau)
  std::array<double, 2> noise{};
};

GumbelSample gumbel_select(const ParameterStore& params, std::span<const double> s,
                           double temperature, std::mt19937_64& rng);

// Straight-through backward: given dL/d(hard select indicator), accumulates
// policy gradients through relaxed[0] and returns dL/ds.
Vector gumbel_backward(const ParameterStore& params, std::span<const double> s,
                       const GumbelSample& sample, double temperature,
                       double d_select, GradStore& grads);

// Expands per-term gate values into a per-position token gate matrix for an
// assembled input (1 outside term positions).
Matrix token_gates(const RankerInput& input, std::span<const Vector> term_gates,
                   std::size_t width);

struct SelectionRecord {
  std::string candidate_id;
  std::vector<std::string> terms;
  ActionVector actions;
  std::vector<double> p_select;
};

void write_selection_jsonl(std::span<const SelectionRecord> records,
                           std::ostream& out);

}  // namespace prfrl
