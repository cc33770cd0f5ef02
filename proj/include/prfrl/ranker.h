#pragma once

// Response ranker: input assembly, sigmoid head over T_[CLS], and the
// pointwise cross-entropy objective.

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prfrl/nn.h"
#include "prfrl/optim.h"
#include "prfrl/tensor.h"
#include "prfrl/text.h"

namespace prfrl {

inline constexpr double kProbClamp = 1e-7;

struct InputLimits {
  std::size_t context_budget = 96;
  std::size_t response_budget = 32;
  std::size_t max_len = 256;

  void validate() const;
};

// One labelled example mapped to vocabulary ids.
struct EncodedExample {
  std::string context_id;
  std::string candidate_id;
  std::vector<IdList> turns;
  IdList response;
  std::vector<std::string> term_strings;
  std::vector<IdList> terms;
  int label = 0;
};

struct TermSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// [CLS] u1 [EOT] u2 ... um [SEP] r [SEP] p1 [SEP] p2 ... pk
struct RankerInput {
  IdList ids;
  std::vector<int> segments;
  // Position range of each term of the request, or nullopt when the term
  // did not fit.
  std::vector<std::optional<TermSpan>> term_spans;

  std::size_t length() const { return ids.size(); }
};

// Context keeps the most recent whole turns that fit its budget (the tail of
// the newest turn when even that one is too long); the response is cut at
// its budget; terms that do not fit in max_len are dropped whole.
RankerInput assemble_input(std::span<const IdList> turns,
                           std::span<const TokenId> response,
                           std::span<const IdList> terms,
                           const InputLimits& limits);

struct RankerModel {
  nn::EncoderConfig encoder;
  InputLimits limits;
  ParameterStore params;
};

// Adds the head tensors ("head.w" 1 x d, "head.b" 1 x 1), zero-initialised.
void init_head(ParameterStore& params, std::size_t d);

double clamp_probability(double p);

// Mean of -[y ln p + (1 - y) ln(1 - p)].
double batch_loss(std::span<const double> preds, std::span<const int> labels);

// Evaluation-mode score in (0, 1).
double score(const RankerModel& model, const RankerInput& input,
             const Matrix* token_gates = nullptr);

// Forward and backward for one example. Accumulates weight * dLoss/dtheta
// into `grads` and, when gates are given, weight * dLoss/dgate into
// `d_gates`. Returns the example loss.
double example_loss_backward(const RankerModel& model, const RankerInput& input,
                             int label, const Matrix* token_gates, double weight,
                             nn::DropoutContext dropout, GradStore& grads,
                             Matrix* d_gates);

struct RankerBatchItem {
  const RankerInput* input = nullptr;
  int label = 0;
};

// One optimizer step on the batch-mean loss. Returns the loss measured
// during the step, before parameters change.
double ranker_train_step(RankerModel& model, Optimizer& optimizer,
                         std::span<const RankerBatchItem> batch,
                         std::mt19937_64* dropout_rng);

}  // namespace prfrl
