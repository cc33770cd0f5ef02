#include "prfrl/ranker.h"

#include <algorithm>
#include <cmath>

#include "prfrl/error.h"

namespace prfrl {

void InputLimits::validate() const {
  // [CLS] + context + [SEP] + response + [SEP]
  if (context_budget + response_budget + 3 > max_len) {
    throw InvalidArgument("context and response budgets exceed max_len");
  }
}

RankerInput assemble_input(std::span<const IdList> turns,
                           std::span<const TokenId> response,
                           std::span<const IdList> terms,
                           const InputLimits& limits) {
  limits.validate();
  RankerInput out;
  auto push = [&out](TokenId id, int segment) {
    out.ids.push_back(id);
    out.segments.push_back(segment);
  };

  // Walk back from the newest turn while whole turns fit.
  std::size_t first = turns.size();
  std::size_t used = 0;
  while (first > 0) {
    const std::size_t cost = turns[first - 1].size() + (first < turns.size() ? 1 : 0);
    if (used + cost > limits.context_budget) break;
    used += cost;
    --first;
  }

  push(Vocabulary::kCls, 0);
  if (first == turns.size() && !turns.empty()) {
    const IdList& last = turns.back();
    const std::size_t keep = std::min(last.size(), limits.context_budget);
    for (std::size_t i = last.size() - keep; i < last.size(); ++i) push(last[i], 0);
  } else {
    for (std::size_t t = first; t < turns.size(); ++t) {
      if (t > first) push(Vocabulary::kEot, 0);
      for (TokenId id : turns[t]) push(id, 0);
    }
  }
  push(Vocabulary::kSep, 0);

  const std::size_t keep = std::min(response.size(), limits.response_budget);
  for (std::size_t i = 0; i < keep; ++i) push(response[i], 1);
  push(Vocabulary::kSep, 1);

  bool any = false;
  for (const IdList& term : terms) {
    const std::size_t cost = term.size() + (any ? 1 : 0);
    if (term.empty() || out.ids.size() + cost > limits.max_len) {
      out.term_spans.push_back(std::nullopt);
      continue;
    }
    if (any) push(Vocabulary::kSep, 1);
    TermSpan span{out.ids.size(), out.ids.size() + term.size()};
    for (TokenId id : term) push(id, 1);
    out.term_spans.push_back(span);
    any = true;
  }
  return out;
}

void init_head(ParameterStore& params, std::size_t d) {
  params.add("head.w", 1, d);
  params.add("head.b", 1, 1);
}

double clamp_probability(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

double batch_loss(std::span<const double> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw InvalidArgument("prediction and label counts differ");
  }
  if (preds.empty()) throw InvalidArgument("empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = clamp_probability(preds[i]);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(preds.size());
}

namespace {

double head_logit(const ParameterStore& params, const Vector& cls) {
  const Matrix& w = params.get("head.w");
  double z = params.get("head.b")(0, 0);
  for (std::size_t c = 0; c < cls.size(); ++c) z += w(0, c) * cls[c];
  return z;
}

nn::EncoderInput encoder_input(const RankerInput& input, const Matrix* gates) {
  return nn::EncoderInput{input.ids, input.segments, gates};
}

}  // namespace

double score(const RankerModel& model, const RankerInput& input,
             const Matrix* token_gates) {
  const Vector cls = nn::encoder_forward(model.params, model.encoder,
                                         encoder_input(input, token_gates), {}, nullptr);
  return clamp_probability(nn::sigmoid(head_logit(model.params, cls)));
}

double example_loss_backward(const RankerModel& model, const RankerInput& input,
                             int label, const Matrix* token_gates, double weight,
                             nn::DropoutContext dropout, GradStore& grads,
                             Matrix* d_gates) {
  const nn::EncoderInput enc_in = encoder_input(input, token_gates);
  nn::EncoderTape tape;
  const Vector cls =
      nn::encoder_forward(model.params, model.encoder, enc_in, dropout, &tape);
  const double z = head_logit(model.params, cls);
  const double raw = nn::sigmoid(z);
  const double p = clamp_probability(raw);
  const double loss = label == 1 ? -std::log(p) : -std::log(1.0 - p);
  if (!std::isfinite(loss)) throw NumericalError("non-finite ranker loss");
  // Inside the clamp dL/dz = p - y; the clamped region is flat.
  const double dz = (raw == p) ? weight * (p - static_cast<double>(label)) : 0.0;

  const std::size_t d = model.encoder.d;
  const Matrix& w = model.params.get("head.w");
  Matrix& gw = grads.at("head.w", 1, d);
  grads.at("head.b", 1, 1)(0, 0) += dz;
  Vector d_cls(d);
  for (std::size_t c = 0; c < d; ++c) {
    gw(0, c) += dz * cls[c];
    d_cls[c] = dz * w(0, c);
  }
  Matrix local_gates;
  nn::encoder_backward(model.params, model.encoder, enc_in, tape, d_cls, grads,
                       d_gates != nullptr ? &local_gates : nullptr);
  if (d_gates != nullptr) *d_gates = std::move(local_gates);
  return loss;
}

double ranker_train_step(RankerModel& model, Optimizer& optimizer,
                         std::span<const RankerBatchItem> batch,
                         std::mt19937_64* dropout_rng) {
  if (batch.empty()) throw InvalidArgument("empty training batch");
  GradStore grads;
  const double weight = 1.0 / static_cast<double>(batch.size());
  nn::DropoutContext dropout{model.encoder.dropout, dropout_rng};
  double total = 0.0;
  for (const RankerBatchItem& item : batch) {
    total += example_loss_backward(model, *item.input, item.label, nullptr, weight,
                                   dropout, grads, nullptr);
  }
  optimizer.step(model.params, grads);
  return total * weight;
}

}  // namespace prfrl
