#include "prfrl/gradsuite.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "prfrl/ranker.h"
#include "prfrl/selector.h"
#include "prfrl/trainer.h"

namespace prfrl {
namespace {

constexpr std::size_t kVocab = 40;

void perturb(ParameterStore& params, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& [name, m] : params.tensors) {
    for (double& v : m.values()) v += n(rng);
  }
  if (params.contains(nn::kTokenEmbedding)) {
    for (double& v : params.get(nn::kTokenEmbedding).row(Vocabulary::kPad)) v = 0.0;
  }
}

IdList random_ids(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi);
  std::uniform_int_distribution<TokenId> id(static_cast<TokenId>(Vocabulary::kNumReserved),
                                            static_cast<TokenId>(kVocab - 1));
  IdList out(len(rng));
  for (TokenId& t : out) t = id(rng);
  return out;
}

EncodedExample random_example(std::mt19937_64& rng, int label) {
  EncodedExample ex;
  ex.turns = {random_ids(rng, 2, 4), random_ids(rng, 2, 4)};
  ex.response = random_ids(rng, 2, 4);
  for (int i = 0; i < 3; ++i) {
    ex.terms.push_back(random_ids(rng, 1, 2));
    ex.term_strings.push_back("t" + std::to_string(i));
  }
  ex.label = label;
  return ex;
}

double ranker_loss(const RankerModel& model, const std::vector<EncodedExample>& batch,
                   const std::vector<RankerInput>& inputs) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = score(model, inputs[i]);
    total += batch[i].label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

std::vector<GradSuiteCase> run_gradient_suite(const RunConfig& config, std::size_t sample,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelConfig mc = config.model_config(kVocab);
  mc.encoder.dropout = 0.0;
  GradCheckOptions opt;
  opt.sample = sample;
  opt.eps = 1e-5;
  opt.seed = seed;
  std::vector<GradSuiteCase> cases;
  auto record = [&](const std::string& name, const GradCheckResult& r) {
    cases.push_back({name, r.entries.size(), r.max_rel_error});
  };

  const std::vector<EncodedExample> batch = {random_example(rng, 1), random_example(rng, 0)};

  {
    RankerModel model = init_model(mc, rng);
    perturb(model.params, rng, 0.3);
    std::vector<RankerInput> inputs;
    for (const EncodedExample& ex : batch) {
      inputs.push_back(assemble_input(ex.turns, ex.response, ex.terms, model.limits));
    }
    GradStore grads;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      example_loss_backward(model, inputs[i], batch[i].label, nullptr, 0.5, {}, grads, nullptr);
    }
    auto loss = [&](const ParameterStore& p) {
      RankerModel m{model.encoder, model.limits, p};
      return ranker_loss(m, batch, inputs);
    };
    record("ranker loss", grad_check(loss, model.params, grads, opt));
  }

  {
    ParameterStore policy;
    init_policy(policy, mc.encoder.d);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& [name, m] : policy.tensors) {
      for (double& v : m.values()) v = n(rng);
    }
    std::vector<Vector> states(sample / 2 + 1, Vector(mc.encoder.d));
    std::vector<int> actions;
    std::bernoulli_distribution coin(0.5);
    for (Vector& s : states) {
      for (double& v : s) v = n(rng);
      actions.push_back(coin(rng) ? 1 : 0);
    }
    GradStore grads;
    for (std::size_t i = 0; i < states.size(); ++i) {
      log_prob_backward(policy, states[i], actions[i], 1.0, grads);
    }
    auto loss = [&](const ParameterStore& p) {
      double total = 0.0;
      for (std::size_t i = 0; i < states.size(); ++i) {
        total += std::log(policy_probs(p, states[i])[actions[i] == 1 ? 0 : 1]);
      }
      return total;
    };
    record("policy log-probability", grad_check(loss, policy, grads, opt));
  }

  for (SelectionMode mode : {SelectionMode::kGateTanh, SelectionMode::kGateSigmoid}) {
    ModelConfig gc = mc;
    gc.selector.mode = mode;
    RankerModel model = init_model(gc, rng);
    perturb(model.params, rng, 0.3);
    GradStore grads;
    for (const EncodedExample& ex : batch) {
      selector_example_loss(model, gc.selector, ex, 0.5, {}, nullptr, &grads);
    }
    auto loss = [&](const ParameterStore& p) {
      RankerModel m{model.encoder, model.limits, p};
      double total = 0.0;
      for (const EncodedExample& ex : batch) {
        total += 0.5 * selector_example_loss(m, gc.selector, ex, 0.5, {}, nullptr, nullptr);
      }
      return total;
    };
    // Every gate coordinate plus a sample of the token table, which receives
    // gradient both through the ranker and through the selector state.
    GradCheckOptions gate_opt = opt;
    gate_opt.sample = model.params.get(kGateW).size() + model.params.get(kGateB).size();
    gate_opt.tensors = {kGateW, kGateB};
    const GradCheckResult gate = grad_check(loss, model.params, grads, gate_opt);
    GradCheckOptions emb_opt = opt;
    emb_opt.tensors = {nn::kTokenEmbedding};
    const GradCheckResult emb = grad_check(loss, model.params, grads, emb_opt);
    cases.push_back({std::string(selection_mode_name(mode)) + " path",
                     gate.entries.size() + emb.entries.size(),
                     std::max(gate.max_rel_error, emb.max_rel_error)});
  }
  return cases;
}

}  // namespace prfrl
