#include "prfrl/selector.h"

#include <cmath>
#include <limits>

#include "json.hpp"

#include "prfrl/error.h"
#include "prfrl/kernels.h"

namespace prfrl {
namespace {

struct ModeName {
  SelectionMode mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {SelectionMode::kNone, "none"},
    {SelectionMode::kRlSample, "rl_sample"},
    {SelectionMode::kRlGreedy, "rl_greedy"},
    {SelectionMode::kRule, "rule"},
    {SelectionMode::kGateTanh, "gate_tanh"},
    {SelectionMode::kGateSigmoid, "gate_sigmoid"},
    {SelectionMode::kGumbel, "gumbel"},
};

double gate_activation(double x, SelectionMode mode) {
  return mode == SelectionMode::kGateTanh ? std::tanh(x) : nn::sigmoid(x);
}

double gate_derivative(double g, SelectionMode mode) {
  return mode == SelectionMode::kGateTanh ? 1.0 - g * g : g * (1.0 - g);
}

void check_dim(const ParameterStore& params, std::span<const double> s) {
  if (params.get(kPolicyW).rows() != s.size()) {
    throw InvalidArgument("selector state dimension mismatch");
  }
}

double standard_gumbel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  return -std::log(-std::log(u(rng)));
}

}  // namespace

SelectionMode parse_selection_mode(std::string_view name) {
  for (const ModeName& m : kModeNames) {
    if (m.name == name) return m.mode;
  }
  if (name == "rl") return SelectionMode::kRlSample;
  throw InvalidArgument("unknown selection mode: " + std::string(name));
}

std::string_view selection_mode_name(SelectionMode mode) {
  for (const ModeName& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "unknown";
}

void SelectorConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidArgument("gumbel temperature must be positive");
}

SelectorState state_of(std::span<const TokenId> response_ids,
                       std::span<const IdList> term_ids, const Matrix& table) {
  if (response_ids.empty()) throw InvalidArgument("selector state needs a response");
  SelectorState state;
  state.response = nn::embed(response_ids, table);
  state.terms.reserve(term_ids.size());
  for (const IdList& term : term_ids) {
    if (term.empty()) throw InvalidArgument("empty PRF term");
    TermState ts;
    const std::vector<Vector> emb = nn::embed(term, table);
    ts.h = nn::max_pool(emb, &ts.argmax);
    ts.attended = nn::attention_pool(ts.h, state.response);
    ts.s = ts.h;
    kernels::axpy(ts.s.size(), 1.0, ts.attended.output.data(), ts.s.data());
    state.terms.push_back(std::move(ts));
  }
  return state;
}

void state_backward(std::span<const TokenId> response_ids,
                    std::span<const IdList> term_ids, const SelectorState& state,
                    std::span<const Vector> d_states, Matrix& d_table) {
  const std::size_t d = d_table.cols();
  for (std::size_t i = 0; i < term_ids.size(); ++i) {
    const TermState& ts = state.terms[i];
    Vector d_h = d_states[i];
    std::vector<Vector> d_keys;
    nn::attention_pool_backward(ts.h, state.response, ts.attended, d_states[i], d_h,
                                d_keys);
    for (std::size_t j = 0; j < response_ids.size(); ++j) {
      if (response_ids[j] == Vocabulary::kPad) continue;
      kernels::axpy(d, 1.0, d_keys[j].data(),
                    d_table.row(static_cast<std::size_t>(response_ids[j])).data());
    }
    for (std::size_t c = 0; c < d; ++c) {
      const TokenId id = term_ids[i][ts.argmax[c]];
      if (id == Vocabulary::kPad) continue;
      d_table(static_cast<std::size_t>(id), c) += d_h[c];
    }
  }
}

void init_policy(ParameterStore& params, std::size_t d) {
  params.add(kPolicyW, d, 2);
  params.add(kPolicyB, 1, 2);
}

void init_gate(ParameterStore& params, std::size_t d, bool elementwise) {
  const std::size_t out = elementwise ? d : 1;
  params.add(kGateW, out, d);
  params.add(kGateB, 1, out);
}

std::array<double, 2> policy_logits(const ParameterStore& params,
                                    std::span<const double> s) {
  check_dim(params, s);
  const Matrix& w = params.get(kPolicyW);
  const Matrix& b = params.get(kPolicyB);
  std::array<double, 2> z{b(0, 0), b(0, 1)};
  for (std::size_t r = 0; r < s.size(); ++r) {
    z[0] += w(r, 0) * s[r];
    z[1] += w(r, 1) * s[r];
  }
  return z;
}

std::array<double, 2> policy_probs(const ParameterStore& params,
                                   std::span<const double> s) {
  const auto z = policy_logits(params, s);
  const Vector p = nn::softmax(z);
  return {p[0], p[1]};
}

ActionVector select_actions(const ParameterStore& params,
                            std::span<const TermState> states,
                            const SelectorConfig& config, std::mt19937_64& rng) {
  ActionVector actions;
  actions.reserve(states.size());
  for (const TermState& ts : states) {
    switch (config.mode) {
      case SelectionMode::kRlSample: {
        std::bernoulli_distribution draw(policy_probs(params, ts.s)[0]);
        actions.push_back(draw(rng) ? 1 : 0);
        break;
      }
      case SelectionMode::kGumbel:
        actions.push_back(gumbel_select(params, ts.s, config.temperature, rng).action);
        break;
      case SelectionMode::kNone:
        actions.push_back(0);
        break;
      case SelectionMode::kRule:
      case SelectionMode::kGateTanh:
      case SelectionMode::kGateSigmoid:
        actions.push_back(1);
        break;
      case SelectionMode::kRlGreedy:
        actions.push_back(policy_probs(params, ts.s)[0] >= 0.5 ? 1 : 0);
        break;
    }
  }
  return actions;
}

template <typename T>
static std::vector<T> filter_selected(std::span<const T> items, std::span<const int> actions) {
  if (items.size() != actions.size()) {
    throw InvalidArgument("action count does not match term count");
  }
  std::vector<T> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (actions[i] == 1) out.push_back(items[i]);
  }
  return out;
}

std::vector<std::string> apply_selection(std::span<const std::string> terms,
                                         std::span<const int> actions) {
  return filter_selected(terms, actions);
}

std::vector<IdList> apply_selection(std::span<const IdList> terms,
                                    std::span<const int> actions) {
  return filter_selected(terms, actions);
}

std::vector<std::string> rule_select(std::span<const std::string> terms, long top_m) {
  const std::size_t keep =
      top_m < 0 ? terms.size() : std::min(terms.size(), static_cast<std::size_t>(top_m));
  return {terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(keep)};
}

double log_prob_backward(const ParameterStore& params, std::span<const double> s,
                         int action, double weight, GradStore& grads) {
  const auto p = policy_probs(params, s);
  const std::size_t chosen = action == 1 ? 0 : 1;
  // d log softmax_chosen / dz_j = [j == chosen] - p_j
  const std::array<double, 2> dz{weight * ((chosen == 0 ? 1.0 : 0.0) - p[0]),
                                 weight * ((chosen == 1 ? 1.0 : 0.0) - p[1])};
  Matrix& gw = grads.at(kPolicyW, s.size(), 2);
  Matrix& gb = grads.at(kPolicyB, 1, 2);
  for (std::size_t r = 0; r < s.size(); ++r) {
    gw(r, 0) += dz[0] * s[r];
    gw(r, 1) += dz[1] * s[r];
  }
  gb(0, 0) += dz[0];
  gb(0, 1) += dz[1];
  return std::log(p[chosen]);
}

Vector soft_gate(const ParameterStore& params, std::span<const double> s,
                 SelectionMode mode) {
  const Matrix& w = params.get(kGateW);
  const Matrix& b = params.get(kGateB);
  if (w.cols() != s.size()) throw InvalidArgument("gate dimension mismatch");
  Vector g(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    g[r] = gate_activation(b(0, r) + kernels::dot(s.size(), w.row(r).data(), s.data()), mode);
  }
  return g;
}

Vector soft_gate_backward(const ParameterStore& params, std::span<const double> s,
                          SelectionMode mode, std::span<const double> d_gate,
                          GradStore& grads) {
  const Matrix& w = params.get(kGateW);
  const Vector g = soft_gate(params, s, mode);
  Matrix& gw = grads.at(kGateW, w.rows(), w.cols());
  Matrix& gb = grads.at(kGateB, 1, w.rows());
  Vector d_s(s.size(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double dz = d_gate[r] * gate_derivative(g[r], mode);
    gb(0, r) += dz;
    kernels::axpy(s.size(), dz, s.data(), gw.row(r).data());
    kernels::axpy(s.size(), dz, w.row(r).data(), d_s.data());
  }
  return d_s;
}

GumbelSample gumbel_select(const ParameterStore& params, std::span<const double> s,
                           double temperature, std::mt19937_64& rng) {
  if (!(temperature > 0.0)) throw InvalidArgument("gumbel temperature must be positive");
  const auto z = policy_logits(params, s);
  GumbelSample out;
  out.noise = {standard_gumbel(rng), standard_gumbel(rng)};
  const std::array<double, 2> u{(z[0] + out.noise[0]) / temperature,
                                (z[1] + out.noise[1]) / temperature};
  const Vector y = nn::softmax(u);
  out.relaxed = {y[0], y[1]};
  out.action = y[0] >= y[1] ? 1 : 0;
  return out;
}

Vector gumbel_backward(const ParameterStore& params, std::span<const double> s,
                       const GumbelSample& sample, double temperature,
                       double d_select, GradStore& grads) {
  // d y0 / d z_j = y0 ([j == 0] - y_j) / tau
  const double y0 = sample.relaxed[0];
  const std::array<double, 2> dz{d_select * y0 * (1.0 - y0) / temperature,
                                 -d_select * y0 * sample.relaxed[1] / temperature};
  const Matrix& w = params.get(kPolicyW);
  Matrix& gw = grads.at(kPolicyW, s.size(), 2);
  Matrix& gb = grads.at(kPolicyB, 1, 2);
  Vector d_s(s.size());
  for (std::size_t r = 0; r < s.size(); ++r) {
    gw(r, 0) += dz[0] * s[r];
    gw(r, 1) += dz[1] * s[r];
    d_s[r] = dz[0] * w(r, 0) + dz[1] * w(r, 1);
  }
  gb(0, 0) += dz[0];
  gb(0, 1) += dz[1];
  return d_s;
}

Matrix token_gates(const RankerInput& input, std::span<const Vector> term_gates,
                   std::size_t width) {
  if (term_gates.size() != input.term_spans.size()) {
    throw InvalidArgument("gate count does not match term count");
  }
  Matrix gates(input.length(), width, 1.0);
  for (std::size_t i = 0; i < term_gates.size(); ++i) {
    const auto& span = input.term_spans[i];
    if (!span) continue;
    if (term_gates[i].size() != width) throw InvalidArgument("gate width mismatch");
    for (std::size_t t = span->begin; t < span->end; ++t) {
      std::copy(term_gates[i].begin(), term_gates[i].end(), gates.row(t).begin());
    }
  }
  return gates;
}

void write_selection_jsonl(std::span<const SelectionRecord> records,
                           std::ostream& out) {
  for (const SelectionRecord& r : records) {
    nlohmann::json j;
    j["candidate_id"] = r.candidate_id;
    j["terms"] = r.terms;
    j["actions"] = r.actions;
    j["p_select"] = r.p_select;
    out << j.dump() << '\n';
  }
}

}  // namespace prfrl
