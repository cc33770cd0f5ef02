#include "prfrl/optim.h"

#include <algorithm>
#include <cmath>

#include "prfrl/error.h"

namespace prfrl {

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be finite and non-negative");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || epsilon <= 0.0) {
    throw InvalidArgument("invalid Adam hyper-parameters");
  }
}

double OptimizerConfig::rate_at(std::uint64_t steps_taken) const {
  if (!linear_decay || total_steps == 0) return learning_rate;
  const double frac = static_cast<double>(steps_taken) / static_cast<double>(total_steps);
  return learning_rate * std::max(0.0, 1.0 - frac);
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

void Optimizer::step(ParameterStore& params, const GradStore& grads, bool ascend) {
  if (!grads.all_finite()) throw NumericalError("non-finite gradient");
  for (const auto& [name, grad] : grads.tensors()) {
    const Matrix& p = params.get(name);
    if (p.rows() != grad.rows() || p.cols() != grad.cols()) {
      throw InvalidArgument("gradient shape mismatch for " + name);
    }
  }
  const double lr = config_.rate_at(steps_);
  ++steps_;
  ++params.step;
  const double sign = ascend ? -1.0 : 1.0;
  if (config_.algorithm == OptimizerAlgorithm::kSgd) {
    for (const auto& [name, grad] : grads.tensors()) {
      auto p = params.get(name).values();
      auto g = grad.values();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * sign * g[i];
    }
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (const auto& [name, grad] : grads.tensors()) {
    Matrix& param = params.get(name);
    Moments& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m = Matrix(param.rows(), param.cols());
      mo.v = Matrix(param.rows(), param.cols());
    }
    auto p = param.values();
    auto g = grad.values();
    auto m = mo.m.values();
    auto v = mo.v.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = sign * g[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

}  // namespace prfrl
