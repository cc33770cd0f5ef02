#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "prfrl/tensor.h"

namespace prfrl {

enum class OptimizerAlgorithm { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerAlgorithm algorithm = OptimizerAlgorithm::kAdam;
  double learning_rate = 1e-3;
  bool linear_decay = false;
  std::uint64_t total_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  // Learning rate after `steps_taken` updates.
  double rate_at(std::uint64_t steps_taken) const;
};

// Adam (or plain SGD) over the parameters named in the gradient store.
// Moments are kept per tensor name; tensors without a gradient are left
// untouched.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Descends along `grads`. Throws NumericalError("non-finite gradient")
  // before touching any parameter. `ascend` flips the sign.
  void step(ParameterStore& params, const GradStore& grads, bool ascend = false);

  std::uint64_t steps_taken() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };

  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace prfrl
