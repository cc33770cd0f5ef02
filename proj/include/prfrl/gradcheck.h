#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prfrl/tensor.h"

namespace prfrl {

struct GradCheckOptions {
  std::size_t sample = 100;
  double eps = 1e-6;
  // Denominator floor of the relative error.
  double floor = 1e-6;
  std::uint64_t seed = 0;
  // Restrict sampling to these tensors; empty means every tensor with a
  // gradient.
  std::vector<std::string> tensors;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

using LossFn = std::function<double(const ParameterStore&)>;

// Compares `analytic` against central differences of `loss` at `sample`
// coordinates drawn uniformly (with a preference for coordinates whose
// analytic gradient is non-zero). `params` is restored before returning.
GradCheckResult grad_check(const LossFn& loss, ParameterStore& params,
                           const GradStore& analytic,
                           const GradCheckOptions& options);

}  // namespace prfrl
