#include "prfrl/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "prfrl/error.h"

namespace prfrl {
namespace {

struct Coordinate {
  std::string tensor;
  std::size_t index;
};

double checked(double v) {
  if (!std::isfinite(v)) throw NumericalError("non-finite loss during gradient check");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossFn& loss, ParameterStore& params,
                           const GradStore& analytic,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw InvalidArgument("gradient check eps must be positive");
  std::vector<Coordinate> nonzero;
  std::vector<Coordinate> zero;
  for (const auto& [name, grad] : analytic.tensors()) {
    if (!options.tensors.empty() &&
        std::find(options.tensors.begin(), options.tensors.end(), name) ==
            options.tensors.end()) {
      continue;
    }
    if (!params.contains(name)) throw InvalidArgument("gradient for unknown tensor " + name);
    auto g = grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      (g[i] != 0.0 ? nonzero : zero).push_back({name, i});
    }
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(nonzero.begin(), nonzero.end(), rng);
  std::shuffle(zero.begin(), zero.end(), rng);
  std::vector<Coordinate> picked(nonzero.begin(),
                                 nonzero.begin() + std::min(options.sample, nonzero.size()));
  for (std::size_t i = 0; picked.size() < options.sample && i < zero.size(); ++i) {
    picked.push_back(zero[i]);
  }

  GradCheckResult result;
  checked(loss(params));
  for (const Coordinate& c : picked) {
    double& theta = params.get(c.tensor).values()[c.index];
    const double saved = theta;
    theta = saved + options.eps;
    const double up = checked(loss(params));
    theta = saved - options.eps;
    const double down = checked(loss(params));
    theta = saved;
    GradCheckEntry e;
    e.tensor = c.tensor;
    e.index = c.index;
    e.analytic = analytic.find(c.tensor)->values()[c.index];
    e.numeric = (up - down) / (2.0 * options.eps);
    e.rel_error = std::abs(e.analytic - e.numeric) /
                  std::max({std::abs(e.analytic), std::abs(e.numeric), options.floor});
    result.max_rel_error = std::max(result.max_rel_error, e.rel_error);
    result.entries.push_back(std::move(e));
  }
  return result;
}

}  // namespace prfrl
