#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prfrl/config.h"
#include "prfrl/gradcheck.h"

namespace prfrl {

struct GradSuiteCase {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

// Finite-difference checks of every hand-written gradient on random small
// instances shaped by `config.encoder`: the ranker loss, the policy
// log-probability, and both soft-gate paths (gate, state and embeddings).
// Dropout is disabled.
std::vector<GradSuiteCase> run_gradient_suite(const RunConfig& config, std::size_t sample,
                                              std::uint64_t seed);

}  // namespace prfrl
