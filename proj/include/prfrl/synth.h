#pragma once

// Synthetic dialog task with a known split between helpful and noisy PRF
// terms. Each context mentions a few topic words among generic filler;
// responses carry no label signal of their own. Each response's feedback
// post holds its terms: the topic words of its context (positives) or of
// other contexts (negatives), plus generic noise words. Noise is
// label-independent unless noise_bias ties it to the label in training.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace prfrl {

struct SynthConfig {
  std::size_t contexts = 500;
  std::size_t candidates = 10;
  double noise_ratio = 0.5;
  std::size_t terms = 4;
  std::size_t topics = 12;
  std::size_t topics_per_context = 2;
  std::size_t generic_words = 24;
  std::size_t filler_words = 150;
  // Chance that a training-split noise term comes from the half of the
  // generic words tied to the example's label. Validation and test noise is
  // always label-independent, so a positive bias makes noise terms look
  // predictive during training only.
  double noise_bias = 0.0;
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthRecord {
  std::string context_id;
  std::string candidate_id;
  std::vector<std::string> context;
  std::string response;
  int label = 0;
  std::string split;
  std::vector<std::string> prf_terms;
  // Which terms are the label-predictive ones (not written to files).
  std::vector<bool> helpful;
};

struct SynthPost {
  std::int64_t doc_id = 0;
  std::string text;
};

struct SynthTask {
  std::vector<SynthRecord> records;
  std::vector<SynthPost> corpus;
};

// The feedback terms of each record are the ones BM25 retrieval over the
// generated corpus returns with prf.k2 = config.terms.
SynthTask generate_synth(const SynthConfig& config);

void write_synth_dataset(const SynthTask& task, std::ostream& out);
void write_synth_corpus(const SynthTask& task, std::ostream& out);

bool is_noise_term(const std::string& term);

}  // namespace prfrl
