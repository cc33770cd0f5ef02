#pragma once

// End-to-end steps shared by the command line tool and the tests.

#include <filesystem>
#include <optional>
#include <vector>

#include "prfrl/config.h"
#include "prfrl/dataset.h"
#include "prfrl/metrics.h"
#include "prfrl/retrieval.h"
#include "prfrl/selector.h"
#include "prfrl/trainer.h"

namespace prfrl {

Tokenizer make_ranker_tokenizer(const RunConfig& config);
Tokenizer make_retrieval_tokenizer(const RunConfig& config);

InvertedIndex build_index_from_corpus(const std::filesystem::path& corpus,
                                      const RunConfig& config);

// Vocabulary over the training split: context, response and PRF term tokens.
Vocabulary build_model_vocab(const Dataset& dataset, const RunConfig& config,
                             const Tokenizer& tokenizer);

std::vector<EncodedExample> encode_split(const Dataset& dataset, Split split,
                                         const Vocabulary& vocab,
                                         const Tokenizer& tokenizer);

struct TrainedModel {
  RunConfig config;
  Vocabulary vocab;
  RankerModel model;
};

// Trains on an expanded dataset (PRF terms are required unless the mode is
// "none").
TrainedModel train_pipeline(const Dataset& dataset, const RunConfig& config,
                            const TrainOptions& options = {});

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

struct Evaluation {
  MetricsReport report;
  std::vector<SelectionRecord> selections;
};

Evaluation evaluate_model(const TrainedModel& model, const Dataset& dataset, Split split,
                          std::optional<SelectionMode> mode = std::nullopt);

// Selection modes of the comparison table, in row order.
const std::vector<SelectionMode>& comparison_modes();

}  // namespace prfrl
