#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prfrl/nn.h"
#include "prfrl/ranker.h"
#include "prfrl/retrieval.h"
#include "prfrl/selector.h"
#include "prfrl/text.h"
#include "prfrl/trainer.h"

namespace prfrl {

// Every tunable of a run. Serialised as flat `key = value` lines.
struct RunConfig {
  std::uint64_t seed = 0;
  TokenizerConfig tokenizer;
  // "english", "none", or a stopword file for the retrieval tokenizer.
  std::string retrieval_stopwords = "english";
  Bm25Params bm25;
  PrfConfig prf;
  nn::EncoderConfig encoder;
  InputLimits limits;
  std::size_t vocab_min_freq = 1;
  std::size_t vocab_max_size = 30000;
  EpisodeConfig train;
  SelectorConfig selector;

  // Applies one `key = value` assignment. Throws InvalidArgument for unknown
  // keys or malformed values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  static RunConfig parse(std::string_view text, std::string_view source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;
  ModelConfig model_config(std::size_t vocab_size) const;
};

// Parses "key=value" (used by repeated --set flags).
std::pair<std::string, std::string> split_assignment(std::string_view text);

}  // namespace prfrl
