#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prfrl/dataset.h"
#include "prfrl/text.h"

namespace prfrl {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::int64_t doc_id;
  std::uint32_t tf;
};

// BM25 index over the external post corpus. Keeps a forward index so the
// tokens of retrieved posts are available for feedback term extraction.
class InvertedIndex {
 public:
  static InvertedIndex build(std::span<const ExternalPost> posts,
                             Bm25Params params = {});

  const Bm25Params& params() const { return params_; }
  std::size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  std::size_t term_count() const { return terms_.size(); }

  bool has_doc(std::int64_t doc_id) const;
  std::uint32_t doc_length(std::int64_t doc_id) const;
  TokenList doc_tokens(std::int64_t doc_id) const;
  const std::vector<std::int64_t>& doc_ids() const { return doc_ids_; }

  std::size_t df(const std::string& term) const;
  // ln(1 + (N - df + 0.5) / (df + 0.5)); zero for unknown terms.
  double idf(const std::string& term) const;
  // Sorted by doc_id; empty for unknown terms.
  std::span<const Posting> postings(const std::string& term) const;

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

 private:
  friend double bm25_score(const InvertedIndex&, std::span<const std::string>,
                           std::int64_t);
  friend std::vector<std::pair<std::int64_t, double>> retrieve_top_k(
      const InvertedIndex&, std::span<const std::string>, std::size_t);

  static InvertedIndex from_forward(Bm25Params params,
                                    std::vector<std::string> terms,
                                    std::vector<std::int64_t> doc_ids,
                                    std::vector<std::vector<std::uint32_t>> docs);
  std::size_t doc_slot(std::int64_t doc_id) const;

  Bm25Params params_;
  std::vector<std::string> terms_;  // sorted
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<std::int64_t> doc_ids_;  // sorted
  std::vector<std::vector<std::uint32_t>> docs_;  // term ids per doc slot
  std::vector<std::vector<Posting>> postings_;  // per term id
  double avg_doc_length_ = 0.0;
};

// Sum over distinct query terms of idf * tf * (k1 + 1) /
// (tf + k1 * (1 - b + b * dl / avgdl)). Throws for unknown doc_id.
double bm25_score(const InvertedIndex& index,
                  std::span<const std::string> query_tokens,
                  std::int64_t doc_id);

// Documents with positive score, by score desc then doc_id asc, at most k.
std::vector<std::pair<std::int64_t, double>> retrieve_top_k(
    const InvertedIndex& index, std::span<const std::string> query_tokens,
    std::size_t k);

struct TermLanguageModel {
  std::map<std::string, std::size_t> counts;
  std::size_t total_count = 0;

  double probability(const std::string& term) const;
};

// Maximum-likelihood unigram model; throws "no PRF evidence" when empty.
TermLanguageModel build_term_lm(std::span<const TokenList> posts);

enum class ExtractionMode { kFrequency, kIdf };

struct PrfConfig {
  std::size_t k1 = 10;  // posts retrieved
  std::size_t k2 = 10;  // terms extracted
  ExtractionMode mode = ExtractionMode::kFrequency;
  std::size_t query_max_tokens = 64;
};

PrfTermSet extract_prf_terms(const TermLanguageModel& lm,
                             const PrfConfig& config,
                             const InvertedIndex& index);

struct ExpansionStats {
  std::size_t examples = 0;
  std::size_t distinct_responses = 0;
  std::size_t empty_sets = 0;
};

// Expands response candidates with feedback terms. Query and corpus share
// the retrieval tokenizer; results are memoised per response text.
class PrfExpander {
 public:
  PrfExpander(const InvertedIndex& index, PrfConfig config, Tokenizer tokenizer);

  PrfTermSet expand(const ResponseCandidate& response);
  const ExpansionStats& stats() const { return stats_; }

 private:
  const InvertedIndex& index_;
  PrfConfig config_;
  Tokenizer tokenizer_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
  ExpansionStats stats_;
};

Dataset expand_all_responses(const Dataset& dataset, const InvertedIndex& index,
                             const PrfConfig& config, const Tokenizer& tokenizer,
                             ExpansionStats* stats = nullptr);

}  // namespace prfrl
