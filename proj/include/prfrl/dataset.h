#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "prfrl/text.h"

namespace prfrl {

struct Utterance {
  std::string text;
  TokenList tokens;
};

struct DialogContext {
  std::string context_id;
  std::vector<Utterance> utterances;
};

struct ResponseCandidate {
  std::string candidate_id;
  std::string text;
  TokenList tokens;
};

// Candidate expansion terms for one response, in extraction rank order.
struct PrfTermSet {
  std::vector<std::string> terms;
  std::string source_candidate_id;

  friend bool operator==(const PrfTermSet&, const PrfTermSet&) = default;
};

enum class Split { kTrain, kValid, kTest };

Split parse_split(std::string_view name);
std::string_view split_name(Split split);

struct LabeledExample {
  std::shared_ptr<const DialogContext> context;
  ResponseCandidate response;
  int label = 0;
  Split split = Split::kTrain;
  std::optional<PrfTermSet> prf_candidates;
};

struct ExampleRef {
  Split split;
  std::size_t index;
};

struct Dataset {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
  std::vector<LabeledExample> test;
  // context_id -> its candidates, in file order.
  std::map<std::string, std::vector<ExampleRef>> groups;
  // Record order of the source file, used when writing the dataset back.
  std::vector<ExampleRef> file_order;

  std::vector<LabeledExample>& split(Split s);
  const std::vector<LabeledExample>& split(Split s) const;
  const LabeledExample& at(const ExampleRef& ref) const;
  std::size_t size() const { return train.size() + valid.size() + test.size(); }
};

// Parses JSON-lines records. Errors carry the 1-based line number.
Dataset parse_dataset(std::istream& in, const Tokenizer& tokenizer,
                      std::string_view source = "<stream>");
Dataset load_dataset(const std::filesystem::path& path,
                     const Tokenizer& tokenizer);

// Writes records in file order; prf_terms is written when present.
void write_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct CandidateGroup {
  std::shared_ptr<const DialogContext> context;
  std::vector<const LabeledExample*> candidates;
};

// Groups of one split ordered by context_id; candidates keep file order.
std::vector<CandidateGroup> group_ranked_candidates(const Dataset& dataset,
                                                    Split split);

struct ExternalPost {
  std::int64_t doc_id = 0;
  std::string text;
  TokenList tokens;
};

std::vector<ExternalPost> parse_corpus(std::istream& in,
                                       const Tokenizer& tokenizer,
                                       std::string_view source = "<stream>");
std::vector<ExternalPost> load_corpus(const std::filesystem::path& path,
                                      const Tokenizer& tokenizer);

}  // namespace prfrl
