#include "prfrl/dataset.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "prfrl/error.h"

namespace prfrl {

using nlohmann::json;

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split: " + std::string(name));
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

std::vector<LabeledExample>& Dataset::split(Split s) {
  switch (s) {
    case Split::kValid: return valid;
    case Split::kTest: return test;
    default: return train;
  }
}

const std::vector<LabeledExample>& Dataset::split(Split s) const {
  return const_cast<Dataset*>(this)->split(s);
}

const LabeledExample& Dataset::at(const ExampleRef& ref) const {
  return split(ref.split).at(ref.index);
}

namespace {

[[noreturn]] void fail(std::string_view source, std::size_t line,
                       const std::string& what) {
  throw InvalidArgument(std::string(source) + ":" + std::to_string(line) +
                        ": " + what);
}

const json& require(const json& record, const char* key,
                    std::string_view source, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) fail(source, line, std::string("missing field \"") + key + "\"");
  return *it;
}

std::string require_string(const json& record, const char* key,
                           std::string_view source, std::size_t line) {
  const json& v = require(record, key, source, line);
  if (!v.is_string()) fail(source, line, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

bool same_context(const DialogContext& a, const std::vector<std::string>& texts) {
  if (a.utterances.size() != texts.size()) return false;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (a.utterances[i].text != texts[i]) return false;
  }
  return true;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const Tokenizer& tokenizer,
                      std::string_view source) {
  Dataset dataset;
  std::map<std::string, std::shared_ptr<const DialogContext>> contexts;
  std::map<std::string, Split> context_split;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) fail(source, line_no, "record must be a JSON object");

    const std::string context_id = require_string(record, "context_id", source, line_no);
    const std::string candidate_id = require_string(record, "candidate_id", source, line_no);
    const json& context_json = require(record, "context", source, line_no);
    if (!context_json.is_array() || context_json.empty()) {
      fail(source, line_no, "field \"context\" must be a non-empty array of strings");
    }
    std::vector<std::string> turns;
    for (const auto& u : context_json) {
      if (!u.is_string()) fail(source, line_no, "context utterances must be strings");
      turns.push_back(u.get<std::string>());
    }
    const std::string response = require_string(record, "response", source, line_no);
    const json& label_json = require(record, "label", source, line_no);
    if (!label_json.is_number_integer() ||
        (label_json.get<long long>() != 0 && label_json.get<long long>() != 1)) {
      fail(source, line_no, "invalid label (expected 0 or 1)");
    }
    Split split;
    try {
      split = parse_split(require_string(record, "split", source, line_no));
    } catch (const InvalidArgument& e) {
      fail(source, line_no, e.what());
    }

    if (!seen.emplace(context_id, candidate_id).second) {
      fail(source, line_no, "duplicate (context_id, candidate_id): (" +
                                context_id + ", " + candidate_id + ")");
    }

    auto ctx_it = contexts.find(context_id);
    if (ctx_it == contexts.end()) {
      auto ctx = std::make_shared<DialogContext>();
      ctx->context_id = context_id;
      for (auto& text : turns) {
        Utterance u;
        u.tokens = tokenizer(text);
        u.text = std::move(text);
        ctx->utterances.push_back(std::move(u));
      }
      ctx_it = contexts.emplace(context_id, std::move(ctx)).first;
      context_split.emplace(context_id, split);
    } else {
      if (!same_context(*ctx_it->second, turns)) {
        fail(source, line_no, "context text differs from earlier records of context_id " + context_id);
      }
      if (context_split.at(context_id) != split) {
        fail(source, line_no, "context_id " + context_id + " appears in more than one split");
      }
    }

    LabeledExample ex;
    ex.context = ctx_it->second;
    ex.response.candidate_id = candidate_id;
    ex.response.tokens = tokenizer(response);
    ex.response.text = response;
    ex.label = static_cast<int>(label_json.get<long long>());
    ex.split = split;
    if (auto it = record.find("prf_terms"); it != record.end() && !it->is_null()) {
      if (!it->is_array()) fail(source, line_no, "field \"prf_terms\" must be an array");
      PrfTermSet terms;
      terms.source_candidate_id = candidate_id;
      for (const auto& t : *it) {
        if (!t.is_string()) fail(source, line_no, "prf_terms entries must be strings");
        terms.terms.push_back(t.get<std::string>());
      }
      ex.prf_candidates = std::move(terms);
    }

    auto& bucket = dataset.split(split);
    const ExampleRef ref{split, bucket.size()};
    bucket.push_back(std::move(ex));
    dataset.groups[context_id].push_back(ref);
    dataset.file_order.push_back(ref);
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path,
                     const Tokenizer& tokenizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  return parse_dataset(in, tokenizer, path.string());
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& ref : dataset.file_order) {
    const LabeledExample& ex = dataset.at(ref);
    json record;
    record["context_id"] = ex.context->context_id;
    record["candidate_id"] = ex.response.candidate_id;
    json turns = json::array();
    for (const auto& u : ex.context->utterances) turns.push_back(u.text);
    record["context"] = std::move(turns);
    record["response"] = ex.response.text;
    record["label"] = ex.label;
    record["split"] = std::string(split_name(ex.split));
    if (ex.prf_candidates) record["prf_terms"] = ex.prf_candidates->terms;
    out << record.dump() << '\n';
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  write_dataset(dataset, out);
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

std::vector<CandidateGroup> group_ranked_candidates(const Dataset& dataset,
                                                    Split split) {
  std::vector<CandidateGroup> groups;
  // dataset.groups is a std::map, so iteration is already sorted by id.
  for (const auto& [context_id, refs] : dataset.groups) {
    if (refs.empty() || refs.front().split != split) continue;
    CandidateGroup group;
    group.context = dataset.at(refs.front()).context;
    for (const auto& ref : refs) group.candidates.push_back(&dataset.at(ref));
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<ExternalPost> parse_corpus(std::istream& in,
                                       const Tokenizer& tokenizer,
                                       std::string_view source) {
  std::vector<ExternalPost> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) fail(source, line_no, "record must be a JSON object");
    const json& id = require(record, "doc_id", source, line_no);
    if (!id.is_number_integer()) fail(source, line_no, "doc_id must be an integer");
    ExternalPost post;
    post.doc_id = id.get<std::int64_t>();
    post.text = require_string(record, "text", source, line_no);
    post.tokens = tokenizer(post.text);
    posts.push_back(std::move(post));
  }
  return posts;
}

std::vector<ExternalPost> load_corpus(const std::filesystem::path& path,
                                      const Tokenizer& tokenizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  return parse_corpus(in, tokenizer, path.string());
}

}  // namespace prfrl
