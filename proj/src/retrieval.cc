#include "prfrl/retrieval.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "binary_io.h"
#include "prfrl/error.h"
#include "prfrl/log.h"

namespace prfrl {
namespace {

constexpr char kIndexMagic[8] = {'P', 'R', 'F', 'R', 'L', 'I', 'D', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

double idf_from_df(std::size_t n, std::size_t df) {
  const double N = static_cast<double>(n);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (N - d + 0.5) / (d + 0.5));
}

double term_weight(const Bm25Params& p, double idf, std::uint32_t tf,
                   std::uint32_t doc_length, double avgdl) {
  const double f = static_cast<double>(tf);
  const double norm = p.k1 * (1.0 - p.b + p.b * static_cast<double>(doc_length) / avgdl);
  return idf * f * (p.k1 + 1.0) / (f + norm);
}

// Distinct query terms in first-occurrence order.
std::vector<std::string> distinct_terms(std::span<const std::string> query) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : query) {
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

}  // namespace

InvertedIndex InvertedIndex::build(std::span<const ExternalPost> posts,
                                   Bm25Params params) {
  if (posts.empty()) throw InvalidArgument("empty corpus");
  if (!(params.k1 > 0.0) || params.b < 0.0 || params.b > 1.0) {
    throw InvalidArgument("invalid BM25 parameters");
  }
  std::vector<std::size_t> order(posts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return posts[a].doc_id < posts[b].doc_id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (posts[order[i]].doc_id == posts[order[i - 1]].doc_id) {
      throw InvalidArgument("duplicate doc_id " +
                            std::to_string(posts[order[i]].doc_id));
    }
  }

  std::vector<std::string> terms;
  for (const auto& post : posts) {
    terms.insert(terms.end(), post.tokens.begin(), post.tokens.end());
  }
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    ids.emplace(terms[i], static_cast<std::uint32_t>(i));
  }

  std::vector<std::int64_t> doc_ids;
  std::vector<std::vector<std::uint32_t>> docs;
  for (std::size_t slot : order) {
    doc_ids.push_back(posts[slot].doc_id);
    std::vector<std::uint32_t> doc;
    doc.reserve(posts[slot].tokens.size());
    for (const auto& t : posts[slot].tokens) doc.push_back(ids.at(t));
    docs.push_back(std::move(doc));
  }
  return from_forward(params, std::move(terms), std::move(doc_ids),
                      std::move(docs));
}

InvertedIndex InvertedIndex::from_forward(
    Bm25Params params, std::vector<std::string> terms,
    std::vector<std::int64_t> doc_ids,
    std::vector<std::vector<std::uint32_t>> docs) {
  InvertedIndex index;
  index.params_ = params;
  index.terms_ = std::move(terms);
  for (std::size_t i = 0; i < index.terms_.size(); ++i) {
    index.term_ids_.emplace(index.terms_[i], static_cast<std::uint32_t>(i));
  }
  index.doc_ids_ = std::move(doc_ids);
  index.docs_ = std::move(docs);
  index.postings_.assign(index.terms_.size(), {});

  double total_length = 0.0;
  std::vector<std::uint32_t> tf(index.terms_.size(), 0);
  for (std::size_t slot = 0; slot < index.docs_.size(); ++slot) {
    const auto& doc = index.docs_[slot];
    total_length += static_cast<double>(doc.size());
    for (std::uint32_t t : doc) ++tf[t];
    for (std::uint32_t t : doc) {
      if (tf[t] == 0) continue;
      index.postings_[t].push_back({index.doc_ids_[slot], tf[t]});
      tf[t] = 0;
    }
  }
  index.avg_doc_length_ = total_length / static_cast<double>(index.docs_.size());
  return index;
}

std::size_t InvertedIndex::doc_slot(std::int64_t doc_id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
  if (it == doc_ids_.end() || *it != doc_id) {
    throw InvalidArgument("unknown doc_id " + std::to_string(doc_id));
  }
  return static_cast<std::size_t>(it - doc_ids_.begin());
}

bool InvertedIndex::has_doc(std::int64_t doc_id) const {
  return std::binary_search(doc_ids_.begin(), doc_ids_.end(), doc_id);
}

std::uint32_t InvertedIndex::doc_length(std::int64_t doc_id) const {
  return static_cast<std::uint32_t>(docs_[doc_slot(doc_id)].size());
}

TokenList InvertedIndex::doc_tokens(std::int64_t doc_id) const {
  TokenList out;
  for (std::uint32_t t : docs_[doc_slot(doc_id)]) out.push_back(terms_[t]);
  return out;
}

std::size_t InvertedIndex::df(const std::string& term) const {
  auto it = term_ids_.find(term);
  return it == term_ids_.end() ? 0 : postings_[it->second].size();
}

double InvertedIndex::idf(const std::string& term) const {
  const std::size_t d = df(term);
  return d == 0 ? 0.0 : idf_from_df(doc_count(), d);
}

std::span<const Posting> InvertedIndex::postings(const std::string& term) const {
  auto it = term_ids_.find(term);
  if (it == term_ids_.end()) return {};
  return postings_[it->second];
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
  auto same_postings = [&] {
    for (std::size_t t = 0; t < a.postings_.size(); ++t) {
      const auto& pa = a.postings_[t];
      const auto& pb = b.postings_[t];
      if (pa.size() != pb.size()) return false;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i].doc_id != pb[i].doc_id || pa[i].tf != pb[i].tf) return false;
      }
    }
    return true;
  };
  return std::bit_cast<std::uint64_t>(a.params_.k1) ==
             std::bit_cast<std::uint64_t>(b.params_.k1) &&
         std::bit_cast<std::uint64_t>(a.params_.b) ==
             std::bit_cast<std::uint64_t>(b.params_.b) &&
         a.terms_ == b.terms_ && a.doc_ids_ == b.doc_ids_ &&
         a.docs_ == b.docs_ &&
         std::bit_cast<std::uint64_t>(a.avg_doc_length_) ==
             std::bit_cast<std::uint64_t>(b.avg_doc_length_) &&
         a.postings_.size() == b.postings_.size() && same_postings();
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index: " + path.string());
  io::BinaryWriter w(out);
  w.bytes(kIndexMagic, sizeof(kIndexMagic));
  w.u32(kIndexVersion);
  w.u64(std::bit_cast<std::uint64_t>(params_.k1));
  w.u64(std::bit_cast<std::uint64_t>(params_.b));
  w.u64(terms_.size());
  for (const auto& t : terms_) w.str(t);
  w.u64(doc_ids_.size());
  for (std::size_t slot = 0; slot < doc_ids_.size(); ++slot) {
    w.u64(static_cast<std::uint64_t>(doc_ids_[slot]));
    w.u64(docs_[slot].size());
    for (std::uint32_t t : docs_[slot]) w.u32(t);
  }
  if (!out) throw IoError("failed writing index: " + path.string());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index: " + path.string());
  io::BinaryReader r(in, path.string());
  char magic[sizeof(kIndexMagic)];
  r.bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + sizeof(magic), kIndexMagic)) {
    throw IoError("not an index file: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kIndexVersion) {
    throw IoError("unsupported index version " + std::to_string(version));
  }
  Bm25Params params;
  params.k1 = std::bit_cast<double>(r.u64());
  params.b = std::bit_cast<double>(r.u64());
  std::vector<std::string> terms(r.u64());
  for (auto& t : terms) t = r.str();
  const std::uint64_t n_docs = r.u64();
  if (n_docs == 0) throw IoError("index has no documents: " + path.string());
  std::vector<std::int64_t> doc_ids;
  std::vector<std::vector<std::uint32_t>> docs;
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    doc_ids.push_back(static_cast<std::int64_t>(r.u64()));
    std::vector<std::uint32_t> doc(r.u64());
    for (auto& t : doc) {
      t = r.u32();
      if (t >= terms.size()) throw IoError("corrupt index: " + path.string());
    }
    docs.push_back(std::move(doc));
  }
  return from_forward(params, std::move(terms), std::move(doc_ids),
                      std::move(docs));
}

double bm25_score(const InvertedIndex& index,
                  std::span<const std::string> query_tokens,
                  std::int64_t doc_id) {
  const std::size_t slot = index.doc_slot(doc_id);
  const auto& doc = index.docs_[slot];
  const auto dl = static_cast<std::uint32_t>(doc.size());
  double score = 0.0;
  for (const auto& term : distinct_terms(query_tokens)) {
    auto it = index.term_ids_.find(term);
    if (it == index.term_ids_.end()) continue;
    const auto& plist = index.postings_[it->second];
    auto p = std::lower_bound(
        plist.begin(), plist.end(), doc_id,
        [](const Posting& a, std::int64_t id) { return a.doc_id < id; });
    if (p == plist.end() || p->doc_id != doc_id) continue;
    score += term_weight(index.params_, idf_from_df(index.doc_count(), plist.size()),
                         p->tf, dl, index.avg_doc_length_);
  }
  return score;
}

std::vector<std::pair<std::int64_t, double>> retrieve_top_k(
    const InvertedIndex& index, std::span<const std::string> query_tokens,
    std::size_t k) {
  if (k < 1) throw InvalidArgument("K1 must be >= 1");
  std::vector<double> acc(index.doc_count(), 0.0);
  std::vector<bool> touched(index.doc_count(), false);
  for (const auto& term : distinct_terms(query_tokens)) {
    auto it = index.term_ids_.find(term);
    if (it == index.term_ids_.end()) continue;
    const auto& plist = index.postings_[it->second];
    const double idf = idf_from_df(index.doc_count(), plist.size());
    // Postings and doc slots are both sorted by doc_id, so walk them together.
    std::size_t slot = 0;
    for (const Posting& p : plist) {
      while (index.doc_ids_[slot] != p.doc_id) ++slot;
      acc[slot] += term_weight(index.params_, idf, p.tf,
                               static_cast<std::uint32_t>(index.docs_[slot].size()),
                               index.avg_doc_length_);
      touched[slot] = true;
    }
  }
  std::vector<std::pair<std::int64_t, double>> hits;
  for (std::size_t slot = 0; slot < acc.size(); ++slot) {
    if (touched[slot] && acc[slot] > 0.0) hits.emplace_back(index.doc_ids_[slot], acc[slot]);
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k),
                      hits.end(), better);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), better);
  }
  return hits;
}

double TermLanguageModel::probability(const std::string& term) const {
  auto it = counts.find(term);
  if (it == counts.end() || total_count == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_count);
}

TermLanguageModel build_term_lm(std::span<const TokenList> posts) {
  TermLanguageModel lm;
  for (const auto& post : posts) {
    for (const auto& t : post) {
      ++lm.counts[t];
      ++lm.total_count;
    }
  }
  if (lm.total_count == 0) throw InvalidArgument("no PRF evidence");
  return lm;
}

PrfTermSet extract_prf_terms(const TermLanguageModel& lm,
                             const PrfConfig& config,
                             const InvertedIndex& index) {
  if (config.k2 < 1) throw InvalidArgument("K2 must be >= 1");
  struct Scored {
    const std::string* term;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(lm.counts.size());
  for (const auto& [term, count] : lm.counts) {
    double score = static_cast<double>(count);
    if (config.mode == ExtractionMode::kIdf) score *= index.idf(term);
    scored.push_back({&term, score});
  }
  // lm.counts is sorted, so a stable sort keeps the lexicographic tie-break.
  // Frequency mode ranks by raw count, which orders exactly like count/total.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  PrfTermSet out;
  for (std::size_t i = 0; i < scored.size() && i < config.k2; ++i) {
    out.terms.push_back(*scored[i].term);
  }
  return out;
}

PrfExpander::PrfExpander(const InvertedIndex& index, PrfConfig config,
                         Tokenizer tokenizer)
    : index_(index), config_(config), tokenizer_(std::move(tokenizer)) {
  if (config_.k1 < 1 || config_.k2 < 1) throw InvalidArgument("K1 and K2 must be >= 1");
}

PrfTermSet PrfExpander::expand(const ResponseCandidate& response) {
  ++stats_.examples;
  auto it = cache_.find(response.text);
  if (it == cache_.end()) {
    ++stats_.distinct_responses;
    TokenList query = tokenizer_(response.text);
    if (query.size() > config_.query_max_tokens) query.resize(config_.query_max_tokens);
    std::vector<std::string> terms;
    const auto hits = retrieve_top_k(index_, query, config_.k1);
    std::vector<TokenList> posts;
    for (const auto& [doc_id, score] : hits) posts.push_back(index_.doc_tokens(doc_id));
    std::size_t evidence = 0;
    for (const auto& p : posts) evidence += p.size();
    if (evidence == 0) {
      log::warning("no PRF evidence for response {}", response.candidate_id);
    } else {
      terms = extract_prf_terms(build_term_lm(posts), config_, index_).terms;
    }
    it = cache_.emplace(response.text, std::move(terms)).first;
  }
  if (it->second.empty()) ++stats_.empty_sets;
  return PrfTermSet{it->second, response.candidate_id};
}

Dataset expand_all_responses(const Dataset& dataset, const InvertedIndex& index,
                             const PrfConfig& config, const Tokenizer& tokenizer,
                             ExpansionStats* stats) {
  Dataset out = dataset;
  PrfExpander expander(index, config, tokenizer);
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    for (auto& ex : out.split(s)) ex.prf_candidates = expander.expand(ex.response);
  }
  if (stats != nullptr) *stats = expander.stats();
  return out;
}

}  // namespace prfrl
