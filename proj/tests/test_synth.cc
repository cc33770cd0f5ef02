#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "prfrl/config.h"
#include "prfrl/dataset.h"
#include "prfrl/error.h"
#include "prfrl/pipeline.h"
#include "prfrl/retrieval.h"
#include "prfrl/synth.h"

namespace prfrl {
namespace {

SynthConfig small() {
  SynthConfig c;
  c.contexts = 30;
  c.candidates = 5;
  c.seed = 3;
  return c;
}

TEST(Synth, ShapeAndHelpfulShare) {
  const SynthTask t = generate_synth(small());
  ASSERT_EQ(t.records.size(), 150u);
  std::size_t helpful = 0, total = 0, positives = 0;
  for (const SynthRecord& r : t.records) {
    EXPECT_EQ(r.prf_terms.size(), 4u);
    positives += static_cast<std::size_t>(r.label);
    for (std::size_t i = 0; i < r.prf_terms.size(); ++i) {
      helpful += r.helpful[i] ? 1 : 0;
      EXPECT_EQ(is_noise_term(r.prf_terms[i]), !r.helpful[i]);
      ++total;
    }
  }
  EXPECT_EQ(positives, 30u);
  EXPECT_EQ(helpful * 2, total);
}

TEST(Synth, Deterministic) {
  std::stringstream a, b;
  write_synth_dataset(generate_synth(small()), a);
  write_synth_dataset(generate_synth(small()), b);
  EXPECT_EQ(a.str(), b.str());
  SynthConfig other = small();
  other.seed = 4;
  std::stringstream c;
  write_synth_dataset(generate_synth(other), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig c = small();
  c.noise_bias = 1.5;
  EXPECT_THROW(generate_synth(c), InvalidArgument);
  c = small();
  c.candidates = 1;
  EXPECT_THROW(generate_synth(c), InvalidArgument);
}

TEST(Synth, RetrievalReproducesTerms) {
  const SynthTask t = generate_synth(small());
  std::stringstream data, corpus;
  write_synth_dataset(t, data);
  write_synth_corpus(t, corpus);
  RunConfig config;
  config.prf.k2 = small().terms;
  const Tokenizer retrieval = make_retrieval_tokenizer(config);
  const Dataset dataset = parse_dataset(data, make_ranker_tokenizer(config));
  const InvertedIndex index = InvertedIndex::build(parse_corpus(corpus, retrieval));
  const Dataset expanded = expand_all_responses(dataset, index, config.prf, retrieval);
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    ASSERT_EQ(expanded.split(s).size(), dataset.split(s).size());
    for (std::size_t i = 0; i < dataset.split(s).size(); ++i) {
      std::vector<std::string> want = dataset.split(s)[i].prf_candidates->terms;
      std::vector<std::string> got = expanded.split(s)[i].prf_candidates->terms;
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      EXPECT_EQ(got, want) << dataset.split(s)[i].response.candidate_id;
    }
  }
}

}  // namespace
}  // namespace prfrl
