#include "prfrl/pipeline.h"

#include "prfrl/error.h"
#include "prfrl/log.h"

namespace prfrl {

Tokenizer make_ranker_tokenizer(const RunConfig& config) { return Tokenizer(config.tokenizer); }

Tokenizer make_retrieval_tokenizer(const RunConfig& config) {
  TokenizerConfig tc = config.tokenizer;
  tc.stopword_path.reset();
  std::shared_ptr<const StopwordList> stopwords;
  if (config.retrieval_stopwords == "english") {
    stopwords = std::make_shared<StopwordList>(StopwordList::english());
  } else if (config.retrieval_stopwords != "none" && !config.retrieval_stopwords.empty()) {
    stopwords = std::make_shared<StopwordList>(StopwordList::load(config.retrieval_stopwords));
  }
  return Tokenizer(tc, std::move(stopwords));
}

InvertedIndex build_index_from_corpus(const std::filesystem::path& corpus,
                                      const RunConfig& config) {
  const std::vector<ExternalPost> posts = load_corpus(corpus, make_retrieval_tokenizer(config));
  return InvertedIndex::build(posts, config.bm25);
}

namespace {

std::vector<TokenList> term_tokens(const LabeledExample& ex, const Tokenizer& tokenizer) {
  std::vector<TokenList> out;
  if (!ex.prf_candidates) return out;
  for (const std::string& term : ex.prf_candidates->terms) out.push_back(tokenizer(term));
  return out;
}

}  // namespace

Vocabulary build_model_vocab(const Dataset& dataset, const RunConfig& config,
                             const Tokenizer& tokenizer) {
  std::vector<TokenList> corpus;
  const DialogContext* last = nullptr;
  for (const LabeledExample& ex : dataset.train) {
    if (ex.context.get() != last) {
      for (const Utterance& u : ex.context->utterances) corpus.push_back(u.tokens);
      last = ex.context.get();
    }
    corpus.push_back(ex.response.tokens);
    for (TokenList& t : term_tokens(ex, tokenizer)) corpus.push_back(std::move(t));
  }
  return build_vocab(corpus, config.vocab_min_freq, config.vocab_max_size);
}

std::vector<EncodedExample> encode_split(const Dataset& dataset, Split split,
                                         const Vocabulary& vocab, const Tokenizer& tokenizer) {
  std::vector<EncodedExample> out;
  for (const LabeledExample& ex : dataset.split(split)) {
    EncodedExample enc;
    enc.context_id = ex.context->context_id;
    enc.candidate_id = ex.response.candidate_id;
    for (const Utterance& u : ex.context->utterances) enc.turns.push_back(encode(u.tokens, vocab));
    enc.response = encode(ex.response.tokens, vocab);
    if (enc.response.empty()) enc.response.push_back(Vocabulary::kUnk);
    if (ex.prf_candidates) {
      for (const std::string& term : ex.prf_candidates->terms) {
        IdList ids = encode(tokenizer(term), vocab);
        if (ids.empty()) continue;
        enc.term_strings.push_back(term);
        enc.terms.push_back(std::move(ids));
      }
    }
    enc.label = ex.label;
    out.push_back(std::move(enc));
  }
  return out;
}

namespace {

bool has_terms(const Dataset& dataset) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    for (const LabeledExample& ex : dataset.split(s)) {
      if (ex.prf_candidates) return true;
    }
  }
  return false;
}

}  // namespace

TrainedModel train_pipeline(const Dataset& dataset, const RunConfig& config,
                            const TrainOptions& options) {
  config.validate();
  if (config.selector.mode != SelectionMode::kNone && !has_terms(dataset)) {
    throw InvalidArgument("dataset has no PRF terms; run expand or pass --index");
  }
  const Tokenizer tokenizer = make_ranker_tokenizer(config);
  TrainedModel out;
  out.config = config;
  out.config.train.seed = config.seed;
  out.vocab = build_model_vocab(dataset, config, tokenizer);
  TrainingData data;
  data.train = encode_split(dataset, Split::kTrain, out.vocab, tokenizer);
  data.valid = encode_split(dataset, Split::kValid, out.vocab, tokenizer);
  log::info("training {} on {} examples, vocabulary {}", selection_mode_name(config.selector.mode),
            data.train.size(), out.vocab.size());
  out.model = train_model(data, config.model_config(out.vocab.size()), out.config.train, options);
  out.model.params.metadata["config"] = out.config.to_text();
  out.model.params.metadata["vocab"] = out.vocab.serialize();
  return out;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  ParameterStore params = model.model.params;
  params.metadata["config"] = model.config.to_text();
  params.metadata["vocab"] = model.vocab.serialize();
  save_checkpoint(params, path);
}

TrainedModel load_model(const std::filesystem::path& path) {
  TrainedModel out;
  out.model.params = load_checkpoint(path);
  const auto& meta = out.model.params.metadata;
  const auto config = meta.find("config");
  const auto vocab = meta.find("vocab");
  if (config == meta.end() || vocab == meta.end()) {
    throw IoError("checkpoint lacks configuration metadata: " + path.string());
  }
  out.config = RunConfig::parse(config->second, path.string() + "[config]");
  out.vocab = Vocabulary::deserialize(vocab->second);
  out.model.encoder = out.config.encoder;
  out.model.limits = out.config.limits;
  return out;
}

Evaluation evaluate_model(const TrainedModel& model, const Dataset& dataset, Split split,
                          std::optional<SelectionMode> mode) {
  SelectorConfig selector = model.config.selector;
  if (mode) selector.mode = *mode;
  if (selector.mode != SelectionMode::kNone && !has_terms(dataset)) {
    throw InvalidArgument("dataset has no PRF terms; run expand or pass --index");
  }
  const Tokenizer tokenizer = make_ranker_tokenizer(model.config);
  const std::vector<EncodedExample> examples =
      encode_split(dataset, split, model.vocab, tokenizer);
  if (examples.empty()) throw InvalidArgument("empty split: " + std::string(split_name(split)));

  Evaluation out;
  std::map<std::string, std::vector<ScoredCandidate>> by_context;
  for (const EncodedExample& ex : examples) {
    EvalSelection sel;
    const double p = score_example(model.model, selector, ex, &sel);
    by_context[ex.context_id].push_back({ex.candidate_id, p, ex.label});
    out.selections.push_back({ex.candidate_id, ex.term_strings, sel.actions, sel.p_select});
  }
  std::vector<RankedGroup> groups;
  for (auto& [context_id, candidates] : by_context) {
    groups.push_back(RankedGroup::from_scores(context_id, std::move(candidates)));
  }
  out.report = compute_metrics(groups);
  return out;
}

const std::vector<SelectionMode>& comparison_modes() {
  static const std::vector<SelectionMode> modes = {
      SelectionMode::kNone,        SelectionMode::kRule,   SelectionMode::kGateTanh,
      SelectionMode::kGateSigmoid, SelectionMode::kGumbel, SelectionMode::kRlSample};
  return modes;
}

}  // namespace prfrl
