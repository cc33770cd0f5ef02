#include "prfrl/text.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "prfrl/error.h"

namespace prfrl {
namespace {

constexpr const char* kEnglishStopwords[] = {
    "a",       "about",   "above",  "after",  "again",   "against", "all",
    "am",      "an",      "and",    "any",    "are",     "as",      "at",
    "be",      "because", "been",   "before", "being",   "below",   "between",
    "both",    "but",     "by",     "can",    "could",   "did",     "do",
    "does",    "doing",   "down",   "during", "each",    "few",     "for",
    "from",    "further", "had",    "has",    "have",    "having",  "he",
    "her",     "here",    "hers",   "herself", "him",    "himself", "his",
    "how",     "i",       "if",     "in",     "into",    "is",      "it",
    "its",     "itself",  "just",   "me",     "more",    "most",    "my",
    "myself",  "no",      "nor",    "not",    "now",     "of",      "off",
    "on",      "once",    "only",   "or",     "other",   "our",     "ours",
    "ourselves", "out",   "over",   "own",    "same",    "she",     "should",
    "so",      "some",    "such",   "than",   "that",    "the",     "their",
    "theirs",  "them",    "themselves", "then", "there", "these",   "they",
    "this",    "those",   "through", "to",    "too",     "under",   "until",
    "up",      "very",    "was",    "we",     "were",    "what",    "when",
    "where",   "which",   "while",  "who",    "whom",    "why",     "will",
    "with",    "would",   "you",    "your",   "yours",   "yourself",
    "yourselves",
};

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return c < 0x80 && !is_word_byte(c) && !is_space(c) && c >= 0x20;
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;  // stray continuation byte
}

void lower_ascii(std::string& s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
}

}  // namespace

StopwordList StopwordList::parse(std::string_view text) {
  std::unordered_set<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    auto end = line.find_last_not_of(" \t\r");
    std::string word = line.substr(begin, end - begin + 1);
    if (word.empty() || word[0] == '#') continue;
    words.insert(std::move(word));
  }
  return StopwordList(std::move(words));
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const StopwordList& StopwordList::english() {
  static const StopwordList list(std::unordered_set<std::string>(
      std::begin(kEnglishStopwords), std::end(kEnglishStopwords)));
  return list;
}

TokenList tokenize(std::string_view text, const TokenizerConfig& config,
                   const StopwordList* stopwords) {
  TokenList tokens;
  auto emit = [&](std::string token) {
    if (config.lowercase) lower_ascii(token);
    if (stopwords != nullptr && stopwords->contains(token)) return;
    tokens.push_back(std::move(token));
  };

  if (config.mode == TokenizerMode::kWord) {
    std::size_t i = 0;
    while (i < text.size()) {
      const auto c = static_cast<unsigned char>(text[i]);
      if (is_word_byte(c)) {
        std::size_t j = i;
        while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
        emit(std::string(text.substr(i, j - i)));
        i = j;
      } else {
        if (!config.strip_punctuation && is_ascii_punct(c)) {
          emit(std::string(1, static_cast<char>(c)));
        }
        ++i;
      }
    }
    return tokens;
  }

  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    const std::size_t len = std::min(utf8_length(c), text.size() - i);
    if (!is_space(c) && !(config.strip_punctuation && is_ascii_punct(c))) {
      emit(std::string(text.substr(i, len)));
    }
    i += len;
  }
  return tokens;
}

Tokenizer::Tokenizer(TokenizerConfig config) : config_(std::move(config)) {
  if (config_.stopword_path) {
    stopwords_ = std::make_shared<StopwordList>(
        StopwordList::load(*config_.stopword_path));
  }
}

Tokenizer::Tokenizer(TokenizerConfig config,
                     std::shared_ptr<const StopwordList> stopwords)
    : config_(std::move(config)), stopwords_(std::move(stopwords)) {}

TokenList Tokenizer::operator()(std::string_view text) const {
  return tokenize(text, config_, stopwords_.get());
}

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[EOT]"}) append(t);
}

void Vocabulary::append(const std::string& token) {
  auto [it, inserted] =
      ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
  if (!inserted) throw InvalidArgument("duplicate vocabulary token: " + token);
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  if (tokens.size() < kNumReserved ||
      !std::equal(vocab.tokens_.begin(), vocab.tokens_.end(), tokens.begin())) {
    throw InvalidArgument("vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    vocab.append(tokens[i]);
  }
  return vocab;
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    tokens.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return from_tokens(std::move(tokens));
}

Vocabulary build_vocab(std::span<const TokenList> corpus, std::size_t min_freq,
                       std::size_t max_size) {
  if (min_freq < 1) throw InvalidArgument("min_freq must be >= 1");
  if (max_size <= Vocabulary::kNumReserved) {
    throw InvalidArgument("max_size must exceed the reserved token count");
  }
  Vocabulary vocab;
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& t : doc) {
      if (!vocab.contains(t)) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // counts is already lexicographic, so a stable sort on frequency keeps the
  // lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = vocab.tokens();
  for (const auto& [token, count] : ranked) {
    if (tokens.size() >= max_size) break;
    if (count < min_freq) break;
    tokens.push_back(token);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

IdList encode(std::span<const std::string> tokens, const Vocabulary& vocab) {
  IdList ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

TokenList decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  TokenList tokens;
  tokens.reserve(ids.size());
  for (TokenId id : ids) tokens.push_back(vocab.token(id));
  return tokens;
}

}  // namespace prfrl
