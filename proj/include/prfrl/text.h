#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace prfrl {

using TokenList = std::vector<std::string>;
using TokenId = int;
using IdList = std::vector<TokenId>;

enum class TokenizerMode { kWord, kCharacter };

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::unordered_set<std::string> words)
      : words_(std::move(words)) {}

  // One token per line; blank lines and lines starting with '#' are skipped.
  static StopwordList load(const std::filesystem::path& path);
  static StopwordList parse(std::string_view text);
  // English function words used when retrieval asks for the default list.
  static const StopwordList& english();

  bool contains(const std::string& token) const { return words_.count(token) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct TokenizerConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  TokenizerMode mode = TokenizerMode::kWord;
  std::optional<std::filesystem::path> stopword_path;
};

class Tokenizer {
 public:
  explicit Tokenizer(TokenizerConfig config = {});
  Tokenizer(TokenizerConfig config, std::shared_ptr<const StopwordList> stopwords);

  TokenList operator()(std::string_view text) const;
  const TokenizerConfig& config() const { return config_; }

 private:
  TokenizerConfig config_;
  std::shared_ptr<const StopwordList> stopwords_;
};

// Word mode splits on maximal runs of non-alphanumeric bytes (bytes >= 0x80
// count as alphanumeric so UTF-8 words stay whole); character mode emits one
// token per UTF-8 code point and never emits whitespace.
TokenList tokenize(std::string_view text, const TokenizerConfig& config,
                   const StopwordList* stopwords = nullptr);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kEot = 4;
  static constexpr std::size_t kNumReserved = 5;

  Vocabulary();
  // Reserved tokens must be the first five entries, in order.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id(const std::string& token) const;
  const std::string& token(TokenId id) const;
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Newline-joined token list, used for checkpoint metadata.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void append(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Ranks tokens by frequency (desc) then lexicographically (asc); keeps those
// with count >= min_freq up to max_size entries including reserved ones.
Vocabulary build_vocab(std::span<const TokenList> corpus, std::size_t min_freq,
                       std::size_t max_size);

IdList encode(std::span<const std::string> tokens, const Vocabulary& vocab);
TokenList decode(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace prfrl
